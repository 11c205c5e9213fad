#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skitb/backend.hpp"
#include "skitb/hungarian.hpp"
#include "skitb/kalman.hpp"
#include "skitb/ope.hpp"

namespace skitb::sort {

struct SortParams {
    double iou_gate = 0.3;
    int max_age = 1;
    int min_hits = 3;
    double min_detection_score = 0.0;
    bool reacquire = false;  // single-target view only, see SortBackend
    KalmanNoise noise;
};

struct TrackOutput {
    int id = 0;
    geom::BBox box;
    bool matched = false;
};

struct SortStepResult {
    Assignment assignment;  // rows: tracks as passed in, cols: detections; gated pairs moved to unmatched
    std::vector<TrackOutput> outputs;
    std::vector<int> deleted_ids;
    std::vector<int> spawned_ids;
};

/// One association step on tracks already predicted to the current frame. Cost is 1 - IoU; pairs
/// below the IoU gate stay unmatched. Matched tracks are corrected, unmatched detections spawn
/// tracks, tracks unseen for more than max_age frames are dropped.
SortStepResult sort_step(std::vector<KalmanTrack>& tracks, std::span<const geom::BBox> detections,
                         const SortParams& params, int& next_id);

/// Multi-target SORT state over a detection sequence.
class SortTracker {
public:
    explicit SortTracker(SortParams params = {}) : params_(std::move(params)) {}

    /// Predicts every track one frame ahead, then associates.
    SortStepResult step(std::span<const geom::BBox> detections);
    int seed_track(const geom::BBox& box, int hits);
    void reset();

    const std::vector<KalmanTrack>& tracks() const { return tracks_; }
    const KalmanTrack* find(int id) const;
    const SortParams& params() const { return params_; }

private:
    SortParams params_;
    std::vector<KalmanTrack> tracks_;
    int next_id_ = 1;
};

/// Single-target view of SORT: follows the track seeded from the init box. Confidence is 1 on
/// matched frames, 1/(1+frames since last match) while coasting, absent once it is dropped. With
/// `reacquire`, a dropped track is replaced by the track matched on that frame with the longest
/// hit streak (lowest id on ties), which lets the view survive camera cuts.
class SortBackend final : public protocol::TrackerBackend {
public:
    SortBackend(protocol::DetectionStream detections, SortParams params = {});
    std::string name() const override { return "sort"; }

    const SortTracker& tracker() const { return tracker_; }

protected:
    void do_init(const protocol::FrameContext& ctx, const geom::BBox& box) override;
    metrics::Prediction do_update(const protocol::FrameContext& ctx) override;

private:
    protocol::DetectionStream detections_;
    SortTracker tracker_;
    std::optional<int> seeded_id_;
};

}  // namespace skitb::sort
