#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skitb/datamodel.hpp"
#include "skitb/geometry.hpp"

namespace skitb::metrics {

/// One frame of tracker output. An absent box means the tracker reports the target as not present.
struct Prediction {
    std::optional<geom::BBox> box;
    double confidence = 0.0;
    friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Per-frame predictions aligned to a video. `init_frame` is the frame the tracker was given, it is
/// never scored. Frames before it (detector initialization) are absent.
struct PredictionTrace {
    std::vector<Prediction> frames;
    std::optional<std::size_t> init_frame;

    std::size_t size() const { return frames.size(); }
    friend bool operator==(const PredictionTrace&, const PredictionTrace&) = default;
};

/// Sub-trace for frames [start, start+len); the init frame is kept only if it falls inside.
PredictionTrace slice(const PredictionTrace& trace, std::size_t start, std::size_t len);

struct EvalOptions {
    bool include_occluded = true;
    /// When set, a frame's overlap is 1 if IoU >= this value and 0 otherwise (success counting)
    /// instead of the IoU itself.
    std::optional<double> success_iou;
};

struct PrRe {
    double pr = 0.0;
    double re = 0.0;
    bool pr_defined = false;  // false when no frame is reported at the threshold
    std::size_t reported = 0;
    std::size_t scored = 0;
};

/// Long-term precision and recall at confidence threshold tau. A frame is reported when it has a box
/// with confidence >= tau. Pr averages overlap over reported frames, Re over all scored frames with
/// unreported frames contributing 0.
PrRe pr_re(const PredictionTrace& trace, std::span<const data::FrameAnnotation> gts, double tau,
           const EvalOptions& opts = {});

double f_score(double pr, double re);

struct LTEvalResult {
    std::vector<double> thresholds;
    std::vector<double> pr;
    std::vector<double> re;
    std::vector<double> f;
    double f_best = 0.0;
    double tau_best = 0.0;
    double pr_best = 0.0;
    double re_best = 0.0;
};

/// F evaluated on every distinct confidence in the trace plus {0, 1}; F* is the maximum, tau* the
/// smallest threshold that attains it.
LTEvalResult fscore_optimize(const PredictionTrace& trace, std::span<const data::FrameAnnotation> gts,
                             const EvalOptions& opts = {});

inline constexpr std::array<std::size_t, 7> kGsrWindows = {1, 7, 15, 22, 30, 60, 90};

/// Generalized success robustness: index of the first run of wrong frames (IoU < iou_threshold,
/// absent = wrong) longer than `recovery_window`, divided by the sequence length; 1 if none.
/// The init frame is never wrong. With include_occluded = false, occluded frames are skipped
/// (they neither fail nor interrupt a run).
double gsr(const PredictionTrace& trace, std::span<const data::FrameAnnotation> gts, std::size_t recovery_window,
           double iou_threshold = 0.5, bool include_occluded = true);

std::vector<double> gsr_curve(const PredictionTrace& trace, std::span<const data::FrameAnnotation> gts,
                              double iou_threshold = 0.5, bool include_occluded = true);

/// Waiting time per frame for a single worker that processes every frame in order.
struct LatencyProfile {
    std::vector<double> arrival;
    std::vector<double> completion;
    std::vector<double> delay;

    double mean_delay() const;
};

LatencyProfile latency_profile(std::span<const double> costs, double fps);

struct PoseJoints {
    std::string head = "head";
    std::string neck = "neck";
};

/// Fraction of present ground-truth joints predicted closer than half the head-neck distance.
double pck(const data::KeypointPose& pred, const data::KeypointPose& gt, const PoseJoints& joints = {});

struct MpjpeNormalizer {
    /// Unset: diagonal of the tight box around the ground-truth joints.
    std::optional<double> custom;
};

double mpjpe(const data::KeypointPose& pred, const data::KeypointPose& gt, const MpjpeNormalizer& norm = {});

/// Scores of one evaluated sequence (an MC video or one of its clips).
struct SequenceScore {
    std::string id;
    double pr = 0.0;
    double re = 0.0;
    double f = 0.0;
    double tau = 0.0;
    bool pr_defined = false;
    std::vector<double> gsr;  // one value per kGsrWindows entry
};

struct AggregateRow {
    std::size_t count = 0;
    double pr = 0.0;
    double re = 0.0;
    double f = 0.0;
    std::vector<double> gsr;
};

/// Unweighted mean over sequences. Throws InvalidArgument when empty.
AggregateRow aggregate(std::span<const SequenceScore> scores);

/// Means per group label; a sequence may belong to several groups (e.g. attributes).
std::map<std::string, AggregateRow> aggregate_by(std::span<const SequenceScore> scores,
                                                 std::span<const std::vector<std::string>> labels);

/// Full per-sequence scoring: F* with its Pr/Re and the GSR curve.
SequenceScore score_sequence(const std::string& id, const PredictionTrace& trace,
                             std::span<const data::FrameAnnotation> gts, const EvalOptions& opts = {},
                             double gsr_iou = 0.5);

}  // namespace skitb::metrics
