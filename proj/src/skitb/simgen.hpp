#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "skitb/backend.hpp"
#include "skitb/datamodel.hpp"
#include "skitb/ope.hpp"

namespace skitb::sim {

/// Independent generator stream for one component; the same (seed, stream) always yields the same
/// sequence regardless of what other components draw.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream);

    double uniform();                         // [0, 1)
    double uniform(double lo, double hi);     // [lo, hi)
    double normal(double mean, double sigma); // Box-Muller, platform independent
    bool bernoulli(double p);
    std::size_t index(std::size_t n);         // [0, n)

private:
    std::mt19937_64 engine_;
};

// Fixed stream ids.
inline constexpr std::uint64_t kStreamTrajectory = 1;
inline constexpr std::uint64_t kStreamOcclusion = 2;
inline constexpr std::uint64_t kStreamDetections = 3;
inline constexpr std::uint64_t kStreamOracle = 4;
inline constexpr std::uint64_t kStreamMetadata = 5;

struct Keyframe {
    std::size_t t = 0;
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
};

struct OcclusionInterval {
    std::size_t start = 0;
    std::size_t length = 15;
};

struct SimConfig {
    std::string id = "sim0000";
    std::size_t frames = 300;
    double fps = 30.0;
    geom::FrameDims dims{1280.0, 720.0};
    std::vector<std::size_t> cut_points;  // first frame of each new camera, sorted, in (0, frames)
    /// Explicit piecewise-linear path through these keyframes. Empty: random motion per camera.
    std::vector<Keyframe> keyframes;
    std::vector<OcclusionInterval> occlusions;
    std::size_t random_occlusions = 0;
    std::size_t occlusion_length = 15;
    data::VideoMeta meta;  // fps and resolution are overwritten from the fields above
    std::uint64_t seed = 0;
};

/// Throws Config for broken invariants (unsorted cuts, occlusions out of range...).
void validate(const SimConfig& cfg);

/// Ground truth for a multi-camera run: camera cuts jump position and scale, occluded frames keep
/// their interpolated boxes. Boxes are clipped to the frame.
data::MCVideo gen_mc_sequence(const SimConfig& cfg);

struct NoiseConfig {
    double center_sigma = 0.0;  // pixels
    double size_sigma = 0.0;    // relative
    double score_sigma = 0.0;   // true-detection score = 1 - |N(0, score_sigma)|
    double false_positive_rate = 0.0;
    double miss_rate = 0.0;
    bool suppress_occluded = false;
    std::uint64_t seed = 0;
};

/// At most one true detection and one false positive per frame. False positives are uniform in the
/// frame with scores in [0, 0.5).
protocol::DetectionStream gen_detections(const data::MCVideo& gt, const NoiseConfig& noise);

/// Random dataset of `count` videos with varied metadata; deterministic in `seed`.
std::vector<data::MCVideo> simulate_dataset(std::size_t count, std::uint64_t seed, std::size_t frames = 300,
                                            std::size_t cameras = 3);

/// Replays a fixed list of predictions; records how it was driven.
class ScriptedBackend final : public protocol::TrackerBackend {
public:
    explicit ScriptedBackend(std::vector<metrics::Prediction> script, std::string label = "scripted");

    std::string name() const override { return label_; }
    bool supports_reference_box() const override { return true; }

    std::vector<std::size_t> update_frames;
    std::vector<std::size_t> reinit_frames;
    std::vector<geom::BBox> reference_boxes;

protected:
    void do_init(const protocol::FrameContext& ctx, const geom::BBox& box) override;
    metrics::Prediction do_update(const protocol::FrameContext& ctx) override;
    void do_reinit(const protocol::FrameContext& ctx, const geom::BBox& box) override;
    void do_set_reference_box(const geom::BBox& box) override;

private:
    std::vector<metrics::Prediction> script_;
    std::string label_;
};

/// Ground truth plus Gaussian centre jitter, with a per-frame confidence schedule (default 1).
class OracleBackend final : public protocol::TrackerBackend {
public:
    OracleBackend(data::MCVideo gt, double jitter_sigma = 0.0, std::vector<double> confidence = {},
                  std::uint64_t seed = 0);

    std::string name() const override { return "oracle"; }
    bool supports_reference_box() const override { return true; }

    std::vector<std::size_t> update_frames;
    std::vector<std::size_t> reinit_frames;
    std::vector<geom::BBox> reference_boxes;

protected:
    void do_init(const protocol::FrameContext& ctx, const geom::BBox& box) override;
    metrics::Prediction do_update(const protocol::FrameContext& ctx) override;
    void do_reinit(const protocol::FrameContext& ctx, const geom::BBox& box) override;
    void do_set_reference_box(const geom::BBox& box) override;

private:
    data::MCVideo gt_;
    double sigma_;
    std::vector<double> confidence_;
    std::uint64_t seed_;
};

}  // namespace skitb::sim
