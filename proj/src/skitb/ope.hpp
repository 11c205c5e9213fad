#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "skitb/backend.hpp"
#include "skitb/datamodel.hpp"
#include "skitb/metrics.hpp"

namespace skitb::protocol {

struct Detection {
    geom::BBox box;
    double score = 0.0;
    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Detections per frame, aligned to a video.
using DetectionStream = std::vector<std::vector<Detection>>;

/// CSV `t,x,y,w,h,score`, several rows per frame allowed. Rows with t >= frame_count are an error.
DetectionStream parse_detections(std::string_view doc, std::size_t frame_count);
std::string serialize_detections(const DetectionStream& stream);
DetectionStream load_detections(const std::string& path, std::size_t frame_count);

struct GroundTruthInit {};
struct DetectorInit {
    std::shared_ptr<const DetectionStream> stream;
    double threshold = 0.5;
};
using InitPolicy = std::variant<GroundTruthInit, DetectorInit>;

/// First frame holding a detection with score >= threshold. Among qualifying detections of that
/// frame: highest score, then larger area, then smaller (x, y, w, h).
std::optional<std::pair<std::size_t, Detection>> select_init_detection(const DetectionStream& stream,
                                                                       double threshold);

struct OpeOptions {
    /// Image path handed to backends; "{id}" and "{t}" are substituted. Empty: none.
    std::string image_pattern;
};

struct OpeRun {
    metrics::PredictionTrace trace;
    std::vector<double> costs;  // seconds per frame spent in update(); 0 for init and pre-init frames
    double init_cost = 0.0;
};

FrameContext make_context(const data::MCVideo& video, std::size_t t, const OpeOptions& opts = {});

/// One-pass evaluation: initialize once, update on every later frame, never reset. Throws NoInit
/// when the detector policy finds no qualifying detection.
OpeRun run_ope(TrackerBackend& backend, const data::MCVideo& video, const InitPolicy& policy,
               const OpeOptions& opts = {});

/// Trace CSV: `t,x,y,w,h,conf`, `t,,,,,conf` for an absent box, a trailing `,init` on the init row.
metrics::PredictionTrace parse_trace(std::string_view doc);
std::string serialize_trace(const metrics::PredictionTrace& trace);
metrics::PredictionTrace load_trace(const std::string& path);

/// Replays stored predictions verbatim.
class TraceBackend final : public TrackerBackend {
public:
    explicit TraceBackend(metrics::PredictionTrace trace, std::string label = "trace");
    std::string name() const override { return label_; }
    bool supports_reference_box() const override { return true; }

protected:
    void do_init(const FrameContext& ctx, const geom::BBox& box) override;
    metrics::Prediction do_update(const FrameContext& ctx) override;
    void do_reinit(const FrameContext&, const geom::BBox&) override {}
    void do_set_reference_box(const geom::BBox&) override {}

private:
    metrics::PredictionTrace trace_;
    std::string label_;
};

std::unique_ptr<TrackerBackend> trace_backend(const std::string& path);

}  // namespace skitb::protocol
