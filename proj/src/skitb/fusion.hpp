#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "skitb/backend.hpp"

namespace skitb::fusion {

struct FusionConfig {
    double gate = 0.5;                 // fallback when tracker confidence <= gate
    double tracker_factor = 3.0;       // search area factor of the precise tracker
    double redetector_factor = 5.0;    // search area factor of the wide re-detector
    /// When the frame is narrower than tall no reference box exists; keep the previous one.
    bool skip_reset_when_narrow = true;
};

/// Which instances ran on a frame.
struct CallRecord {
    std::size_t t = 0;
    bool tracker_called = false;
    bool redetector_called = false;
    bool reinit = false;
    std::optional<geom::BBox> reference_box;  // set on confident frames when the reset happened
    double confidence = 0.0;                  // output confidence
};

/// Precise tracker plus wide-search re-detector. Each frame runs the tracker; when its confidence
/// is at or below the gate the re-detector runs and its output is used, re-initializing the
/// tracker if the re-detector is above the gate. On confident frames the re-detector stays dormant
/// and only its reference box follows the tracker. Usable as a backend itself.
class FusionBackend final : public protocol::TrackerBackend {
public:
    FusionBackend(FusionConfig cfg, std::unique_ptr<protocol::TrackerBackend> tracker,
                  std::unique_ptr<protocol::TrackerBackend> redetector);

    std::string name() const override;

    const std::vector<CallRecord>& call_log() const { return log_; }
    const FusionConfig& config() const { return cfg_; }
    const protocol::TrackerBackend& tracker() const { return *tracker_; }
    const protocol::TrackerBackend& redetector() const { return *redetector_; }
    const std::optional<metrics::Prediction>& last_output() const { return last_; }

protected:
    void do_init(const protocol::FrameContext& ctx, const geom::BBox& box) override;
    metrics::Prediction do_update(const protocol::FrameContext& ctx) override;

private:
    FusionConfig cfg_;
    std::unique_ptr<protocol::TrackerBackend> tracker_;
    std::unique_ptr<protocol::TrackerBackend> redetector_;
    std::vector<CallRecord> log_;
    std::optional<metrics::Prediction> last_;
};

}  // namespace skitb::fusion
