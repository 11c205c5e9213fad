#pragma once

#include <cstddef>
#include <string>

#include "skitb/geometry.hpp"
#include "skitb/metrics.hpp"

namespace skitb::protocol {

/// What a tracker sees of a frame: geometry and timing, never the ground truth.
struct FrameContext {
    std::size_t t = 0;
    geom::FrameDims dims;
    double timestamp = 0.0;  // seconds, t / fps
    std::string image_path;  // optional, for backends that resolve pixels themselves
};

/// Single-sequence tracker. The public entry points check the call order and validate every
/// prediction; implementations override the do_* hooks.
class TrackerBackend {
public:
    virtual ~TrackerBackend() = default;

    void init(const FrameContext& ctx, const geom::BBox& box);
    metrics::Prediction update(const FrameContext& ctx);
    void reinit(const FrameContext& ctx, const geom::BBox& box);
    void set_reference_box(const geom::BBox& box);

    virtual bool supports_reference_box() const { return false; }
    virtual std::string name() const = 0;

    double search_area_factor() const { return search_area_factor_; }
    void set_search_area_factor(double factor);

    bool initialized() const { return initialized_; }

protected:
    virtual void do_init(const FrameContext& ctx, const geom::BBox& box) = 0;
    virtual metrics::Prediction do_update(const FrameContext& ctx) = 0;
    /// Default: a fresh init.
    virtual void do_reinit(const FrameContext& ctx, const geom::BBox& box) { do_init(ctx, box); }
    virtual void do_set_reference_box(const geom::BBox& box);
    virtual void on_search_area_factor(double /*factor*/) {}

private:
    bool initialized_ = false;
    double search_area_factor_ = 5.0;
};

/// Throws Backend if the prediction breaks the confidence range or carries an invalid box.
void validate_prediction(const metrics::Prediction& p, const std::string& who);

}  // namespace skitb::protocol
