#include "skitb/backend.hpp"

#include "skitb/error.hpp"

namespace skitb::protocol {

void validate_prediction(const metrics::Prediction& p, const std::string& who) {
    if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) {
        fail(ErrorCode::Backend, who + ": confidence " + std::to_string(p.confidence) + " outside [0,1]");
    }
    if (p.box && !p.box->valid()) fail(ErrorCode::Backend, who + ": invalid box in prediction");
}

void TrackerBackend::init(const FrameContext& ctx, const geom::BBox& box) {
    if (!box.valid()) fail(ErrorCode::InvalidArgument, name() + ": init box is invalid");
    do_init(ctx, box);
    initialized_ = true;
}

metrics::Prediction TrackerBackend::update(const FrameContext& ctx) {
    if (!initialized_) fail(ErrorCode::Backend, name() + ": update called before init");
    auto p = do_update(ctx);
    validate_prediction(p, name());
    return p;
}

void TrackerBackend::reinit(const FrameContext& ctx, const geom::BBox& box) {
    if (!initialized_) fail(ErrorCode::Backend, name() + ": reinit called before init");
    if (!box.valid()) fail(ErrorCode::InvalidArgument, name() + ": reinit box is invalid");
    do_reinit(ctx, box);
}

void TrackerBackend::set_reference_box(const geom::BBox& box) {
    if (!supports_reference_box()) fail(ErrorCode::Config, name() + ": backend has no reference-box capability");
    if (!initialized_) fail(ErrorCode::Backend, name() + ": set_reference_box called before init");
    do_set_reference_box(box);
}

void TrackerBackend::do_set_reference_box(const geom::BBox&) {
    fail(ErrorCode::Config, name() + ": backend has no reference-box capability");
}

void TrackerBackend::set_search_area_factor(double factor) {
    if (!(factor > 0.0)) fail(ErrorCode::InvalidArgument, "search area factor must be > 0");
    search_area_factor_ = factor;
    on_search_area_factor(factor);
}

}  // namespace skitb::protocol
