#include "skitb/fusion.hpp"

#include "skitb/error.hpp"

namespace skitb::fusion {

FusionBackend::FusionBackend(FusionConfig cfg, std::unique_ptr<protocol::TrackerBackend> tracker,
                             std::unique_ptr<protocol::TrackerBackend> redetector)
    : cfg_(cfg), tracker_(std::move(tracker)), redetector_(std::move(redetector)) {
    if (!tracker_ || !redetector_) fail(ErrorCode::Config, "fusion: both inner backends are required");
    if (!(cfg_.gate > 0.0 && cfg_.gate < 1.0)) fail(ErrorCode::Config, "fusion: gate must be in (0,1)");
    if (!(cfg_.tracker_factor > 0.0 && cfg_.redetector_factor > 0.0)) {
        fail(ErrorCode::Config, "fusion: search area factors must be > 0");
    }
}

std::string FusionBackend::name() const { return "fusion(" + tracker_->name() + "," + redetector_->name() + ")"; }

void FusionBackend::do_init(const protocol::FrameContext& ctx, const geom::BBox& box) {
    if (!redetector_->supports_reference_box()) {
        fail(ErrorCode::Config, "fusion: re-detector '" + redetector_->name() + "' cannot take a reference box");
    }
    if (tracker_->initialized() || redetector_->initialized()) {
        fail(ErrorCode::Config, "fusion: inner backends must be fresh");
    }
    tracker_->set_search_area_factor(cfg_.tracker_factor);
    redetector_->set_search_area_factor(cfg_.redetector_factor);
    const auto b0 = geom::clip_to_frame(box, ctx.dims);
    tracker_->init(ctx, b0);
    redetector_->init(ctx, b0);
    log_.clear();
    last_.reset();
}

metrics::Prediction FusionBackend::do_update(const protocol::FrameContext& ctx) {
    CallRecord rec;
    rec.t = ctx.t;
    rec.tracker_called = true;
    const auto primary = tracker_->update(ctx);

    metrics::Prediction out;
    if (primary.box && primary.confidence > cfg_.gate) {
        out = primary;
        const bool narrow = ctx.dims.width < ctx.dims.height;
        if (!(narrow && cfg_.skip_reset_when_narrow)) {
            const auto ref = geom::relocalization_reference(*primary.box, ctx.dims, cfg_.redetector_factor);
            redetector_->set_reference_box(ref);
            rec.reference_box = ref;
        }
    } else {
        rec.redetector_called = true;
        out = redetector_->update(ctx);
        if (out.box && out.confidence > cfg_.gate) {
            tracker_->reinit(ctx, *out.box);
            rec.reinit = true;
        }
    }
    rec.confidence = out.confidence;
    log_.push_back(rec);
    last_ = out;
    return out;
}

}  // namespace skitb::fusion
