#include "skitb/geometry.hpp"

#include <algorithm>
#include <sstream>

#include "skitb/error.hpp"

namespace skitb::geom {

double iou(const BBox& a, const BBox& b) {
    const double iw = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
    const double ih = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

Point center(const BBox& b) { return {b.x + b.w / 2.0, b.y + b.h / 2.0}; }

BBox from_center(Point c, double w, double h) { return {c.x - w / 2.0, c.y - h / 2.0, w, h}; }

BBox translate(const BBox& b, double dx, double dy) { return {b.x + dx, b.y + dy, b.w, b.h}; }

BBox clip_to_frame(const BBox& b, const FrameDims& dims) {
    const double x0 = std::clamp(b.x, 0.0, dims.width);
    const double y0 = std::clamp(b.y, 0.0, dims.height);
    const double x1 = std::clamp(b.right(), 0.0, dims.width);
    const double y1 = std::clamp(b.bottom(), 0.0, dims.height);
    return {x0, y0, std::max(0.0, x1 - x0), std::max(0.0, y1 - y0)};
}

BBox relocalization_reference(const BBox& prev_confident, const FrameDims& dims, double factor) {
    if (!dims.valid()) fail(ErrorCode::InvalidArgument, "relocalization_reference: invalid frame dims");
    if (!(factor > 0.0)) fail(ErrorCode::InvalidArgument, "relocalization_reference: factor must be > 0");
    const double half = dims.height / 2.0;
    const double lo = half;
    const double hi = dims.width - half;
    if (hi < lo) {
        std::ostringstream msg;
        msg << "relocalization_reference: empty clip interval, frame width " << dims.width
            << " is smaller than height " << dims.height;
        fail(ErrorCode::InvalidArgument, msg.str());
    }
    const double side = dims.height / factor;
    const double cx = std::clamp(center(prev_confident).x, lo, hi);
    return from_center({cx, half}, side, side);
}

}  // namespace skitb::geom
