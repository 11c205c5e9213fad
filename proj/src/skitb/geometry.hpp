#pragma once

#include <cmath>

namespace skitb::geom {

/// Axis-aligned box, (x, y) is the top-left corner. Pixel units, real-valued.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
    double right() const { return x + w; }
    double bottom() const { return y + h; }
    bool valid() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h) && w >= 0.0 &&
               h >= 0.0;
    }
    friend bool operator==(const BBox&, const BBox&) = default;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

struct FrameDims {
    double width = 0.0;
    double height = 0.0;
    bool valid() const { return width > 0.0 && height > 0.0; }
    friend bool operator==(const FrameDims&, const FrameDims&) = default;
};

/// Intersection over union. Two degenerate boxes (zero union) score 0.
double iou(const BBox& a, const BBox& b);

Point center(const BBox& b);
BBox from_center(Point c, double w, double h);

BBox translate(const BBox& b, double dx, double dy);

/// Box intersected with [0,W]x[0,H]; disjoint boxes collapse to a zero-area box on the border.
BBox clip_to_frame(const BBox& b, const FrameDims& dims);

/// Reference box for a wide-search re-detector: a square of side H/factor whose induced search
/// region (side H) is vertically centred and kept horizontally inside the frame, following the
/// last confident box's centre-x. Throws InvalidArgument when the frame is narrower than it is
/// tall (the horizontal clip interval is empty).
BBox relocalization_reference(const BBox& prev_confident, const FrameDims& dims, double factor = 5.0);

}  // namespace skitb::geom
