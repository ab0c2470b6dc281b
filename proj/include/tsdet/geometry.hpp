#ifndef TSDET_GEOMETRY_HPP
#define TSDET_GEOMETRY_HPP

#include <algorithm>

namespace tsd {

// Axis-aligned box in original image coordinates, right > left, bottom > top.
struct BoundingBox {
    double left = 0, top = 0, right = 0, bottom = 0;

    double width() const { return right - left; }
    double height() const { return bottom - top; }
    double area() const { return width() * height(); }
};

// PASCAL overlap ratio: area(intersection) / area(union), in [0,1].
inline double pascal_overlap(const BoundingBox& a, const BoundingBox& b) {
    const double iw = std::min(a.right, b.right) - std::max(a.left, b.left);
    const double ih = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
    if (iw <= 0 || ih <= 0) return 0.0;
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

}  // namespace tsd

#endif
