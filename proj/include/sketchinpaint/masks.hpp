#pragma once

#include "sketchinpaint/grid.hpp"

namespace sketchinpaint {

// Half-open pixel rectangle [y0, y1) x [x0, x1).
struct BoundingBox {
    int y0 = 0, x0 = 0, y1 = 0, x1 = 0;
    int height() const { return y1 - y0; }
    int width() const { return x1 - x0; }
    bool contains(int y, int x) const { return y >= y0 && y < y1 && x >= x0 && x < x1; }
};

// Masks are (1, 1, H, W) binary grids.
std::size_t mask_area(const Grid& mask);
// Throws ValueError for an empty mask.
BoundingBox bounding_box(const Grid& mask);
Grid bbox_mask(const Grid& mask);
double mask_iou(const Grid& a, const Grid& b);
// True when every 1 of a is also 1 in b.
bool support_subset(const Grid& a, const Grid& b);

// Largest Chebyshev distance from a pixel of the bounding box to the mask.
int bbox_radius(const Grid& mask);
// Square structuring element side 1 + 2 * d * ceil(r_box / D).
int dilation_kernel(int d, int levels, int r_box);
// Dilation by a k x k square (k odd), pixels outside the canvas ignored.
Grid dilate_square(const Grid& mask, int k);
// m_d: dilate_square(m0, dilation_kernel(d, D, bbox_radius(m0))) restricted to the
// bounding box of m0. d = 0 returns m0, d = D returns the bounding box.
Grid dilate_mask(const Grid& m0, int d, int levels);

// Gaussian blur of every plane with a k x k kernel (k odd), sigma from the usual
// 0.3 * ((k - 1) / 2 - 1) + 0.8 rule, reflect-101 border.
Grid gaussian_blur(const Grid& g, int k);
Grid gaussian_blur(const Grid& g, int k, double sigma);

// m_{d,s}: s = 0 gives m_d and s = S gives m_{d+1}, both exactly. In between, the
// blend alpha * m_{d+1} + (1 - alpha) * m_d with alpha = s / S is blurred with a
// k_s kernel and thresholded at 0.5, then kept within [m_d, m_{d+1}].
Grid blend_masks(const Grid& m_d, const Grid& m_d1, int s, int levels, int k_s);
// Default blur schedule, k_s = 2 * s + 1.
inline int blur_kernel(int s) { return 2 * s + 1; }

}  // namespace sketchinpaint
