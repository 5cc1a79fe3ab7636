#include "sketchinpaint/masks.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <vector>

#include "sketchinpaint/errors.hpp"

namespace sketchinpaint {

namespace {

void require_mask(const Grid& m, const char* context) {
    if (m.n() != 1 || m.c() != 1) {
        throw ShapeError(std::string(context) + ": expected a (1, 1, H, W) mask, got " + m.shape_str());
    }
    if (!is_binary(m)) {
        throw ValueError(std::string(context) + ": mask is not binary");
    }
}

int reflect101(int i, int n) {
    if (n == 1) {
        return 0;
    }
    while (i < 0 || i >= n) {
        i = i < 0 ? -i : 2 * n - 2 - i;
    }
    return i;
}

}  // namespace

std::size_t mask_area(const Grid& mask) {
    return static_cast<std::size_t>(std::count_if(mask.values().begin(), mask.values().end(),
                                                  [](double v) { return v != 0.0; }));
}

BoundingBox bounding_box(const Grid& mask) {
    BoundingBox b{INT_MAX, INT_MAX, -1, -1};
    for (int y = 0; y < mask.h(); ++y) {
        for (int x = 0; x < mask.w(); ++x) {
            if (mask.at(0, 0, y, x) != 0.0) {
                b.y0 = std::min(b.y0, y);
                b.x0 = std::min(b.x0, x);
                b.y1 = std::max(b.y1, y + 1);
                b.x1 = std::max(b.x1, x + 1);
            }
        }
    }
    if (b.y1 < 0) {
        throw ValueError("bounding_box: empty mask");
    }
    return b;
}

Grid bbox_mask(const Grid& mask) {
    const BoundingBox b = bounding_box(mask);
    Grid out = Grid::zeros_like(mask);
    for (int y = b.y0; y < b.y1; ++y) {
        for (int x = b.x0; x < b.x1; ++x) {
            out.at(0, 0, y, x) = 1.0;
        }
    }
    return out;
}

double mask_iou(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "mask_iou");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool pa = a[i] != 0.0, pb = b[i] != 0.0;
        inter += pa && pb;
        uni += pa || pb;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

bool support_subset(const Grid& a, const Grid& b) {
    require_same_shape(a, b, "support_subset");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != 0.0 && b[i] == 0.0) {
            return false;
        }
    }
    return true;
}

int bbox_radius(const Grid& mask) {
    require_mask(mask, "bbox_radius");
    const BoundingBox b = bounding_box(mask);
    const int h = b.height(), w = b.width();
    // Two-pass chessboard distance transform inside the box.
    const int inf = h + w + 1;
    std::vector<int> dist(static_cast<std::size_t>(h) * w);
    auto at = [&](int y, int x) -> int& { return dist[static_cast<std::size_t>(y) * w + x]; };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            at(y, x) = mask.at(0, 0, b.y0 + y, b.x0 + x) != 0.0 ? 0 : inf;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int v = at(y, x);
            if (x > 0) v = std::min(v, at(y, x - 1) + 1);
            if (y > 0) {
                v = std::min(v, at(y - 1, x) + 1);
                if (x > 0) v = std::min(v, at(y - 1, x - 1) + 1);
                if (x + 1 < w) v = std::min(v, at(y - 1, x + 1) + 1);
            }
            at(y, x) = v;
        }
    }
    int r = 0;
    for (int y = h - 1; y >= 0; --y) {
        for (int x = w - 1; x >= 0; --x) {
            int v = at(y, x);
            if (x + 1 < w) v = std::min(v, at(y, x + 1) + 1);
            if (y + 1 < h) {
                v = std::min(v, at(y + 1, x) + 1);
                if (x + 1 < w) v = std::min(v, at(y + 1, x + 1) + 1);
                if (x > 0) v = std::min(v, at(y + 1, x - 1) + 1);
            }
            at(y, x) = v;
            r = std::max(r, v);
        }
    }
    return r;
}

int dilation_kernel(int d, int levels, int r_box) {
    if (levels < 1) {
        throw ParameterError("D", "must be >= 1");
    }
    if (d < 0 || d > levels) {
        throw ParameterError("d", std::to_string(d) + " outside [0, " + std::to_string(levels) + "]");
    }
    const int step = (r_box + levels - 1) / levels;
    return 1 + 2 * d * step;
}

Grid dilate_square(const Grid& mask, int k) {
    if (k < 1 || k % 2 == 0) {
        throw ParameterError("k", "structuring element side must be odd and positive");
    }
    const int r = k / 2;
    const int h = mask.h(), w = mask.w();
    if (r == 0) {
        return mask;
    }
    Grid rows = Grid::zeros_like(mask);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask.at(0, 0, y, x) != 0.0) {
                for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
                    rows.at(0, 0, y, xx) = 1.0;
                }
            }
        }
    }
    Grid out = Grid::zeros_like(mask);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (rows.at(0, 0, y, x) != 0.0) {
                for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy) {
                    out.at(0, 0, yy, x) = 1.0;
                }
            }
        }
    }
    return out;
}

Grid dilate_mask(const Grid& m0, int d, int levels) {
    require_mask(m0, "dilate_mask");
    if (mask_area(m0) == 0) {
        throw ValueError("dilate_mask: empty instance mask");
    }
    const int k = dilation_kernel(d, levels, bbox_radius(m0));
    if (d == 0) {
        return m0;
    }
    Grid out = dilate_square(m0, k);
    const BoundingBox b = bounding_box(m0);
    for (int y = 0; y < out.h(); ++y) {
        for (int x = 0; x < out.w(); ++x) {
            if (!b.contains(y, x)) {
                out.at(0, 0, y, x) = 0.0;
            }
        }
    }
    return out;
}

Grid gaussian_blur(const Grid& g, int k) {
    return gaussian_blur(g, k, 0.3 * ((k - 1) * 0.5 - 1.0) + 0.8);
}

Grid gaussian_blur(const Grid& g, int k, double sigma) {
    if (k < 1 || k % 2 == 0) {
        throw ParameterError("k_s", "blur kernel must be odd and positive");
    }
    if (!(sigma > 0.0)) {
        throw ParameterError("sigma", "must be positive");
    }
    const int r = k / 2;
    std::vector<double> kernel(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        kernel[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        sum += kernel[static_cast<std::size_t>(i + r)];
    }
    for (double& v : kernel) {
        v /= sum;
    }
    const int h = g.h(), w = g.w();
    Grid tmp = Grid::zeros_like(g);
    Grid out = Grid::zeros_like(g);
    for (int n = 0; n < g.n(); ++n) {
        for (int c = 0; c < g.c(); ++c) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    double acc = 0.0;
                    for (int i = -r; i <= r; ++i) {
                        acc += kernel[static_cast<std::size_t>(i + r)] * g.at(n, c, y, reflect101(x + i, w));
                    }
                    tmp.at(n, c, y, x) = acc;
                }
            }
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    double acc = 0.0;
                    for (int i = -r; i <= r; ++i) {
                        acc += kernel[static_cast<std::size_t>(i + r)] * tmp.at(n, c, reflect101(y + i, h), x);
                    }
                    out.at(n, c, y, x) = acc;
                }
            }
        }
    }
    return out;
}

Grid blend_masks(const Grid& m_d, const Grid& m_d1, int s, int levels, int k_s) {
    require_mask(m_d, "blend_masks");
    require_mask(m_d1, "blend_masks");
    require_same_shape(m_d, m_d1, "blend_masks");
    if (levels < 1) {
        throw ParameterError("S", "must be >= 1");
    }
    if (s < 0 || s > levels) {
        throw ParameterError("s", std::to_string(s) + " outside [0, " + std::to_string(levels) + "]");
    }
    if (!support_subset(m_d, m_d1)) {
        throw ValueError("blend_masks: m_d is not contained in m_{d+1}");
    }
    if (s == 0) {
        return m_d;
    }
    if (s == levels) {
        return m_d1;
    }
    const double alpha = static_cast<double>(s) / levels;
    Grid mix = Grid::zeros_like(m_d);
    for (std::size_t i = 0; i < mix.size(); ++i) {
        mix[i] = alpha * m_d1[i] + (1.0 - alpha) * m_d[i];
    }
    const Grid blurred = gaussian_blur(mix, k_s);
    Grid out = Grid::zeros_like(m_d);
    for (std::size_t i = 0; i < out.size(); ++i) {
        // Tolerance absorbs rounding of the normalized kernel on flat 0.5 regions.
        const bool on = blurred[i] >= 0.5 - 1e-9;
        out[i] = (m_d[i] != 0.0 || (on && m_d1[i] != 0.0)) ? 1.0 : 0.0;
    }
    return out;
}

}  // namespace sketchinpaint
