#include "sketchinpaint/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "sketchinpaint/errors.hpp"
#include "sketchinpaint/masks.hpp"

namespace sketchinpaint {

Grid to_grayscale(const Grid& image) {
    if (image.n() != 1 || (image.c() != 1 && image.c() != 3)) {
        throw ShapeError("to_grayscale: expected (1, 1 or 3, H, W), got " + image.shape_str());
    }
    if (image.c() == 1) {
        return image;
    }
    Grid out(1, 1, image.h(), image.w());
    const std::size_t plane = static_cast<std::size_t>(image.h()) * image.w();
    const double* r = image.plane(0, 0);
    const double* g = image.plane(0, 1);
    const double* b = image.plane(0, 2);
    for (std::size_t i = 0; i < plane; ++i) {
        out[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    }
    return out;
}

SobelResponse sobel(const Grid& gray) {
    if (gray.n() != 1 || gray.c() != 1) {
        throw ShapeError("sobel: expected (1, 1, H, W), got " + gray.shape_str());
    }
    const int h = gray.h(), w = gray.w();
    auto px = [&](int y, int x) { return gray.at(0, 0, std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)); };
    SobelResponse r{Grid(gray.shape()), Grid(gray.shape()), Grid(gray.shape())};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx = (px(y - 1, x + 1) + 2 * px(y, x + 1) + px(y + 1, x + 1)) -
                              (px(y - 1, x - 1) + 2 * px(y, x - 1) + px(y + 1, x - 1));
            const double gy = (px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1)) -
                              (px(y - 1, x - 1) + 2 * px(y - 1, x) + px(y - 1, x + 1));
            r.gx.at(0, 0, y, x) = gx;
            r.gy.at(0, 0, y, x) = gy;
            r.magnitude.at(0, 0, y, x) = std::hypot(gx, gy);
        }
    }
    return r;
}

Grid canny_sketch(const Grid& image, double low, double high) {
    CannyOptions o;
    o.low = low;
    o.high = high;
    return canny_sketch(image, o);
}

Grid canny_sketch(const Grid& image, const CannyOptions& options) {
    if (!(options.low >= 0.0 && options.low < options.high)) {
        throw ParameterError("low", "Canny thresholds need 0 <= low < high");
    }
    const Grid gray = gaussian_blur(to_grayscale(image), options.blur_kernel, options.blur_sigma);
    const SobelResponse g = sobel(gray);
    const int h = gray.h(), w = gray.w();
    const double peak = *std::max_element(g.magnitude.values().begin(), g.magnitude.values().end());
    Grid edges(gray.shape());
    if (!(peak > 1e-12)) {
        return edges;
    }
    auto mag = [&](int y, int x) {
        return (y < 0 || y >= h || x < 0 || x >= w) ? 0.0 : g.magnitude.at(0, 0, y, x);
    };

    // 0 = none, 1 = weak, 2 = strong
    std::vector<unsigned char> cls(static_cast<std::size_t>(h) * w, 0);
    const double lo = options.low * peak, hi = options.high * peak;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double m = g.magnitude.at(0, 0, y, x);
            if (m < lo || m == 0.0) {
                continue;
            }
            double angle = std::atan2(g.gy.at(0, 0, y, x), g.gx.at(0, 0, y, x)) * 180.0 / M_PI;
            if (angle < 0) {
                angle += 180.0;
            }
            int dy = 0, dx = 0;
            if (angle < 22.5 || angle >= 157.5) {
                dx = 1;
            } else if (angle < 67.5) {
                dy = 1, dx = 1;
            } else if (angle < 112.5) {
                dy = 1;
            } else {
                dy = 1, dx = -1;
            }
            // Strict against the predecessor, non-strict against the successor, so a
            // two-pixel plateau keeps exactly one pixel.
            if (m > mag(y - dy, x - dx) && m >= mag(y + dy, x + dx)) {
                cls[static_cast<std::size_t>(y) * w + x] = m >= hi ? 2 : 1;
            }
        }
    }
    std::vector<int> stack;
    for (int i = 0; i < h * w; ++i) {
        if (cls[static_cast<std::size_t>(i)] == 2) {
            stack.push_back(i);
            edges[static_cast<std::size_t>(i)] = 1.0;
        }
    }
    while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        const int y = i / w, x = i % w;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const int yy = y + dy, xx = x + dx;
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) {
                    continue;
                }
                const auto j = static_cast<std::size_t>(yy) * w + xx;
                if (cls[j] == 1 && edges[j] == 0.0) {
                    edges[j] = 1.0;
                    stack.push_back(static_cast<int>(j));
                }
            }
        }
    }
    return edges;
}

Grid partial_sketch(const Grid& pm, const Grid& m0, const Grid& sketch) {
    require_same_shape(pm, m0, "partial_sketch");
    require_same_shape(pm, sketch, "partial_sketch");
    Grid out = Grid::zeros_like(sketch);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = (1.0 - pm[i]) * m0[i] * sketch[i];
    }
    return out;
}

SketchRegistry::SketchRegistry() {
    generators_["canny"] = [](const Grid& image) { return canny_sketch(image, CannyOptions{}); };
}

SketchRegistry& SketchRegistry::instance() {
    static SketchRegistry registry;
    return registry;
}

void SketchRegistry::add(const std::string& name, Generator generator) {
    generators_[name] = std::move(generator);
}

bool SketchRegistry::contains(const std::string& name) const {
    return generators_.count(name) != 0;
}

Grid SketchRegistry::generate(const std::string& name, const Grid& image) const {
    const auto it = generators_.find(name);
    if (it == generators_.end()) {
        throw ParameterError("sketch_type", "no sketch generator named '" + name + "'");
    }
    return it->second(image);
}

std::vector<std::string> SketchRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : generators_) {
        out.push_back(name);
    }
    return out;
}

}  // namespace sketchinpaint
