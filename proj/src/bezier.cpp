#include "sketchinpaint/bezier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sketchinpaint/errors.hpp"
#include "sketchinpaint/masks.hpp"

namespace sketchinpaint {

namespace {

// Maps scan-frame (along, across) to image (y, x).
struct Frame {
    ScanDirection dir;
    int h, w;
    int along_extent() const { return vertical() ? h : w; }
    int across_extent() const { return vertical() ? w : h; }
    bool vertical() const { return dir == ScanDirection::up_to_down || dir == ScanDirection::down_to_up; }
    void to_image(int along, int across, int& y, int& x) const {
        switch (dir) {
            case ScanDirection::left_to_right: y = across; x = along; break;
            case ScanDirection::right_to_left: y = across; x = w - 1 - along; break;
            case ScanDirection::up_to_down: y = along; x = across; break;
            case ScanDirection::down_to_up: y = h - 1 - along; x = across; break;
        }
    }
};

// Leading front of the curve per scan-frame row: the smallest `along` value the
// curve reaches on that row.
std::vector<double> curve_front(const CubicBezier& curve, int across_extent) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> front(static_cast<std::size_t>(across_extent), inf);
    const int samples = 16 * (across_extent + 1) + 64;
    for (int k = 0; k <= samples; ++k) {
        const auto pt = curve.at(static_cast<double>(k) / samples);
        const int row = static_cast<int>(std::lround(pt.across));
        if (row >= 0 && row < across_extent) {
            auto& f = front[static_cast<std::size_t>(row)];
            f = std::min(f, pt.along);
        }
    }
    // Rows the curve never reaches (it left the canvas) inherit the nearest sampled row.
    for (int pass = 0; pass < 2; ++pass) {
        double last = inf;
        for (int i = 0; i < across_extent; ++i) {
            auto idx = static_cast<std::size_t>(pass == 0 ? i : across_extent - 1 - i);
            if (std::isfinite(front[idx])) {
                last = front[idx];
            } else if (std::isfinite(last)) {
                front[idx] = last;
            }
        }
    }
    for (double& f : front) {
        if (!std::isfinite(f)) {
            f = 0.0;
        }
    }
    return front;
}

}  // namespace

const char* direction_name(ScanDirection dir) {
    switch (dir) {
        case ScanDirection::right_to_left: return "R2L";
        case ScanDirection::left_to_right: return "L2R";
        case ScanDirection::down_to_up: return "D2U";
        case ScanDirection::up_to_down: return "U2D";
    }
    return "?";
}

ScanDirection parse_direction(const std::string& name) {
    for (auto d : {ScanDirection::right_to_left, ScanDirection::left_to_right, ScanDirection::down_to_up,
                   ScanDirection::up_to_down}) {
        if (name == direction_name(d)) {
            return d;
        }
    }
    throw ParameterError("direction", "unknown scan direction '" + name + "'");
}

ScanDirection draw_direction(Rng& rng) {
    return static_cast<ScanDirection>(uniform_int(rng, 0, 3));
}

CubicBezier::Point CubicBezier::at(double t) const {
    const double u = 1.0 - t;
    const double b0 = u * u * u, b1 = 3 * u * u * t, b2 = 3 * u * t * t, b3 = t * t * t;
    return {b0 * p[0].along + b1 * p[1].along + b2 * p[2].along + b3 * p[3].along,
            b0 * p[0].across + b1 * p[1].across + b2 * p[2].across + b3 * p[3].across};
}

CubicBezier random_scan_curve(int along_extent, int across_extent, Rng& rng) {
    auto u = [&](int extent) { return uniform01(rng) * (extent - 1); };
    CubicBezier c;
    c.p[0] = {u(along_extent), 0.0};
    c.p[1] = {u(along_extent), u(across_extent)};
    c.p[2] = {u(along_extent), u(across_extent)};
    c.p[3] = {u(along_extent), static_cast<double>(across_extent - 1)};
    return c;
}

PartialMaskResult bezier_partial_mask(const Grid& mask, ScanDirection dir, double coverage_target, Rng& rng,
                                      double coverage_ceiling) {
    const Frame frame{dir, mask.h(), mask.w()};
    const CubicBezier curve = random_scan_curve(frame.along_extent(), frame.across_extent(), rng);
    return bezier_partial_mask(mask, dir, coverage_target, curve, coverage_ceiling);
}

PartialMaskResult bezier_partial_mask(const Grid& mask, ScanDirection dir, double coverage_target,
                                      const CubicBezier& curve, double coverage_ceiling) {
    if (mask.n() != 1 || mask.c() != 1 || !is_binary(mask)) {
        throw ValueError("bezier_partial_mask: expected a binary (1, 1, H, W) mask");
    }
    if (!(coverage_target > 0.0 && coverage_target <= 1.0)) {
        throw ParameterError("coverage_target", "must lie in (0, 1]");
    }
    const std::size_t area = mask_area(mask);
    if (area == 0) {
        throw ValueError("bezier_partial_mask: empty mask");
    }
    const Frame frame{dir, mask.h(), mask.w()};
    const int along_n = frame.along_extent(), across_n = frame.across_extent();
    const std::vector<double> front = curve_front(curve, across_n);

    // A pixel (along, across) is swept once offset + front[across] >= along, so it
    // joins at step ceil(along - front[across]) relative to the offset that puts
    // the front's rightmost point just outside the start edge.
    const double front_max = *std::max_element(front.begin(), front.end());
    const int base = -static_cast<int>(std::ceil(front_max)) - 1;
    std::vector<std::size_t> joined;
    auto join_step = [&](int along, int across) {
        return static_cast<int>(std::ceil(along - front[static_cast<std::size_t>(across)])) - base;
    };
    int last_step = 0;
    for (int a = 0; a < along_n; ++a) {
        for (int c = 0; c < across_n; ++c) {
            int y = 0, x = 0;
            frame.to_image(a, c, y, x);
            if (mask.at(0, 0, y, x) == 0.0) {
                continue;
            }
            const int s = join_step(a, c);
            if (static_cast<std::size_t>(s) >= joined.size()) {
                joined.resize(static_cast<std::size_t>(s) + 1, 0);
            }
            ++joined[static_cast<std::size_t>(s)];
            last_step = std::max(last_step, s);
        }
    }

    PartialMaskResult out;
    out.pm = Grid(mask.shape(), 1.0);
    const double inv_area = 1.0 / static_cast<double>(area);
    std::size_t covered = 0;
    int stop = last_step;
    for (int s = 0; s <= last_step; ++s) {
        const std::size_t before = covered;
        covered += joined[static_cast<std::size_t>(s)];
        if (covered * inv_area >= coverage_target) {
            stop = s;
            out.step_increment = static_cast<double>(covered - before) * inv_area;
            break;
        }
    }
    out.steps = stop;
    out.coverage = covered * inv_area;

    if (out.coverage > coverage_ceiling) {
        // Straight-line scan in pixel order, stopping at the first pixel reaching the target.
        out.fallback = true;
        const auto need = static_cast<std::size_t>(std::ceil(coverage_target * static_cast<double>(area) - 1e-9));
        std::size_t taken = 0;
        for (int a = 0; a < along_n && taken < need; ++a) {
            for (int c = 0; c < across_n && taken < need; ++c) {
                int y = 0, x = 0;
                frame.to_image(a, c, y, x);
                if (mask.at(0, 0, y, x) != 0.0) {
                    out.pm.at(0, 0, y, x) = 0.0;
                    ++taken;
                }
            }
        }
        out.coverage = taken * inv_area;
        out.step_increment = inv_area;
        out.steps = static_cast<int>(taken);
        return out;
    }

    for (int a = 0; a < along_n; ++a) {
        for (int c = 0; c < across_n; ++c) {
            int y = 0, x = 0;
            frame.to_image(a, c, y, x);
            if (mask.at(0, 0, y, x) != 0.0 && join_step(a, c) <= stop) {
                out.pm.at(0, 0, y, x) = 0.0;
            }
        }
    }
    return out;
}

}  // namespace sketchinpaint
