#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>

#include "sketchinpaint/datagen.hpp"
#include "sketchinpaint/errors.hpp"

namespace sketchinpaint {

namespace {

struct Color {
    const char* name;
    std::array<double, 3> rgb;
};

const std::array<Color, 8> kPalette{{
    {"red", {0.85, 0.15, 0.15}},
    {"green", {0.20, 0.70, 0.25}},
    {"blue", {0.20, 0.30, 0.85}},
    {"yellow", {0.90, 0.85, 0.20}},
    {"orange", {0.95, 0.55, 0.10}},
    {"purple", {0.55, 0.25, 0.70}},
    {"cyan", {0.20, 0.80, 0.85}},
    {"white", {0.95, 0.95, 0.95}},
}};

struct Ellipse {
    double cx, cy, a, b, theta;
    bool contains(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        const double u = std::cos(theta) * dx + std::sin(theta) * dy;
        const double v = -std::sin(theta) * dx + std::cos(theta) * dy;
        return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
    }
};

bool in_polygon(const std::vector<std::array<double, 2>>& poly, double x, double y) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto& pi = poly[i];
        const auto& pj = poly[j];
        if ((pi[1] > y) != (pj[1] > y) && x < (pj[0] - pi[0]) * (y - pi[1]) / (pj[1] - pi[1]) + pi[0]) {
            inside = !inside;
        }
    }
    return inside;
}

std::string tilt_word(double theta) {
    const double deg = theta * 180.0 / M_PI;
    if (std::abs(deg) < 15.0) {
        return "upright";
    }
    return deg > 0 ? "tilted right" : "tilted left";
}

}  // namespace

const std::vector<std::string>& synth_color_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& c : kPalette) {
            out.emplace_back(c.name);
        }
        return out;
    }();
    return names;
}

std::vector<SynthSample> synth_corpus(int n, int canvas, Rng& rng) {
    if (n < 1) {
        throw ParameterError("n", "synth_corpus needs n >= 1");
    }
    if (canvas < 16) {
        throw ParameterError("canvas", "must be >= 16");
    }
    std::vector<SynthSample> out;
    out.reserve(static_cast<std::size_t>(n));
    const double c = canvas;
    auto u = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };
    for (int k = 0; k < n; ++k) {
        SynthSample s;
        char id[32];
        std::snprintf(id, sizeof(id), "synth_%05d", k);
        s.sample.id = id;
        const Color& color = kPalette[static_cast<std::size_t>(uniform_int(rng, 0, kPalette.size() - 1))];
        s.color = color.name;

        // Background: muted base colour with a soft stripe texture and faint noise.
        std::array<double, 3> bg{u(0.3, 0.6), u(0.3, 0.6), u(0.3, 0.6)};
        const double fx = u(0.05, 0.3), fy = u(0.05, 0.3), phase = u(0.0, 2 * M_PI);

        std::function<bool(double, double)> inside;
        std::function<double(double, double)> detail = [](double, double) { return 0.0; };
        const double cx = u(0.38, 0.62) * c, cy = u(0.38, 0.62) * c;
        switch (uniform_int(rng, 0, 2)) {
            case 0: {
                s.shape = "ellipse";
                const Ellipse e{cx, cy, u(0.16, 0.3) * c, u(0.1, 0.2) * c, u(-0.6, 0.6)};
                s.pose = tilt_word(e.theta);
                inside = [e](double x, double y) { return e.contains(x, y); };
                break;
            }
            case 1: {
                s.shape = "polygon";
                const int sides = uniform_int(rng, 3, 7);
                const double radius = u(0.18, 0.3) * c;
                const double rot = u(-0.6, 0.6);
                std::vector<std::array<double, 2>> poly;
                for (int i = 0; i < sides; ++i) {
                    const double a = rot + 2 * M_PI * (i + u(-0.2, 0.2)) / sides;
                    const double r = radius * u(0.75, 1.0);
                    poly.push_back({cx + r * std::sin(a), cy - r * std::cos(a)});
                }
                s.pose = tilt_word(rot);
                inside = [poly](double x, double y) { return in_polygon(poly, x, y); };
                break;
            }
            default: {
                s.shape = "bird";
                const bool right = uniform01(rng) < 0.5;
                const double dir = right ? 1.0 : -1.0;
                s.pose = right ? "facing right" : "facing left";
                const double bl = u(0.18, 0.24) * c, bh = u(0.1, 0.14) * c;
                const Ellipse body{cx, cy, bl, bh, 0.0};
                const Ellipse head{cx + dir * bl * 0.95, cy - bh * 0.9, bh * 0.7, bh * 0.7, 0.0};
                const std::vector<std::array<double, 2>> tail{{cx - dir * bl * 0.7, cy},
                                                              {cx - dir * bl * 1.55, cy - bh * 0.9},
                                                              {cx - dir * bl * 1.45, cy + bh * 0.5}};
                const double bx = head.cx + dir * head.a * 0.8;
                const std::vector<std::array<double, 2>> beak{
                    {bx, head.cy - head.a * 0.3}, {bx, head.cy + head.a * 0.3}, {bx + dir * head.a * 0.8, head.cy}};
                const Ellipse eye{head.cx + dir * head.a * 0.3, head.cy - head.a * 0.2, head.a * 0.18, head.a * 0.18,
                                  0.0};
                const Ellipse wing{cx - dir * bl * 0.1, cy - bh * 0.05, bl * 0.55, bh * 0.45, dir * 0.3};
                inside = [=](double x, double y) {
                    return body.contains(x, y) || head.contains(x, y) || in_polygon(tail, x, y) ||
                           in_polygon(beak, x, y);
                };
                detail = [=](double x, double y) {
                    if (eye.contains(x, y)) return -0.7;
                    if (wing.contains(x, y)) return -0.25;
                    return 0.0;
                };
                break;
            }
        }
        s.sample.caption = "a " + s.color + " " + s.shape + " " + s.pose;

        Grid image(1, 3, canvas, canvas);
        Grid mask(1, 1, canvas, canvas);
        for (int y = 0; y < canvas; ++y) {
            for (int x = 0; x < canvas; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                const bool obj = inside(px, py);
                mask.at(0, 0, y, x) = obj ? 1.0 : 0.0;
                const double tex = 0.08 * std::sin(fx * x + fy * y + phase) + 0.02 * standard_normal(rng);
                const double shade = 0.85 + 0.15 * (1.0 - (py - cy) / c);
                for (int ch = 0; ch < 3; ++ch) {
                    const auto chi = static_cast<std::size_t>(ch);
                    const double v = obj ? color.rgb[chi] * shade + detail(px, py) * color.rgb[chi]
                                         : bg[chi] + tex;
                    image.at(0, ch, y, x) = std::clamp(v, 0.0, 1.0);
                }
            }
        }
        s.sample.image = std::move(image);
        s.sample.instance_mask = std::move(mask);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace sketchinpaint
