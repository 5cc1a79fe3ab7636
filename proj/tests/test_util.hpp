#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sketchinpaint/autograd.hpp"
#include "sketchinpaint/random.hpp"

namespace test_util {

using sketchinpaint::Grid;
using sketchinpaint::Rng;
namespace ag = sketchinpaint::ag;

inline Grid random_grid(const Grid::Shape& shape, Rng& rng, double scale = 1.0) {
    Grid g = sketchinpaint::normal_grid(shape, rng);
    for (double& v : g.values()) {
        v *= scale;
    }
    return g;
}

// Scalar probe L = sum(w * f()) with fixed random weights, so every output
// element contributes to the gradient.
class Probe {
public:
    Probe(std::function<ag::Var()> f, Rng& rng) : f_(std::move(f)) {
        ag::NoGradGuard guard;
        weights_ = random_grid(f_().shape(), rng);
    }

    double value() const {
        ag::NoGradGuard guard;
        const Grid out = f_().value();
        double s = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            s += weights_[i] * out[i];
        }
        return s;
    }

    // Analytic dL/d(leaf) through the recorded graph.
    Grid analytic(ag::Var& leaf) const {
        leaf.zero_grad();
        ag::backward(f_(), weights_);
        Grid g = leaf.grad().empty() ? Grid::zeros_like(leaf.value()) : leaf.grad();
        leaf.zero_grad();
        return g;
    }

    // Central difference of L in leaf element i.
    double numeric(ag::Var& leaf, std::size_t i, double h = 1e-4) const {
        double& v = leaf.mutable_value()[i];
        const double keep = v;
        v = keep + h;
        const double up = value();
        v = keep - h;
        const double down = value();
        v = keep;
        return (up - down) / (2 * h);
    }

private:
    std::function<ag::Var()> f_;
    Grid weights_;
};

// |a - n| / max(|a|, |n|, floor)
inline double rel_error(double a, double n, double floor = 1e-6) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

// Largest relative error over `count` random coordinates of leaf (all when count <= 0).
inline double check_grad(const Probe& p, ag::Var& leaf, Rng& rng, int count = 20, double h = 1e-4) {
    const Grid a = p.analytic(leaf);
    double worst = 0.0;
    const std::size_t n = leaf.value().size();
    const std::size_t m = count <= 0 ? n : std::min<std::size_t>(n, static_cast<std::size_t>(count));
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = count <= 0 ? k : static_cast<std::size_t>(sketchinpaint::uniform_int(rng, 0, static_cast<int>(n) - 1));
        worst = std::max(worst, rel_error(a[i], p.numeric(leaf, i, h)));
    }
    return worst;
}

}  // namespace test_util
