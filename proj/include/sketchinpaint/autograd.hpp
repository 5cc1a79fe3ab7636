#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "sketchinpaint/grid.hpp"

// Minimal reverse-mode automatic differentiation over Grid values.
//
// Every op returns a Var. When at least one input requires a gradient (and
// recording is enabled), the result keeps its inputs alive together with a
// closure that scatters the output gradient back into them. Frozen parameters
// are leaves with requires_grad == false, so no weight gradient is ever formed
// for them while gradients still flow through their ops to earlier inputs.
namespace sketchinpaint::ag {

struct Node {
    Grid value;
    Grid grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    // Gradient buffer, zero-allocated on first use.
    Grid& grad_buffer();
};

class Var {
public:
    Var() = default;
    explicit Var(Grid value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Grid& value() const { return node_->value; }
    Grid& mutable_value() { return node_->value; }
    const Grid::Shape& shape() const { return node_->value.shape(); }

    bool requires_grad() const { return node_ && node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }

    // Empty Grid until a backward pass reaches this Var.
    const Grid& grad() const { return node_->grad; }
    Grid& grad_buffer() { return node_->grad_buffer(); }
    void zero_grad() { node_->grad = Grid(); }

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    friend Var make_result(Grid, std::initializer_list<Var>, std::function<void(Node&)>);
    std::shared_ptr<Node> node_;
};

// Builds the op output. Records `backward` only when an input requires grad.
Var make_result(Grid value, std::initializer_list<Var> inputs, std::function<void(Node&)> backward);

// Seeds d(root)/d(root) = 1 and propagates to every reachable Var. root must hold one element.
void backward(const Var& root);
// Vector-Jacobian product: propagates `seed` (shaped like root) as d(L)/d(root).
void backward(const Var& root, const Grid& seed);

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};
bool grad_enabled();

Var constant(Grid value);

// Elementwise with size-1 broadcasting on any axis.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);

Var silu(const Var& x);
Var sigmoid(const Var& x);

// x: (N, Cin, H, W), weight: (Cout, Cin, k, k), bias: (1, Cout, 1, 1) or undefined.
// Zero padding. A (N, F, 1, 1) input with a 1x1 kernel is a dense layer.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding);

enum class NormEpsilon {
    additive,   // divide by sqrt(var + eps)
    std_floor,  // divide by max(sqrt(var), eps)
};

// gamma/beta: (1, C, 1, 1) or undefined for a plain normalization.
Var group_norm(const Var& x, int groups, double eps, const Var& gamma, const Var& beta,
               NormEpsilon mode = NormEpsilon::additive);

Var concat_channels(std::span<const Var> parts);
Var upsample_nearest2x(const Var& x);
// (N, C, H, W) -> (N, C, 1, 1)
Var global_avg_pool(const Var& x);
// (N, C, H, W) -> (N, C * r * r, H / r, W / r); output channel c * r * r + dy * r + dx.
Var pixel_unshuffle(const Var& x, int factor);

// Single-head attention from spatial positions of x (N, C, H, W) to the tokens of
// text (N, 1, T, D). Projections are stored (out, in, 1, 1). Returns the attended
// values projected back to C channels, without the residual.
Var cross_attention(const Var& x, const Var& text, const Var& wq, const Var& wk, const Var& wv, const Var& wo);

// mean((a - b)^2) as a (1, 1, 1, 1) Var.
Var mse(const Var& a, const Var& b);

}  // namespace sketchinpaint::ag
