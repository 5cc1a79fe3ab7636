#pragma once

#include "sketchinpaint/masked_image_encoder.hpp"

namespace sketchinpaint {

// Space-to-channel rearrangement by `factor` followed by a trained 1x1 projection
// to the encoder input width.
struct SketchEmbed {
    int factor = 8;
    Conv2d proj;

    ag::Var operator()(const ag::Var& sketch) const { return proj(ag::pixel_unshuffle(sketch, factor)); }
};

// Mirrors the masked image encoder (no mask input): S_1..S_4 with the shapes of
// N_1..N_4. Parameters are registered trainable under "sce.".
class SketchConditionalEncoder {
public:
    SketchConditionalEncoder() = default;
    SketchConditionalEncoder(const UNetConfig& config, int unshuffle_factor, ParameterSet& params, Rng& rng);

    MultiScaleFeatures forward(const ag::Var& sketch, const ag::Var& temb) const;
    const SketchEmbed& embed() const { return embed_; }

private:
    UNetConfig config_;
    SketchEmbed embed_;
    std::array<Conv2d, kNumScales - 1> down_;
    std::array<ResBlock, kNumScales> blocks_;
};

// vm * (gamma * GN(x) + beta) with per-channel gamma/beta (N, C, 1, 1) and a
// single-channel gate vm (N, 1, H, W). GN has no affine of its own and floors the
// per-group standard deviation at `std_floor`.
ag::Var sketch_affine(const ag::Var& x, const ag::Var& gamma, const ag::Var& beta, const ag::Var& vm, int groups,
                      double std_floor = 1e-5);

// Intermediate tensors of one SBFI pass, for inspection and feature dumps.
struct SbfiTrace {
    ag::Var n_hat, s, x, vm, gamma, beta, x_tilde, x_hat, sn_hat;
};

// One scale of the bidirectional interaction.
//   fuse:    x = N_hat + zero_conv(S);  vm = sigmoid(GN(conv1x1(x)))  (one channel)
//   affine:  x_hat = vm * (gamma(S) * GN(x) + beta(S)),  gamma/beta = GAP(zero_conv(S))
//   output:  SN_hat = N_hat + x_hat
// Parameters are registered trainable under the given prefix.
class SbfiBlock {
public:
    struct FusedContext {
        ag::Var x;
        ag::Var vm;
    };

    SbfiBlock() = default;
    SbfiBlock(const std::string& prefix, int channels, int groups, ParameterSet& params, Rng& rng);

    FusedContext fuse_context(const ag::Var& n_hat, const ag::Var& s) const;
    ag::Var affine_modulate(const ag::Var& x, const ag::Var& s, const ag::Var& vm, SbfiTrace* trace = nullptr) const;
    ag::Var forward(const ag::Var& n_hat, const ag::Var& s, SbfiTrace* trace = nullptr) const;

    const Conv2d& fuse_conv() const { return fuse_zero_; }
    const Conv2d& vm_conv() const { return vm_conv_; }
    const GroupNorm& vm_norm() const { return vm_norm_; }
    const Conv2d& gamma_conv() const { return gamma_zero_; }
    const Conv2d& beta_conv() const { return beta_zero_; }
    int groups() const { return groups_; }

private:
    int groups_ = 8;
    Conv2d fuse_zero_;
    Conv2d vm_conv_;
    GroupNorm vm_norm_;
    Conv2d gamma_zero_;
    Conv2d beta_zero_;
};

}  // namespace sketchinpaint
