#include "sketchinpaint/sbfi.hpp"

#include "sketchinpaint/errors.hpp"

namespace sketchinpaint {

SketchConditionalEncoder::SketchConditionalEncoder(const UNetConfig& config, int unshuffle_factor,
                                                   ParameterSet& params, Rng& rng)
    : config_(config) {
    const auto g = ParamGroup::trainable;
    embed_.factor = unshuffle_factor;
    embed_.proj = make_conv(params, "sce.embed", unshuffle_factor * unshuffle_factor, config.channels(1), 1, 1, g,
                            Init::uniform_fan_in, rng);
    int width = config.channels(1);
    for (int i = 1; i <= kNumScales; ++i) {
        const auto idx = static_cast<std::size_t>(i - 1);
        const std::string prefix = "sce.enc" + std::to_string(i);
        if (i > 1) {
            down_[idx - 1] = make_conv(params, prefix + ".down", width, width, 3, 2, g, Init::uniform_fan_in, rng);
        }
        blocks_[idx] = make_res_block(params, prefix + ".res", width, config.channels(i), config.temb_dim(),
                                      config.groupnorm_groups, g, rng);
        width = config.channels(i);
    }
}

MultiScaleFeatures SketchConditionalEncoder::forward(const ag::Var& sketch, const ag::Var& temb) const {
    const Grid& sv = sketch.value();
    const int expected = config_.latent_size * embed_.factor;
    if (sv.c() != 1 || sv.h() != expected || sv.w() != expected) {
        throw ShapeError("sce_forward: sketch " + sv.shape_str() + " must be single-channel with side " +
                         std::to_string(expected));
    }
    MultiScaleFeatures out;
    ag::Var h = embed_(sketch);
    for (int i = 1; i <= kNumScales; ++i) {
        const auto idx = static_cast<std::size_t>(i - 1);
        if (i > 1) {
            h = down_[idx - 1](h);
        }
        h = blocks_[idx](h, temb);
        out[idx] = h;
    }
    return out;
}

ag::Var sketch_affine(const ag::Var& x, const ag::Var& gamma, const ag::Var& beta, const ag::Var& vm, int groups,
                      double std_floor) {
    const Grid& xv = x.value();
    const Grid::Shape per_channel{xv.n(), xv.c(), 1, 1};
    if (gamma.shape() != per_channel || beta.shape() != per_channel) {
        throw ShapeError("affine_modulate: gamma/beta must be " + shape_str(per_channel));
    }
    if (vm.shape() != Grid::Shape{xv.n(), 1, xv.h(), xv.w()}) {
        throw ShapeError("affine_modulate: visual mask " + vm.value().shape_str() + " not broadcastable over " +
                         xv.shape_str());
    }
    const ag::Var x_tilde = ag::group_norm(x, groups, std_floor, {}, {}, ag::NormEpsilon::std_floor);
    return ag::mul(vm, ag::add(ag::mul(gamma, x_tilde), beta));
}

SbfiBlock::SbfiBlock(const std::string& prefix, int channels, int groups, ParameterSet& params, Rng& rng)
    : groups_(groups) {
    const auto g = ParamGroup::trainable;
    fuse_zero_ = make_conv(params, prefix + ".fuse_zero", channels, channels, 1, 1, g, Init::zero, rng);
    vm_conv_ = make_conv(params, prefix + ".vm_conv", channels, 1, 1, 1, g, Init::uniform_fan_in, rng);
    vm_norm_ = make_group_norm(params, prefix + ".vm_norm", 1, 1, g);
    gamma_zero_ = make_conv(params, prefix + ".gamma_zero", channels, channels, 1, 1, g, Init::zero, rng);
    beta_zero_ = make_conv(params, prefix + ".beta_zero", channels, channels, 1, 1, g, Init::zero, rng);
}

SbfiBlock::FusedContext SbfiBlock::fuse_context(const ag::Var& n_hat, const ag::Var& s) const {
    require_same_shape(n_hat.value(), s.value(), "fuse_context");
    FusedContext out;
    out.x = ag::add(n_hat, fuse_zero_(s));
    out.vm = ag::sigmoid(vm_norm_(vm_conv_(out.x)));
    return out;
}

ag::Var SbfiBlock::affine_modulate(const ag::Var& x, const ag::Var& s, const ag::Var& vm, SbfiTrace* trace) const {
    require_same_shape(x.value(), s.value(), "affine_modulate");
    const ag::Var gamma = ag::global_avg_pool(gamma_zero_(s));
    const ag::Var beta = ag::global_avg_pool(beta_zero_(s));
    const ag::Var x_hat = sketch_affine(x, gamma, beta, vm, groups_);
    if (trace) {
        trace->gamma = gamma;
        trace->beta = beta;
        trace->x_tilde = ag::group_norm(x, groups_, 1e-5, {}, {}, ag::NormEpsilon::std_floor);
        trace->x_hat = x_hat;
    }
    return x_hat;
}

ag::Var SbfiBlock::forward(const ag::Var& n_hat, const ag::Var& s, SbfiTrace* trace) const {
    const FusedContext fused = fuse_context(n_hat, s);
    const ag::Var x_hat = affine_modulate(fused.x, s, fused.vm, trace);
    ag::Var sn_hat = ag::add(n_hat, x_hat);
    if (trace) {
        trace->n_hat = n_hat;
        trace->s = s;
        trace->x = fused.x;
        trace->vm = fused.vm;
        trace->sn_hat = sn_hat;
    }
    return sn_hat;
}

}  // namespace sketchinpaint
