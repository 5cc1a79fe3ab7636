#include "sketchinpaint/masked_image_encoder.hpp"

#include "sketchinpaint/errors.hpp"

namespace sketchinpaint {

LatentMaskPyramid downsample_mask(const Grid& mask, const std::array<int, kNumScales>& factors) {
    if (mask.c() != 1) {
        throw ShapeError("downsample_mask: expected a single-channel mask, got " + mask.shape_str());
    }
    if (!is_binary(mask)) {
        throw ValueError("downsample_mask: mask is not binary");
    }
    LatentMaskPyramid pyramid;
    for (std::size_t i = 0; i < factors.size(); ++i) {
        const int f = factors[i];
        if (f < 1 || mask.h() % f != 0 || mask.w() % f != 0) {
            throw ShapeError("downsample_mask: side of " + mask.shape_str() + " not divisible by " + std::to_string(f));
        }
        Grid level(mask.n(), 1, mask.h() / f, mask.w() / f, 1.0);
        for (int n = 0; n < mask.n(); ++n) {
            for (int y = 0; y < mask.h(); ++y) {
                for (int x = 0; x < mask.w(); ++x) {
                    if (mask.at(n, 0, y, x) == 0.0) {
                        level.at(n, 0, y / f, x / f) = 0.0;
                    }
                }
            }
        }
        pyramid.levels[i] = std::move(level);
    }
    return pyramid;
}

MultiScaleFeatures inject(const MultiScaleFeatures& noisy, const MultiScaleFeatures& masked) {
    MultiScaleFeatures out;
    for (std::size_t i = 0; i < out.size(); ++i) {
        require_same_shape(noisy[i].value(), masked[i].value(), "inject");
        out[i] = ag::add(noisy[i], masked[i]);
    }
    return out;
}

MaskedImageEncoder::MaskedImageEncoder(const UNetConfig& config, ParameterSet& params, Rng& rng) : config_(config) {
    const auto g = ParamGroup::trainable;
    const auto init = Init::uniform_fan_in;
    conv_in_ = make_conv(params, "mie.conv_in", config.latent_channels, config.channels(1), 3, 1, g, init, rng);
    int width = config.channels(1);
    for (int i = 1; i <= kNumScales; ++i) {
        const auto idx = static_cast<std::size_t>(i - 1);
        const std::string prefix = "mie.enc" + std::to_string(i);
        if (i > 1) {
            down_[idx - 1] = make_conv(params, prefix + ".down", width, width, 3, 2, g, init, rng);
        }
        mask_fuse_[idx] = make_conv(params, prefix + ".mask_fuse", width + 1, width, 3, 1, g, init, rng);
        blocks_[idx] = make_res_block(params, prefix + ".res", width, config.channels(i), config.temb_dim(),
                                      config.groupnorm_groups, g, rng);
        width = config.channels(i);
        proj_[idx] = make_conv(params, prefix + ".proj", width, width, 1, 1, g, Init::zero, rng);
    }
}

MultiScaleFeatures MaskedImageEncoder::forward(const ag::Var& masked_latent,
                                               const std::array<Grid, kNumScales>& pyramid,
                                               const ag::Var& temb) const {
    const Grid& lv = masked_latent.value();
    if (lv.c() != config_.latent_channels || lv.h() != config_.latent_size || lv.w() != config_.latent_size) {
        throw ShapeError("mie_forward: masked latent " + lv.shape_str() + " does not match the base latent");
    }
    MultiScaleFeatures out;
    ag::Var h = conv_in_(masked_latent);
    for (int i = 1; i <= kNumScales; ++i) {
        const auto idx = static_cast<std::size_t>(i - 1);
        if (i > 1) {
            h = down_[idx - 1](h);
        }
        const Grid& level = pyramid[idx];
        if (level.n() != h.value().n() || level.h() != h.value().h() || level.w() != h.value().w() || level.c() != 1) {
            throw ShapeError("mie_forward: mask level " + std::to_string(i) + " " + level.shape_str() +
                             " does not match feature " + h.value().shape_str());
        }
        const std::array<ag::Var, 2> parts{h, ag::constant(level)};
        h = mask_fuse_[idx](ag::concat_channels(parts));
        h = blocks_[idx](h, temb);
        out[idx] = proj_[idx](h);
    }
    return out;
}

}  // namespace sketchinpaint
