#include "sketchinpaint/unet.hpp"

#include <algorithm>

#include "sketchinpaint/errors.hpp"

namespace sketchinpaint {

bool UNetConfig::has_attention(int scale) const {
    return std::find(attention_scales.begin(), attention_scales.end(), scale) != attention_scales.end();
}

void UNetConfig::validate() const {
    if (latent_channels < 1) {
        throw ParameterError("latent_channels", "must be >= 1");
    }
    if (base_width < 1 || base_width % 2 != 0) {
        throw ParameterError("base_width", "must be a positive even number");
    }
    if (latent_size < 8 || latent_size % 8 != 0) {
        throw ParameterError("latent_size", "must be a positive multiple of 8 for four scales");
    }
    for (int m : channel_multipliers) {
        if (m < 1) {
            throw ParameterError("channel_multipliers", "entries must be >= 1");
        }
    }
    for (int s : attention_scales) {
        if (s < 1 || s > kNumScales) {
            throw ParameterError("attention_scales", "scale " + std::to_string(s) + " outside 1..4");
        }
    }
    if (text_embed_dim < 1) {
        throw ParameterError("text_embed_dim", "must be >= 1");
    }
    auto divides = [this](int channels) { return groupnorm_groups > 0 && channels % groupnorm_groups == 0; };
    for (int i = 1; i <= kNumScales; ++i) {
        const int below = i == kNumScales ? channels(kNumScales) : channels(i + 1);
        if (!divides(channels(i)) || !divides(below + channels(i))) {
            throw ParameterError("groupnorm_groups", std::to_string(groupnorm_groups) +
                                                         " does not divide the channel widths at scale " +
                                                         std::to_string(i));
        }
    }
}

BaseDenoiser::BaseDenoiser(const UNetConfig& config, ParameterSet& params, Rng& rng) : config_(config) {
    config.validate();
    const auto g = ParamGroup::frozen;
    const auto init = Init::uniform_fan_in;
    const int groups = config.groupnorm_groups;
    const int temb = config.temb_dim();

    time1_ = make_conv(params, "base.time.0", config.base_width, temb, 1, 1, g, init, rng);
    time2_ = make_conv(params, "base.time.1", temb, temb, 1, 1, g, init, rng);
    conv_in_ = make_conv(params, "base.conv_in", config.latent_channels, config.channels(1), 3, 1, g, init, rng);
    int width = config.channels(1);
    for (int i = 1; i <= kNumScales; ++i) {
        const auto idx = static_cast<std::size_t>(i - 1);
        const std::string prefix = "base.enc" + std::to_string(i);
        if (i > 1) {
            down_[idx - 1] = make_conv(params, prefix + ".down", width, width, 3, 2, g, init, rng);
        }
        enc_blocks_[idx] = make_res_block(params, prefix + ".res", width, config.channels(i), temb, groups, g, rng);
        width = config.channels(i);
        if (config.has_attention(i)) {
            enc_attn_[idx] = make_cross_attention(params, prefix + ".attn", width, config.text_embed_dim, groups, g, rng);
        }
    }
    mid_ = make_res_block(params, "base.mid", width, width, temb, groups, g, rng);
    for (int i = kNumScales; i >= 1; --i) {
        const auto idx = static_cast<std::size_t>(i - 1);
        const std::string prefix = "base.dec" + std::to_string(i);
        dec_blocks_[idx] =
            make_res_block(params, prefix + ".res", width + config.channels(i), config.channels(i), temb, groups, g, rng);
        width = config.channels(i);
        if (config.has_attention(i)) {
            dec_attn_[idx] = make_cross_attention(params, prefix + ".attn", width, config.text_embed_dim, groups, g, rng);
        }
        if (i > 1) {
            up_[idx - 1] = make_conv(params, prefix + ".up", width, width, 3, 1, g, init, rng);
        }
    }
    out_norm_ = make_group_norm(params, "base.out_norm", width, groups, g);
    out_conv_ = make_conv(params, "base.out_conv", width, config.latent_channels, 3, 1, g, init, rng);
}

ag::Var BaseDenoiser::time_embedding(std::span<const int> timesteps) const {
    const ag::Var features = ag::constant(timestep_features(timesteps, config_.base_width));
    return ag::silu(time2_(ag::silu(time1_(features))));
}

ag::Var BaseDenoiser::forward(const ag::Var& z_t, std::span<const int> timesteps, const ag::Var& text,
                              EncoderTap* tap) const {
    return forward(z_t, time_embedding(timesteps), text, tap);
}

ag::Var BaseDenoiser::forward(const ag::Var& z_t, const ag::Var& temb, const ag::Var& text, EncoderTap* tap) const {
    const Grid& zv = z_t.value();
    if (zv.c() != config_.latent_channels) {
        throw ShapeError("unet_forward: expected " + std::to_string(config_.latent_channels) + " latent channels, got " +
                         zv.shape_str());
    }
    if (zv.h() != config_.latent_size || zv.w() != config_.latent_size) {
        throw ShapeError("unet_forward: expected latent side " + std::to_string(config_.latent_size) + ", got " +
                         zv.shape_str());
    }
    std::array<ag::Var, kNumScales> skips;
    ag::Var h = conv_in_(z_t);
    for (int i = 1; i <= kNumScales; ++i) {
        const auto idx = static_cast<std::size_t>(i - 1);
        if (i > 1) {
            h = down_[idx - 1](h);
        }
        h = enc_blocks_[idx](h, temb);
        if (enc_attn_[idx]) {
            h = (*enc_attn_[idx])(h, text);
        }
        if (tap) {
            tap->features[idx] = h;
            if (tap->hooks[idx]) {
                h = tap->hooks[idx](h);
                if (h.shape() != tap->features[idx].shape()) {
                    throw ShapeError("unet_forward: hook at scale " + std::to_string(i) + " changed shape " +
                                     tap->features[idx].value().shape_str() + " to " + h.value().shape_str());
                }
            }
            tap->skips[idx] = h;
        }
        skips[idx] = h;
    }
    h = mid_(h, temb);
    for (int i = kNumScales; i >= 1; --i) {
        const auto idx = static_cast<std::size_t>(i - 1);
        const std::array<ag::Var, 2> parts{h, skips[idx]};
        h = dec_blocks_[idx](ag::concat_channels(parts), temb);
        if (dec_attn_[idx]) {
            h = (*dec_attn_[idx])(h, text);
        }
        if (tap) {
            tap->decoder[idx] = h;
        }
        if (i > 1) {
            h = up_[idx - 1](ag::upsample_nearest2x(h));
        }
    }
    return out_conv_(ag::silu(out_norm_(h)));
}

}  // namespace sketchinpaint
