#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sketchinpaint/nn.hpp"

namespace sketchinpaint {

constexpr int kNumScales = 4;

struct UNetConfig {
    int latent_channels = 4;
    int latent_size = 16;
    int base_width = 32;
    std::array<int, kNumScales> channel_multipliers{1, 2, 4, 4};
    std::vector<int> attention_scales{3, 4};  // 1-based scale indices
    int text_embed_dim = 32;
    int groupnorm_groups = 8;

    // Channel width of 1-based scale i.
    int channels(int scale) const { return base_width * channel_multipliers[static_cast<std::size_t>(scale - 1)]; }
    // Spatial side of 1-based scale i.
    int side(int scale) const { return latent_size >> (scale - 1); }
    int temb_dim() const { return 4 * base_width; }
    bool has_attention(int scale) const;

    // Throws ParameterError naming the offending field.
    void validate() const;

    friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

// Per-call view into the encoder. N_i is published before the scale-i hook runs;
// the hook output (or N_i when no hook is set) is what both the next encoder
// stage and the decoder skip connection consume.
struct EncoderTap {
    using Hook = std::function<ag::Var(const ag::Var&)>;

    std::array<ag::Var, kNumScales> features;  // N_1..N_4
    std::array<Hook, kNumScales> hooks;
    std::array<ag::Var, kNumScales> skips;     // feature handed to decoder scale i
    std::array<ag::Var, kNumScales> decoder;   // decoder output at scale i
};

// Text-conditioned U-Net noise predictor. All parameters are registered frozen
// under "base.".
class BaseDenoiser {
public:
    BaseDenoiser() = default;
    BaseDenoiser(const UNetConfig& config, ParameterSet& params, Rng& rng);

    // SiLU(MLP(sinusoid(t))), (N, temb_dim, 1, 1). Ready to feed ResBlocks.
    ag::Var time_embedding(std::span<const int> timesteps) const;

    ag::Var forward(const ag::Var& z_t, std::span<const int> timesteps, const ag::Var& text,
                    EncoderTap* tap = nullptr) const;
    ag::Var forward(const ag::Var& z_t, const ag::Var& temb, const ag::Var& text, EncoderTap* tap) const;

    const UNetConfig& config() const { return config_; }

private:
    UNetConfig config_;
    Conv2d time1_, time2_;
    Conv2d conv_in_;
    std::array<ResBlock, kNumScales> enc_blocks_;
    std::array<std::optional<CrossAttention>, kNumScales> enc_attn_;
    std::array<Conv2d, kNumScales - 1> down_;
    ResBlock mid_;
    std::array<ResBlock, kNumScales> dec_blocks_;
    std::array<std::optional<CrossAttention>, kNumScales> dec_attn_;
    std::array<Conv2d, kNumScales - 1> up_;  // up_[i - 2] lifts scale i to scale i - 1
    GroupNorm out_norm_;
    Conv2d out_conv_;
};

}  // namespace sketchinpaint
