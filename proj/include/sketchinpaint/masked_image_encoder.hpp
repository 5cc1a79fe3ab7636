#pragma once

#include <array>

#include "sketchinpaint/unet.hpp"

namespace sketchinpaint {

using MultiScaleFeatures = std::array<ag::Var, kNumScales>;

struct LatentMaskPyramid {
    std::array<Grid, kNumScales> levels;
};

// Min-pools a binary mask (1 = visible) by each factor: a low-resolution cell is 1
// only when every source pixel it covers is 1. Sides must divide by the largest
// factor.
LatentMaskPyramid downsample_mask(const Grid& mask, const std::array<int, kNumScales>& factors = {8, 16, 32, 64});

// N_hat_i = N_i + M_i
MultiScaleFeatures inject(const MultiScaleFeatures& noisy, const MultiScaleFeatures& masked);

// Mirrors the base encoder without cross-attention. Before each scale's block the
// same-size mask level is concatenated and fused back to the running width by a
// 3x3 conv; each scale ends in a zero-initialized 1x1 projection, so M == 0 at
// initialization. Parameters are registered trainable under "mie.".
class MaskedImageEncoder {
public:
    MaskedImageEncoder() = default;
    MaskedImageEncoder(const UNetConfig& config, ParameterSet& params, Rng& rng);

    // temb as produced by BaseDenoiser::time_embedding.
    MultiScaleFeatures forward(const ag::Var& masked_latent, const std::array<Grid, kNumScales>& pyramid,
                               const ag::Var& temb) const;

private:
    UNetConfig config_;
    Conv2d conv_in_;
    std::array<Conv2d, kNumScales - 1> down_;
    std::array<Conv2d, kNumScales> mask_fuse_;
    std::array<ResBlock, kNumScales> blocks_;
    std::array<Conv2d, kNumScales> proj_;
};

}  // namespace sketchinpaint
