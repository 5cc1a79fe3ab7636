#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sketchinpaint/diffusion.hpp"
#include "sketchinpaint/masked_image_encoder.hpp"
#include "sketchinpaint/sbfi.hpp"
#include "sketchinpaint/text_embedder.hpp"
#include "sketchinpaint/unet.hpp"
#include "sketchinpaint/vae.hpp"

namespace sketchinpaint {

struct ModelConfig {
    UNetConfig unet;
    TextEmbedderConfig text;
    VaeMode vae_mode = VaeMode::patch_linear;
    int vae_factor = 8;
    int image_channels = 3;
    std::uint64_t init_seed = 1234;

    // Pixel-space side; the latent side times the VAE factor.
    int image_size() const { return unet.latent_size * vae_factor; }
    // Pixel-space min-pool factors yielding the four latent scales.
    std::array<int, kNumScales> mask_factors() const;
    // Throws ParameterError naming the offending field.
    void validate() const;
    VaeConfig vae() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// One pixel-space inference or training input. image (1, C, H, W) in [0, 1];
// partial_mask (1, 1, H, W), 1 = visible; sketch (1, 1, H, W), all zeros for none.
struct InpaintInput {
    Grid image;
    Grid partial_mask;
    Grid sketch;
    std::string caption;
};

// Intermediate tensors of one full-model pass.
struct ForwardTrace {
    EncoderTap tap;
    MultiScaleFeatures masked;  // M_1..M_4
    MultiScaleFeatures sketch;  // S_1..S_4
    std::array<SbfiTrace, kNumScales> sbfi;
};

struct ParameterPartition {
    std::vector<const Parameter*> frozen;
    std::vector<const Parameter*> trainable;
};

// Frozen base denoiser, text embedder and VAE plus the trainable masked image
// encoder, sketch encoder and per-scale SBFI blocks. At every encoder scale the
// base feature N_i is replaced by sbfi_i(N_i + M_i, S_i).
class SketchInpaintModel : public NoisePredictor {
public:
    explicit SketchInpaintModel(const ModelConfig& config);
    SketchInpaintModel(const SketchInpaintModel&) = delete;
    SketchInpaintModel& operator=(const SketchInpaintModel&) = delete;

    ag::Var predict_noise(const ag::Var& z_t, std::span<const int> timesteps, const Conditioning& cond) const override;
    ag::Var predict_noise(const ag::Var& z_t, std::span<const int> timesteps, const Conditioning& cond,
                          ForwardTrace* trace) const;
    // The frozen denoiser alone, no adapters.
    ag::Var base_noise(const ag::Var& z_t, std::span<const int> timesteps, const Conditioning& cond) const;

    // Text embeddings with null rows replaced by the null embedding.
    Grid resolve_text(const Conditioning& cond) const;
    // Encodes pixel-space inputs: masked image = image * pm through the VAE, the
    // mask pyramid from pm, the caption through the text embedder. An empty caption
    // or an all-zero sketch sets the matching null flag.
    Conditioning make_conditioning(std::span<const InpaintInput> inputs) const;

    const ModelConfig& config() const { return config_; }
    ParameterSet& parameters() { return params_; }
    const ParameterSet& parameters() const { return params_; }
    const BaseDenoiser& base() const { return base_; }
    const MaskedImageEncoder& masked_image_encoder() const { return mie_; }
    const SketchConditionalEncoder& sketch_encoder() const { return sce_; }
    const SbfiBlock& sbfi(int scale) const { return sbfi_[static_cast<std::size_t>(scale - 1)]; }
    const TextEmbedder& text_embedder() const { return text_; }
    Vae& vae() { return vae_; }
    const Vae& vae() const { return vae_; }

private:
    ModelConfig config_;
    ParameterSet params_;
    TextEmbedder text_;
    BaseDenoiser base_;
    MaskedImageEncoder mie_;
    SketchConditionalEncoder sce_;
    std::array<SbfiBlock, kNumScales> sbfi_;
    Vae vae_;
};

// Splits parameters by name prefix: base./text./vae. must be frozen, mie./sce./sbfi.
// trainable. Throws IntegrityError on an unknown prefix or a group tag that
// disagrees with its prefix.
ParameterPartition partition_parameters(const ParameterSet& params);

}  // namespace sketchinpaint
