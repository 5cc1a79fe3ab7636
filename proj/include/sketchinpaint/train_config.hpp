#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sketchinpaint/model.hpp"

namespace sketchinpaint {

// Training and model-shape settings. Text form is one "key = value" per line;
// '#' starts a comment. Unknown keys are rejected.
struct TrainConfig {
    double learning_rate = 1e-5;
    std::string lr_decay = "constant";  // "constant" or "cosine" (to zero over `steps`)
    int batch_size = 4;
    int steps = 2000;
    std::array<double, 3> mask_mix{0.6, 0.3, 0.1};  // partial, segmentation, bbox
    double text_dropout = 0.1;
    double sketch_dropout = 0.1;
    std::uint64_t seed = 0;
    int log_every = 100;
    int checkpoint_every = 0;  // 0: final checkpoint only

    int timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;
    std::string schedule = "linear";

    int latent_size = 16;
    int base_width = 32;
    bool identity_vae = false;
    std::uint64_t init_seed = 1234;

    // Text-conditioned pretraining of the base denoiser on a synthetic corpus drawn
    // from base_pretrain_seed, run once before the base is frozen. 0 steps skips it.
    int base_pretrain_steps = 1000;
    int base_pretrain_batch = 8;
    double base_pretrain_lr = 5e-4;
    int base_pretrain_images = 256;
    std::uint64_t base_pretrain_seed = 999;

    // Throws ParameterError naming the field.
    void validate() const;
    ModelConfig model_config() const;
    NoiseSchedule noise_schedule() const;
    DropoutConfig dropout() const;
    // Learning rate used for optimizer step `step` (1-based).
    double learning_rate_at(int step) const;
    // Sets one field from its text form. Throws ParameterError for unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    static std::vector<std::string> keys();
};

std::string serialize_config(const TrainConfig& config);
TrainConfig parse_config(const std::string& text, const std::string& source = "<config>");
TrainConfig load_config(const std::string& path);

}  // namespace sketchinpaint
