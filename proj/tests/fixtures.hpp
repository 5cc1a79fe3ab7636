#pragma once

#include <string>
#include <vector>

#include "sketchinpaint/model.hpp"
#include "test_util.hpp"

namespace fixtures {

using namespace sketchinpaint;

// Small identity-VAE model so unit tests stay fast: 8 x 8 latents, widths 16..64.
inline ModelConfig small_config(std::uint64_t seed = 7) {
    ModelConfig c;
    c.unet.latent_size = 8;
    c.unet.base_width = 16;
    c.vae_mode = VaeMode::identity;
    c.vae_factor = 1;
    c.image_channels = c.unet.latent_channels;
    c.init_seed = seed;
    return c;
}

// Random image in [0, 1], a random binary partial mask and a sparse sketch.
inline InpaintInput random_input(const ModelConfig& config, Rng& rng, const std::string& caption = "a red square") {
    const int side = config.image_size();
    InpaintInput in;
    in.image = Grid(1, config.image_channels, side, side);
    for (double& v : in.image.values()) v = uniform01(rng);
    in.partial_mask = Grid(1, 1, side, side);
    for (double& v : in.partial_mask.values()) v = uniform01(rng) < 0.6 ? 1.0 : 0.0;
    in.sketch = Grid(1, 1, side, side);
    for (double& v : in.sketch.values()) v = uniform01(rng) < 0.2 ? 1.0 : 0.0;
    in.caption = caption;
    return in;
}

inline Conditioning random_conditioning(const SketchInpaintModel& model, int n, Rng& rng) {
    std::vector<InpaintInput> inputs;
    for (int i = 0; i < n; ++i) {
        inputs.push_back(random_input(model.config(), rng, i % 2 ? "a blue circle" : "a red square"));
    }
    return model.make_conditioning(inputs);
}

inline std::vector<int> random_timesteps(int n, Rng& rng, int T = 1000) {
    std::vector<int> ts(static_cast<std::size_t>(n));
    for (int& t : ts) t = uniform_int(rng, 1, T);
    return ts;
}

// Sets every trainable parameter to small random values so the adapters are active.
inline void randomize_trainable(SketchInpaintModel& model, Rng& rng, double scale = 0.05) {
    for (Parameter& p : model.parameters().all()) {
        if (p.group == ParamGroup::trainable) {
            for (double& v : p.var.mutable_value().values()) v += scale * standard_normal(rng);
        }
    }
}

inline double max_rel_error(const Grid& a, const Grid& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, test_util::rel_error(a[i], b[i], 1e-12));
    }
    return worst;
}

}  // namespace fixtures
