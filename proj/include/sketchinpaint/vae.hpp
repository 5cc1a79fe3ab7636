#pragma once

#include <span>

#include "sketchinpaint/nn.hpp"

namespace sketchinpaint {

enum class VaeMode {
    identity,      // inputs are already latents
    patch_linear,  // stride-f patch encoder / decoder pair
};

const char* vae_mode_name(VaeMode mode);
VaeMode parse_vae_mode(const std::string& name);

struct VaeConfig {
    VaeMode mode = VaeMode::patch_linear;
    int factor = 8;
    int image_channels = 3;
    int latent_channels = 4;
};

struct VaeFitReport {
    double train_error = 0.0;
    double validation_error = 0.0;
    int train_images = 0;
    int validation_images = 0;
};

// Toy latent autoencoder. The encoder is an f x f, stride-f convolution to
// latent_channels and the decoder its transposed counterpart. fit() solves the
// reconstruction least-squares problem in closed form (principal patch
// components); latent channels are whitened to unit variance over the fit set.
// Parameters are registered frozen under "vae.".
class Vae {
public:
    Vae() = default;
    Vae(const VaeConfig& config, ParameterSet& params);

    Grid encode(const Grid& image) const;
    Grid decode(const Grid& latent) const;

    // The trailing round(validation_fraction * n) images are held out (at least one
    // when n >= 2; with a single image the fit set doubles as validation).
    VaeFitReport fit(std::span<const Grid> images, double validation_fraction = 0.2);

    bool fitted() const;
    double validation_error() const;
    const VaeConfig& config() const { return config_; }

private:
    int patch_size() const { return config_.image_channels * config_.factor * config_.factor; }

    VaeConfig config_;
    ag::Var mean_;        // (1, 1, 1, P)
    ag::Var basis_;       // (1, 1, L, P), rows orthonormal
    ag::Var scale_;       // (1, L, 1, 1)
    ag::Var fit_stats_;   // (1, 1, 1, 2): fitted flag, validation error
};

// Mean squared reconstruction error over all elements.
double reconstruction_error(const Vae& vae, std::span<const Grid> images);

}  // namespace sketchinpaint
