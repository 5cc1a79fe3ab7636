#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sketchinpaint/autograd.hpp"
#include "sketchinpaint/grid.hpp"
#include "sketchinpaint/random.hpp"

namespace sketchinpaint {

enum class ScheduleKind { linear, cosine };

const char* schedule_kind_name(ScheduleKind kind);
ScheduleKind parse_schedule_kind(const std::string& name);

struct NoiseSchedule {
    int timesteps = 0;
    double beta_start = 0.0;
    double beta_end = 0.0;
    ScheduleKind kind = ScheduleKind::linear;
    // timesteps + 1 entries; alpha_bar[0] == 1.
    std::vector<double> alpha_bar;

    double at(int t) const;
};

// alpha_bar[t] = prod_{u <= t} (1 - beta_u). Linear: beta_u interpolates
// beta_start..beta_end over u = 1..T. Cosine: betas from the squared-cosine
// cumulative curve, clipped to 0.999 (the beta bounds are validated only).
NoiseSchedule build_schedule(int timesteps, double beta_start, double beta_end, ScheduleKind kind);

// sqrt(ab_t) * z0 + sqrt(1 - ab_t) * eps
Grid forward_diffuse(const Grid& z0, int t, const Grid& eps, const NoiseSchedule& schedule);
// Per-sample timesteps along the batch axis.
Grid forward_diffuse(const Grid& z0, std::span<const int> timesteps, const Grid& eps, const NoiseSchedule& schedule);

// eps_uncond + scale * (eps_cond - eps_uncond), evaluated as (1 - scale) * u + scale * c
// so that scale 0 and 1 reproduce their inputs bit for bit.
Grid cfg_combine(const Grid& eps_uncond, const Grid& eps_cond, double scale);

// Conditions for a batch of latents. Null flags are resolved by the predictor:
// a null text uses the embedder's null embedding, a null sketch is all zeros.
struct Conditioning {
    Grid text;                         // (N, 1, tokens, dim)
    Grid masked_latent;                // (N, latent_channels, h, w)
    std::array<Grid, 4> mask_pyramid;  // (N, 1, h / 2^i, w / 2^i), binary, 1 = visible
    Grid sketch;                       // (N, 1, H, W)
    std::vector<char> text_null;
    std::vector<char> sketch_null;

    int batch() const { return masked_latent.n(); }
    // Checks batch agreement, binary pyramid and the zero-sketch convention for null sketches.
    void validate() const;
    // Copy with every sample's text and/or sketch nulled.
    Conditioning with_nulls(bool text, bool sketch) const;
    void set_sketch_null(int sample);

    static Conditioning stack(std::span<const Conditioning> parts);
};

class NoisePredictor {
public:
    virtual ~NoisePredictor() = default;
    virtual ag::Var predict_noise(const ag::Var& z_t, std::span<const int> timesteps,
                                  const Conditioning& cond) const = 0;
};

// Evenly spaced descending timesteps ending at 1; steps == T gives T, T-1, ..., 1.
std::vector<int> ddim_timesteps(int total_timesteps, int steps);

// Deterministic DDIM (eta = 0) update from alpha_bar_t to alpha_bar_prev.
Grid ddim_step(const Grid& z_t, const Grid& eps, double alpha_bar_t, double alpha_bar_prev);

// Runs `steps` DDIM updates from N(0, I) drawn with `seed`. Each step evaluates the
// predictor twice (all conditions nulled except the masked image, then the full
// conditions) and combines them with cfg_combine. Returns the predicted clean latent.
Grid ddim_sample(const NoisePredictor& model, const Conditioning& bundle, const NoiseSchedule& schedule, int steps,
                 double cfg_scale, std::uint64_t seed);

struct DropoutConfig {
    double text = 0.1;
    double sketch = 0.1;
};

struct TrainingBatch {
    Grid z0;
    Conditioning cond;
    std::vector<std::string> ids;
};

struct LossEvaluation {
    ag::Var loss;
    std::vector<int> timesteps;
    Grid eps;
    Grid z_t;
    std::vector<char> text_dropped;
    std::vector<char> sketch_dropped;
};

// Draws t ~ U{1..T} per sample, then eps ~ N(0, I), then the per-sample condition
// dropout; returns mean((eps - eps_theta(z_t, ...))^2) over batch and elements.
LossEvaluation training_loss(const NoisePredictor& model, const TrainingBatch& batch, const NoiseSchedule& schedule,
                             Rng& rng, const DropoutConfig& dropout = {});

}  // namespace sketchinpaint
