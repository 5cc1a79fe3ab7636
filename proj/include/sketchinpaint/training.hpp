#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "sketchinpaint/checkpoint.hpp"
#include "sketchinpaint/datagen.hpp"
#include "sketchinpaint/train_config.hpp"

namespace sketchinpaint {

enum class MaskType { partial, segmentation, bbox };
const char* mask_type_name(MaskType type);

// Draws partial / segmentation / bbox with the given probabilities.
MaskType draw_mask_type(Rng& rng, const std::array<double, 3>& mix);

// pm for a mask type: the tuple's partial mask, the complement of m0, or the
// complement of m0's bounding box. 1 = visible.
Grid training_mask(const FourTuple& tuple, MaskType type);
// Pixel-space input for a mask type; the sketch is (1 - pm) * m0 * full sketch.
InpaintInput training_input(const FourTuple& tuple, MaskType type);

// Per-sample latents and conditioning for each mask type, encoded once.
struct PreparedSample {
    std::string id;
    Grid z0;
    std::array<Conditioning, 3> cond;  // indexed by MaskType
};
std::vector<PreparedSample> prepare_samples(const SketchInpaintModel& model, const std::vector<FourTuple>& tuples);

// Loss on fixed (t, eps) draws with partial masks and no dropout, for comparing
// parameter states.
double evaluation_loss(const SketchInpaintModel& model, const std::vector<PreparedSample>& samples,
                       const NoiseSchedule& schedule, std::uint64_t seed, int draws_per_sample = 4);

struct TrainResult {
    std::vector<double> losses;  // one per optimizer step
    std::vector<std::string> checkpoints;
    std::array<long long, 3> mask_type_counts{0, 0, 0};
};

struct TrainOptions {
    std::string out_dir;               // periodic checkpoints and NaN dumps; empty disables files
    std::ostream* log = nullptr;       // "step N loss X" lines every log_every steps
    std::function<void(int step, double loss)> on_step;
};

// Fits the (frozen) toy VAE on the tuple images. Run once before training.
VaeFitReport fit_vae(SketchInpaintModel& model, const std::vector<FourTuple>& tuples);

struct FrozenPretrainReport {
    VaeFitReport vae;
    std::vector<double> base_losses;  // one per pretraining step
};

// Synthetic corpus for the frozen components, drawn from base_pretrain_seed at the
// model's image size.
std::vector<InstanceSample> pretrain_corpus(const TrainConfig& config);

// Prepares the frozen components once: fits the VAE on the corpus images, then trains
// the base denoiser as a text-conditioned noise predictor on their latents (Adam,
// base_pretrain_* settings, text dropout as configured) and freezes it again.
// Throws TrainingError on a non-finite loss.
FrozenPretrainReport pretrain_frozen(SketchInpaintModel& model, const std::vector<InstanceSample>& corpus,
                                     const TrainConfig& config, std::ostream* log = nullptr);

// Runs Adam on the trainable parameters; the VAE must already be fitted. Batches
// draw samples uniformly with replacement and a mask type per sample from
// mask_mix. A non-finite loss aborts with TrainingError
// naming the batch ids (and writes nan_batch.json to out_dir).
TrainResult train(SketchInpaintModel& model, const std::vector<FourTuple>& tuples, const TrainConfig& config,
                  const TrainOptions& options = {});

std::vector<FourTuple> load_manifest_tuples(const std::string& manifest_path);

}  // namespace sketchinpaint
