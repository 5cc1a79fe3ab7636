#pragma once

#include <string>
#include <vector>

#include "sketchinpaint/inference.hpp"
#include "sketchinpaint/metrics.hpp"

namespace sketchinpaint {

// Runs inference on each manifest record (masked image, partial mask, partial
// sketch, caption) and scores it against the record's ground-truth image.
// Records whose ground truth cannot be read are reported as skipped.
std::vector<MetricsReport> evaluate(const SketchInpaintModel& model, const NoiseSchedule& schedule,
                                    const std::string& manifest_path, const InferenceOptions& options,
                                    bool whole_image = false);

struct FeatureDumpOptions {
    int scale = 1;
    int timestep = 500;
    std::uint64_t seed = 0;
};

// One exported map: channel-averaged values written as 8-bit grey. Signed maps
// share one scale R across the dump and store 128 + round(127 * v / R); the
// visual mask stores round(255 * vm).
struct FeatureMap {
    std::string name;
    std::string file;
    Grid values;  // (1, 1, h, w) channel average before quantization
    double zero_point = 0.0;
    double scale = 0.0;  // value per grey level
};

// Exports n_hat, s, x, vm, vm_gamma, vm_beta, x_hat and sn_hat for one SBFI
// scale of a single input noised to `timestep`, plus a features.json index.
std::vector<FeatureMap> dump_features(const SketchInpaintModel& model, const NoiseSchedule& schedule,
                                      const InpaintInput& input, const FeatureDumpOptions& options,
                                      const std::string& out_dir);

}  // namespace sketchinpaint
