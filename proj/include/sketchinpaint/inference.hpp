#pragma once

#include <cstdint>

#include "sketchinpaint/model.hpp"

namespace sketchinpaint {

struct InferenceOptions {
    int steps = 50;
    double cfg_scale = 7.5;
    std::uint64_t seed = 0;
};

// input * pm + clamp(generated, 0, 1) * (1 - pm), selecting rather than blending so
// visible pixels are copied bit for bit.
Grid composite(const Grid& input, const Grid& pm, const Grid& generated);

// Encodes the input, runs DDIM with classifier-free guidance, decodes and
// composites. An all-zero sketch selects text-only guidance.
Grid infer(const SketchInpaintModel& model, const NoiseSchedule& schedule, const InpaintInput& input,
           const InferenceOptions& options = {});

// "cpu" unless SKETCHINPAINT_DEVICE says otherwise; only "cpu" is supported.
std::string default_device();

}  // namespace sketchinpaint
