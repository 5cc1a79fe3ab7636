#include "sketchinpaint/inference.hpp"

#include <algorithm>
#include <cstdlib>

#include "sketchinpaint/errors.hpp"

namespace sketchinpaint {

Grid composite(const Grid& input, const Grid& pm, const Grid& generated) {
    require_same_shape(input, generated, "composite");
    if (pm.shape() != Grid::Shape{input.n(), 1, input.h(), input.w()}) {
        throw ShapeError("composite: mask " + pm.shape_str() + " does not cover image " + input.shape_str());
    }
    Grid out = Grid::zeros_like(input);
    for (int n = 0; n < input.n(); ++n) {
        for (int c = 0; c < input.c(); ++c) {
            for (int y = 0; y < input.h(); ++y) {
                for (int x = 0; x < input.w(); ++x) {
                    out.at(n, c, y, x) = pm.at(n, 0, y, x) != 0.0 ? input.at(n, c, y, x)
                                                                  : std::clamp(generated.at(n, c, y, x), 0.0, 1.0);
                }
            }
        }
    }
    return out;
}

Grid infer(const SketchInpaintModel& model, const NoiseSchedule& schedule, const InpaintInput& input,
           const InferenceOptions& options) {
    const Conditioning cond = model.make_conditioning(std::span(&input, 1));
    const Grid z0 = ddim_sample(model, cond, schedule, options.steps, options.cfg_scale, options.seed);
    return composite(input.image, input.partial_mask, model.vae().decode(z0));
}

std::string default_device() {
    const char* env = std::getenv("SKETCHINPAINT_DEVICE");
    const std::string device = env && *env ? env : "cpu";
    if (device != "cpu") {
        throw ParameterError("SKETCHINPAINT_DEVICE", "unsupported device '" + device + "' (only cpu is available)");
    }
    return device;
}

}  // namespace sketchinpaint
