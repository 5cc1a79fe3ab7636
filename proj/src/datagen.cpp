#include "sketchinpaint/datagen.hpp"

#include "sketchinpaint/errors.hpp"
#include "sketchinpaint/masks.hpp"
#include "sketchinpaint/sketch.hpp"

namespace sketchinpaint {

void validate_instance(const InstanceSample& sample) {
    const Grid& im = sample.image;
    const Grid& m0 = sample.instance_mask;
    if (im.n() != 1 || im.c() != 3) {
        throw ShapeError("instance '" + sample.id + "': image must be (1, 3, H, W), got " + im.shape_str());
    }
    if (m0.shape() != Grid::Shape{1, 1, im.h(), im.w()}) {
        throw ShapeError("instance '" + sample.id + "': mask " + m0.shape_str() + " does not match image " +
                         im.shape_str());
    }
    if (!is_binary(m0)) {
        throw ValueError("instance '" + sample.id + "': mask is not binary");
    }
    if (mask_area(m0) == 0) {
        throw ValueError("instance '" + sample.id + "': empty instance mask");
    }
}

FourTuple build_four_tuple(const InstanceSample& sample, const DatagenConfig& config, std::uint64_t seed) {
    validate_instance(sample);
    if (config.dilation_levels < 1) {
        throw ParameterError("dilation_levels", "must be >= 1");
    }
    if (config.blur_levels < 1) {
        throw ParameterError("blur_levels", "must be >= 1");
    }
    if (!(config.coverage_min > 0.0 && config.coverage_min <= config.coverage_max && config.coverage_max <= 1.0)) {
        throw ParameterError("coverage_min", "coverage bounds must satisfy 0 < min <= max <= 1");
    }
    Rng rng(mix_seed(fnv1a(sample.id), seed));
    const Grid& m0 = sample.instance_mask;

    FourTuple out;
    out.id = sample.id;
    out.caption = sample.caption;
    out.image = sample.image;
    out.instance_mask = m0;
    Provenance& prov = out.provenance;
    prov.seed = seed;
    prov.sketch_type = config.sketch_type;

    // Step 1: mask ladder entry.
    prov.d = uniform_int(rng, 0, config.dilation_levels - 1);
    prov.s = uniform_int(rng, 0, config.blur_levels);
    const Grid m_d = dilate_mask(m0, prov.d, config.dilation_levels);
    const Grid m_d1 = dilate_mask(m0, prov.d + 1, config.dilation_levels);
    out.selected_mask = blend_masks(m_d, m_d1, prov.s, config.blur_levels, blur_kernel(prov.s));

    // Step 2: directional scan to the drawn coverage.
    prov.direction = draw_direction(rng);
    const double target = config.coverage_min + (config.coverage_max - config.coverage_min) * uniform01(rng);
    PartialMaskResult scan =
        bezier_partial_mask(out.selected_mask, prov.direction, target, rng, config.coverage_ceiling);
    prov.coverage = scan.coverage;
    prov.fallback = scan.fallback;
    out.partial_mask = std::move(scan.pm);

    // Step 3: sketch and partial sketch.
    out.sketch = SketchRegistry::instance().generate(config.sketch_type, sample.image);
    out.partial_sketch = partial_sketch(out.partial_mask, m0, out.sketch);

    out.masked_image = sample.image;
    for (int c = 0; c < out.masked_image.c(); ++c) {
        double* p = out.masked_image.plane(0, c);
        for (std::size_t i = 0; i < out.partial_mask.size(); ++i) {
            p[i] *= out.partial_mask[i];
        }
    }
    return out;
}

}  // namespace sketchinpaint
