#include "sketchinpaint/model.hpp"

#include <algorithm>

#include "sketchinpaint/errors.hpp"

namespace sketchinpaint {

std::array<int, kNumScales> ModelConfig::mask_factors() const {
    std::array<int, kNumScales> f{};
    for (int i = 0; i < kNumScales; ++i) {
        f[static_cast<std::size_t>(i)] = vae_factor << i;
    }
    return f;
}

void ModelConfig::validate() const {
    unet.validate();
    if (vae_factor < 1) {
        throw ParameterError("vae_factor", "must be >= 1");
    }
    if (image_channels < 1) {
        throw ParameterError("image_channels", "must be >= 1");
    }
    if (vae_mode == VaeMode::identity && (vae_factor != 1 || image_channels != unet.latent_channels)) {
        throw ParameterError("vae_mode", "identity mode needs vae_factor 1 and image_channels == latent_channels");
    }
    if (text.embed_dim != unet.text_embed_dim) {
        throw ParameterError("text_embed_dim", "text embedder and denoiser disagree");
    }
}

VaeConfig ModelConfig::vae() const {
    VaeConfig v;
    v.mode = vae_mode;
    v.factor = vae_factor;
    v.image_channels = image_channels;
    v.latent_channels = unet.latent_channels;
    return v;
}

SketchInpaintModel::SketchInpaintModel(const ModelConfig& config) : config_(config) {
    config.validate();
    Rng rng(config.init_seed);
    text_ = TextEmbedder(config.text, params_, rng);
    base_ = BaseDenoiser(config.unet, params_, rng);
    mie_ = MaskedImageEncoder(config.unet, params_, rng);
    sce_ = SketchConditionalEncoder(config.unet, config.vae_factor, params_, rng);
    for (int i = 1; i <= kNumScales; ++i) {
        sbfi_[static_cast<std::size_t>(i - 1)] = SbfiBlock("sbfi." + std::to_string(i), config.unet.channels(i),
                                                          config.unet.groupnorm_groups, params_, rng);
    }
    vae_ = Vae(config.vae(), params_);
}

Grid SketchInpaintModel::resolve_text(const Conditioning& cond) const {
    Grid text = cond.text;
    const Grid& null = text_.null_embedding();
    if (text.c() != 1 || text.h() != null.h() || text.w() != null.w()) {
        throw ShapeError("text embedding " + text.shape_str() + " does not match " + null.shape_str());
    }
    const std::size_t per = null.size();
    for (int i = 0; i < text.n(); ++i) {
        if (cond.text_null[static_cast<std::size_t>(i)]) {
            std::copy_n(null.data(), per, text.data() + i * per);
        }
    }
    return text;
}

ag::Var SketchInpaintModel::predict_noise(const ag::Var& z_t, std::span<const int> timesteps,
                                          const Conditioning& cond) const {
    return predict_noise(z_t, timesteps, cond, nullptr);
}

ag::Var SketchInpaintModel::predict_noise(const ag::Var& z_t, std::span<const int> timesteps,
                                          const Conditioning& cond, ForwardTrace* trace) const {
    cond.validate();
    if (z_t.value().n() != cond.batch() || static_cast<int>(timesteps.size()) != cond.batch()) {
        throw ShapeError("predict_noise: latent, timesteps and conditioning batch sizes disagree");
    }
    const ag::Var temb = base_.time_embedding(timesteps);
    const ag::Var text = ag::constant(resolve_text(cond));
    const MultiScaleFeatures m = mie_.forward(ag::constant(cond.masked_latent), cond.mask_pyramid, temb);
    const MultiScaleFeatures s = sce_.forward(ag::constant(cond.sketch), temb);

    ForwardTrace local;
    ForwardTrace& tr = trace ? *trace : local;
    tr.masked = m;
    tr.sketch = s;
    for (std::size_t i = 0; i < kNumScales; ++i) {
        SbfiTrace* st = trace ? &tr.sbfi[i] : nullptr;
        tr.tap.hooks[i] = [this, &m, &s, i, st](const ag::Var& n) {
            return sbfi_[i].forward(ag::add(n, m[i]), s[i], st);
        };
    }
    ag::Var out = base_.forward(z_t, temb, text, &tr.tap);
    for (auto& hook : tr.tap.hooks) {
        hook = nullptr;
    }
    return out;
}

ag::Var SketchInpaintModel::base_noise(const ag::Var& z_t, std::span<const int> timesteps,
                                       const Conditioning& cond) const {
    cond.validate();
    return base_.forward(z_t, timesteps, ag::constant(resolve_text(cond)));
}

Conditioning SketchInpaintModel::make_conditioning(std::span<const InpaintInput> inputs) const {
    if (inputs.empty()) {
        throw ShapeError("make_conditioning: no inputs");
    }
    const int side = config_.image_size();
    std::vector<Conditioning> parts;
    parts.reserve(inputs.size());
    for (const InpaintInput& in : inputs) {
        const Grid::Shape image_shape{1, config_.image_channels, side, side};
        const Grid::Shape plane_shape{1, 1, side, side};
        if (in.image.shape() != image_shape || in.partial_mask.shape() != plane_shape ||
            in.sketch.shape() != plane_shape) {
            throw ShapeError("make_conditioning: expected image " + shape_str(image_shape) + " with mask and sketch " +
                             shape_str(plane_shape) + ", got " + in.image.shape_str() + ", " +
                             in.partial_mask.shape_str() + ", " + in.sketch.shape_str());
        }
        if (!is_binary(in.partial_mask)) {
            throw ValueError("make_conditioning: partial mask is not binary");
        }
        Grid masked = in.image;
        const std::size_t plane = static_cast<std::size_t>(side) * side;
        for (int c = 0; c < masked.c(); ++c) {
            double* p = masked.plane(0, c);
            for (std::size_t k = 0; k < plane; ++k) {
                p[k] *= in.partial_mask[k];
            }
        }
        Conditioning cond;
        cond.text = text_.encode(in.caption);
        cond.masked_latent = vae_.encode(masked);
        cond.mask_pyramid = downsample_mask(in.partial_mask, config_.mask_factors()).levels;
        cond.sketch = in.sketch;
        const bool sketch_zero =
            std::all_of(in.sketch.values().begin(), in.sketch.values().end(), [](double v) { return v == 0.0; });
        cond.text_null = {static_cast<char>(in.caption.empty())};
        cond.sketch_null = {static_cast<char>(sketch_zero)};
        parts.push_back(std::move(cond));
    }
    return Conditioning::stack(parts);
}

namespace {

bool has_prefix(const std::string& name, const char* prefix) {
    return name.rfind(prefix, 0) == 0;
}

}  // namespace

ParameterPartition partition_parameters(const ParameterSet& params) {
    static constexpr const char* kFrozen[] = {"base.", "text.", "vae."};
    static constexpr const char* kTrainable[] = {"mie.", "sce.", "sbfi."};
    ParameterPartition out;
    for (const Parameter& p : params.all()) {
        const bool frozen = std::any_of(std::begin(kFrozen), std::end(kFrozen),
                                        [&](const char* pre) { return has_prefix(p.name, pre); });
        const bool trainable = std::any_of(std::begin(kTrainable), std::end(kTrainable),
                                           [&](const char* pre) { return has_prefix(p.name, pre); });
        if (frozen == trainable) {
            throw IntegrityError("parameter '" + p.name + "' belongs to neither or both groups");
        }
        const ParamGroup expected = frozen ? ParamGroup::frozen : ParamGroup::trainable;
        if (p.group != expected || p.var.requires_grad() != trainable) {
            throw IntegrityError("parameter '" + p.name + "' is tagged " + group_name(p.group) + " but its prefix is " +
                                 group_name(expected));
        }
        (frozen ? out.frozen : out.trainable).push_back(&p);
    }
    return out;
}

}  // namespace sketchinpaint
