#include "sketchinpaint/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "sketchinpaint/errors.hpp"
#include "sketchinpaint/masks.hpp"
#include "sketchinpaint/optimizer.hpp"
#include "sketchinpaint/sketch.hpp"

namespace fs = std::filesystem;

namespace sketchinpaint {

const char* mask_type_name(MaskType type) {
    switch (type) {
        case MaskType::partial: return "partial";
        case MaskType::segmentation: return "segmentation";
        case MaskType::bbox: return "bbox";
    }
    return "?";
}

MaskType draw_mask_type(Rng& rng, const std::array<double, 3>& mix) {
    const double u = uniform01(rng);
    if (u < mix[0]) {
        return MaskType::partial;
    }
    if (u < mix[0] + mix[1]) {
        return MaskType::segmentation;
    }
    return MaskType::bbox;
}

Grid training_mask(const FourTuple& tuple, MaskType type) {
    if (type == MaskType::partial) {
        return tuple.partial_mask;
    }
    const Grid region = type == MaskType::segmentation ? tuple.instance_mask : bbox_mask(tuple.instance_mask);
    Grid pm = Grid::zeros_like(region);
    for (std::size_t i = 0; i < pm.size(); ++i) {
        pm[i] = 1.0 - region[i];
    }
    return pm;
}

InpaintInput training_input(const FourTuple& tuple, MaskType type) {
    InpaintInput in;
    in.image = tuple.image;
    in.partial_mask = training_mask(tuple, type);
    in.sketch = partial_sketch(in.partial_mask, tuple.instance_mask, tuple.sketch);
    in.caption = tuple.caption;
    return in;
}

std::vector<PreparedSample> prepare_samples(const SketchInpaintModel& model, const std::vector<FourTuple>& tuples) {
    std::vector<PreparedSample> out;
    out.reserve(tuples.size());
    for (const FourTuple& t : tuples) {
        PreparedSample s;
        s.id = t.id;
        s.z0 = model.vae().encode(t.image);
        for (MaskType type : {MaskType::partial, MaskType::segmentation, MaskType::bbox}) {
            const InpaintInput in = training_input(t, type);
            s.cond[static_cast<std::size_t>(type)] = model.make_conditioning(std::span(&in, 1));
        }
        out.push_back(std::move(s));
    }
    return out;
}

double evaluation_loss(const SketchInpaintModel& model, const std::vector<PreparedSample>& samples,
                       const NoiseSchedule& schedule, std::uint64_t seed, int draws_per_sample) {
    if (samples.empty()) {
        throw ValueError("evaluation_loss: no samples");
    }
    ag::NoGradGuard no_grad;
    Rng rng(seed);
    double total = 0.0;
    int count = 0;
    for (int k = 0; k < draws_per_sample; ++k) {
        for (const PreparedSample& s : samples) {
            const int t = uniform_int(rng, 1, schedule.timesteps);
            const Grid eps = normal_grid(s.z0.shape(), rng);
            const Grid z_t = forward_diffuse(s.z0, t, eps, schedule);
            const int ts[1] = {t};
            const ag::Var pred = model.predict_noise(ag::constant(z_t), ts, s.cond[0]);
            total += ag::mse(pred, ag::constant(eps)).value()[0];
            ++count;
        }
    }
    return total / count;
}

VaeFitReport fit_vae(SketchInpaintModel& model, const std::vector<FourTuple>& tuples) {
    std::vector<Grid> images;
    images.reserve(tuples.size());
    for (const auto& t : tuples) {
        images.push_back(t.image);
    }
    return model.vae().fit(images);
}

std::vector<InstanceSample> pretrain_corpus(const TrainConfig& config) {
    Rng rng(config.base_pretrain_seed);
    std::vector<InstanceSample> out;
    for (SynthSample& s : synth_corpus(config.base_pretrain_images, config.model_config().image_size(), rng)) {
        out.push_back(std::move(s.sample));
    }
    return out;
}

namespace {

// Lets gradients reach the base parameters for the guard's lifetime.
class UnfreezeGuard {
public:
    explicit UnfreezeGuard(std::vector<Parameter*> params) : params_(std::move(params)) {
        for (Parameter* p : params_) {
            p->var.set_requires_grad(true);
        }
    }
    ~UnfreezeGuard() {
        for (Parameter* p : params_) {
            p->var.set_requires_grad(false);
            p->var.zero_grad();
        }
    }
    UnfreezeGuard(const UnfreezeGuard&) = delete;
    UnfreezeGuard& operator=(const UnfreezeGuard&) = delete;

private:
    std::vector<Parameter*> params_;
};

}  // namespace

FrozenPretrainReport pretrain_frozen(SketchInpaintModel& model, const std::vector<InstanceSample>& corpus,
                                     const TrainConfig& config, std::ostream* log) {
    config.validate();
    if (corpus.empty()) {
        throw ValueError("pretrain_frozen: empty corpus");
    }
    FrozenPretrainReport report;
    std::vector<Grid> images;
    images.reserve(corpus.size());
    for (const InstanceSample& s : corpus) {
        images.push_back(s.image);
    }
    report.vae = model.vae().fit(images);
    if (config.base_pretrain_steps == 0) {
        return report;
    }

    std::vector<Grid> latents, texts;
    for (const InstanceSample& s : corpus) {
        latents.push_back(model.vae().encode(s.image));
        texts.push_back(model.text_embedder().encode(s.caption));
    }
    std::vector<Parameter*> base_params;
    for (Parameter& p : model.parameters().all()) {
        if (p.name.rfind("base.", 0) == 0) {
            base_params.push_back(&p);
        }
    }
    const UnfreezeGuard unfreeze(base_params);
    Adam adam(base_params, {config.base_pretrain_lr});
    const NoiseSchedule schedule = config.noise_schedule();
    Rng rng(mix_seed(config.base_pretrain_seed, 0x6261736570726574ULL));
    const int n = static_cast<int>(corpus.size());
    const Grid& null_text = model.text_embedder().null_embedding();
    for (int step = 1; step <= config.base_pretrain_steps; ++step) {
        std::vector<Grid> z0, text;
        std::vector<int> ts;
        for (int k = 0; k < config.base_pretrain_batch; ++k) {
            const auto j = static_cast<std::size_t>(uniform_int(rng, 0, n - 1));
            z0.push_back(latents[j]);
            text.push_back(uniform01(rng) < config.text_dropout ? null_text : texts[j]);
            ts.push_back(uniform_int(rng, 1, schedule.timesteps));
        }
        const Grid z = Grid::stack_batch(z0);
        const Grid eps = normal_grid(z.shape(), rng);
        const Grid z_t = forward_diffuse(z, ts, eps, schedule);
        for (Parameter* p : base_params) {
            p->var.zero_grad();
        }
        const ag::Var loss = ag::mse(
            model.base().forward(ag::constant(z_t), ts, ag::constant(Grid::stack_batch(text))), ag::constant(eps));
        const double value = loss.value()[0];
        if (!std::isfinite(value)) {
            throw TrainingError("base pretraining: non-finite loss at step " + std::to_string(step));
        }
        ag::backward(loss);
        adam.step();
        report.base_losses.push_back(value);
        if (log && step % config.log_every == 0) {
            *log << "base step " << step << " loss " << value << '\n';
        }
    }
    return report;
}

std::vector<FourTuple> load_manifest_tuples(const std::string& manifest_path) {
    const auto records = read_manifest(manifest_path);
    const std::string dir = fs::path(manifest_path).parent_path().string();
    std::vector<FourTuple> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.push_back(load_four_tuple(r, dir.empty() ? "." : dir));
    }
    return out;
}

TrainResult train(SketchInpaintModel& model, const std::vector<FourTuple>& tuples, const TrainConfig& config,
                  const TrainOptions& options) {
    config.validate();
    if (first_config_mismatch(config.model_config(), model.config()) != "") {
        throw ParameterError(first_config_mismatch(config.model_config(), model.config()),
                             "training configuration disagrees with the model");
    }
    if (tuples.empty()) {
        throw ValueError("train: empty dataset");
    }
    partition_parameters(model.parameters());
    if (!model.vae().fitted()) {
        throw ValueError("train: the VAE is not fitted; call fit_vae first");
    }
    TrainResult result;
    const auto samples = prepare_samples(model, tuples);
    const NoiseSchedule schedule = config.noise_schedule();
    const DropoutConfig dropout = config.dropout();
    Adam adam(model.parameters(), {config.learning_rate});
    Rng rng(config.seed);
    const int n = static_cast<int>(samples.size());

    auto save = [&](int step, const std::string& name) {
        std::ostringstream state;
        state << rng;
        const std::string path = (fs::path(options.out_dir) / name).string();
        save_checkpoint(path, model, {step, state.str(), serialize_config(config)});
        result.checkpoints.push_back(path);
    };
    if (!options.out_dir.empty()) {
        fs::create_directories(options.out_dir);
    }

    for (int step = 1; step <= config.steps; ++step) {
        std::vector<Grid> z0;
        std::vector<Conditioning> cond;
        std::vector<std::string> ids;
        for (int b = 0; b < config.batch_size; ++b) {
            const PreparedSample& s = samples[static_cast<std::size_t>(uniform_int(rng, 0, n - 1))];
            const MaskType type = draw_mask_type(rng, config.mask_mix);
            ++result.mask_type_counts[static_cast<std::size_t>(type)];
            z0.push_back(s.z0);
            cond.push_back(s.cond[static_cast<std::size_t>(type)]);
            ids.push_back(s.id);
        }
        TrainingBatch batch{Grid::stack_batch(z0), Conditioning::stack(cond), ids};
        model.parameters().zero_grad();
        const LossEvaluation ev = training_loss(model, batch, schedule, rng, dropout);
        const double loss = ev.loss.value()[0];
        if (!std::isfinite(loss)) {
            std::string joined;
            for (const auto& id : ids) {
                joined += (joined.empty() ? "" : ", ") + id;
            }
            if (!options.out_dir.empty()) {
                nlohmann::ordered_json dump;
                dump["step"] = step;
                dump["ids"] = ids;
                dump["timesteps"] = ev.timesteps;
                dump["loss"] = std::to_string(loss);
                std::ofstream(fs::path(options.out_dir) / "nan_batch.json") << dump.dump(2) << '\n';
            }
            throw TrainingError("non-finite loss at step " + std::to_string(step) + " on batch [" + joined + "]");
        }
        ag::backward(ev.loss);
        adam.set_learning_rate(config.learning_rate_at(step));
        adam.step();
        result.losses.push_back(loss);
        if (options.on_step) {
            options.on_step(step, loss);
        }
        if (options.log && step % config.log_every == 0) {
            *options.log << "step " << step << " loss " << loss << std::endl;
        }
        if (!options.out_dir.empty() && config.checkpoint_every > 0 && step % config.checkpoint_every == 0) {
            save(step, "checkpoint_step" + std::to_string(step) + ".bin");
        }
    }
    model.parameters().zero_grad();
    if (!options.out_dir.empty()) {
        save(config.steps, "checkpoint.bin");
    }
    return result;
}

}  // namespace sketchinpaint
