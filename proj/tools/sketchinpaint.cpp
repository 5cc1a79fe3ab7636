#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "sketchinpaint/checkpoint.hpp"
#include "sketchinpaint/errors.hpp"
#include "sketchinpaint/evaluation.hpp"
#include "sketchinpaint/image_io.hpp"
#include "sketchinpaint/training.hpp"

namespace fs = std::filesystem;
using namespace sketchinpaint;

namespace {

std::string flag_name(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return "--" + key;
}

struct InputFiles {
    std::string image, mask, sketch, caption;
};

void add_input_options(CLI::App* cmd, InputFiles& in) {
    cmd->add_option("--image", in.image, "Input image PNG")->required();
    cmd->add_option("--mask", in.mask, "Partial mask PNG (white = visible)")->required();
    cmd->add_option("--sketch", in.sketch, "Sketch PNG; omitted means a black sketch");
    cmd->add_option("--caption", in.caption, "Caption text");
}

InpaintInput load_input(const InputFiles& files, const SketchInpaintModel& model) {
    InpaintInput in;
    in.image = read_png(files.image, model.config().image_channels);
    in.partial_mask = read_png(files.mask, 1);
    for (double& v : in.partial_mask.values()) {
        v = v > 0.5 ? 1.0 : 0.0;
    }
    in.sketch = files.sketch.empty() ? Grid(in.partial_mask.shape()) : read_png(files.sketch, 1);
    in.caption = files.caption;
    return in;
}

NoiseSchedule schedule_from(const LoadedCheckpoint& ckpt) {
    TrainConfig cfg;
    if (!ckpt.meta.config_snapshot.empty()) {
        cfg = parse_config(ckpt.meta.config_snapshot, "checkpoint config");
    }
    return cfg.noise_schedule();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sketch-guided inpainting: data preparation, training, inference and evaluation"};
    app.require_subcommand(1);
    std::string device;
    app.add_option("--device", device, "Compute device (default from SKETCHINPAINT_DEVICE, else cpu)");

    // synth-corpus
    auto* synth = app.add_subcommand("synth-corpus", "Generate a synthetic instance-mask corpus");
    int synth_n = 16, synth_canvas = 128;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    synth->add_option("--n", synth_n, "Number of samples");
    synth->add_option("--canvas", synth_canvas, "Canvas side in pixels");
    synth->add_option("--seed", synth_seed, "Random seed");
    synth->add_option("--out", synth_out, "Output corpus directory")->required();

    // datagen
    auto* datagen = app.add_subcommand("datagen", "Build four-tuples and a manifest from a corpus");
    std::string dg_corpus, dg_out;
    std::uint64_t dg_seed = 0;
    int dg_per_image = 1;
    DatagenConfig dg_config;
    datagen->add_option("--corpus", dg_corpus, "Corpus directory (images/, masks/, captions.txt)")->required();
    datagen->add_option("--out", dg_out, "Output directory for samples/ and manifest.jsonl")->required();
    datagen->add_option("--seed", dg_seed, "Base seed");
    datagen->add_option("--per-image", dg_per_image, "Four-tuples per instance");
    datagen->add_option("--dilation-levels", dg_config.dilation_levels, "D");
    datagen->add_option("--blur-levels", dg_config.blur_levels, "S");
    datagen->add_option("--sketch-type", dg_config.sketch_type, "Registered sketch generator");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the adapters on a manifest");
    std::string tr_manifest, tr_out, tr_config_file, tr_init;
    std::map<std::string, std::string> tr_flags;
    train_cmd->add_option("--manifest", tr_manifest, "manifest.jsonl")->required();
    train_cmd->add_option("--out", tr_out, "Output directory for checkpoints and the log")->required();
    train_cmd->add_option("--config", tr_config_file, "Key-value config file; flags override it");
    train_cmd->add_option("--init", tr_init, "Start from this checkpoint instead of a fresh model");
    for (const std::string& key : TrainConfig::keys()) {
        train_cmd->add_option_function<std::string>(
            flag_name(key), [&tr_flags, key](const std::string& v) { tr_flags[key] = v; }, "TrainConfig." + key);
    }

    // infer
    auto* infer_cmd = app.add_subcommand("infer", "Inpaint one image");
    std::string in_ckpt, in_out;
    InputFiles in_files;
    InferenceOptions in_opts;
    infer_cmd->add_option("--checkpoint", in_ckpt, "Checkpoint file")->required();
    add_input_options(infer_cmd, in_files);
    infer_cmd->add_option("--steps", in_opts.steps, "DDIM steps");
    infer_cmd->add_option("--cfg", in_opts.cfg_scale, "Classifier-free guidance scale");
    infer_cmd->add_option("--seed", in_opts.seed, "Sampling seed");
    infer_cmd->add_option("--out", in_out, "Output PNG")->required();

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Score inference against manifest ground truth");
    std::string ev_ckpt, ev_manifest, ev_out;
    InferenceOptions ev_opts;
    bool ev_whole = false;
    eval_cmd->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
    eval_cmd->add_option("--manifest", ev_manifest, "manifest.jsonl")->required();
    eval_cmd->add_option("--out", ev_out, "Report (JSON lines); stdout when omitted");
    eval_cmd->add_option("--steps", ev_opts.steps, "DDIM steps");
    eval_cmd->add_option("--cfg", ev_opts.cfg_scale, "Classifier-free guidance scale");
    eval_cmd->add_option("--seed", ev_opts.seed, "Sampling seed");
    eval_cmd->add_flag("--whole-image", ev_whole, "Score every pixel instead of the corrupted region");

    // dump-features
    auto* dump_cmd = app.add_subcommand("dump-features", "Export channel-averaged SBFI feature maps");
    std::string df_ckpt, df_out;
    InputFiles df_files;
    FeatureDumpOptions df_opts;
    dump_cmd->add_option("--checkpoint", df_ckpt, "Checkpoint file")->required();
    add_input_options(dump_cmd, df_files);
    dump_cmd->add_option("--scale", df_opts.scale, "Encoder scale 1..4");
    dump_cmd->add_option("--timestep", df_opts.timestep, "Diffusion timestep");
    dump_cmd->add_option("--seed", df_opts.seed, "Noise seed");
    dump_cmd->add_option("--out", df_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (device.empty()) {
            device = default_device();
        } else if (device != "cpu") {
            throw ParameterError("device", "unsupported device '" + device + "' (only cpu is available)");
        }

        if (synth->parsed()) {
            Rng rng(synth_seed);
            std::vector<InstanceSample> samples;
            for (auto& s : synth_corpus(synth_n, synth_canvas, rng)) {
                samples.push_back(std::move(s.sample));
            }
            write_corpus(synth_out, samples);
            std::cout << "wrote " << samples.size() << " samples to " << synth_out << '\n';
        } else if (datagen->parsed()) {
            const auto corpus = read_corpus(dg_corpus);
            fs::create_directories(dg_out);
            std::ofstream manifest(fs::path(dg_out) / "manifest.jsonl");
            int written = 0, skipped = 0;
            for (const auto& sample : corpus) {
                for (int k = 0; k < dg_per_image; ++k) {
                    try {
                        FourTuple t = build_four_tuple(sample, dg_config, dg_seed + static_cast<std::uint64_t>(k));
                        if (dg_per_image > 1) {
                            t.id += "_" + std::to_string(k);
                        }
                        manifest << manifest_line(write_four_tuple(t, dg_out)) << '\n';
                        ++written;
                    } catch (const ValueError& e) {
                        std::cerr << "skipping " << sample.id << ": " << e.what() << '\n';
                        ++skipped;
                    }
                }
            }
            std::cout << "wrote " << written << " four-tuples (" << skipped << " skipped) to " << dg_out << '\n';
        } else if (train_cmd->parsed()) {
            TrainConfig cfg = tr_config_file.empty() ? TrainConfig{} : load_config(tr_config_file);
            for (const auto& [key, value] : tr_flags) {
                cfg.set(key, value);
            }
            cfg.validate();
            const auto tuples = load_manifest_tuples(tr_manifest);
            std::unique_ptr<SketchInpaintModel> model;
            if (tr_init.empty()) {
                model = std::make_unique<SketchInpaintModel>(cfg.model_config());
            } else {
                model = load_checkpoint(tr_init, cfg.model_config()).model;
            }
            fs::create_directories(tr_out);
            std::ofstream(fs::path(tr_out) / "train_config.txt") << serialize_config(cfg);
            if (tr_init.empty()) {
                const auto rep = pretrain_frozen(*model, pretrain_corpus(cfg), cfg, &std::cout);
                std::cout << "vae fit: train " << rep.vae.train_error << " validation " << rep.vae.validation_error
                          << '\n';
            } else if (!model->vae().fitted()) {
                throw ValueError("--init checkpoint has no fitted VAE");
            }
            TrainOptions opts;
            opts.out_dir = tr_out;
            opts.log = &std::cout;
            const auto result = train(*model, tuples, cfg, opts);
            std::cout << "final checkpoint " << result.checkpoints.back() << '\n';
        } else if (infer_cmd->parsed()) {
            const auto ckpt = load_checkpoint(in_ckpt);
            const InpaintInput in = load_input(in_files, *ckpt.model);
            write_png(in_out, infer(*ckpt.model, schedule_from(ckpt), in, in_opts));
            std::cout << "wrote " << in_out << '\n';
        } else if (eval_cmd->parsed()) {
            const auto ckpt = load_checkpoint(ev_ckpt);
            const auto reports = evaluate(*ckpt.model, schedule_from(ckpt), ev_manifest, ev_opts, ev_whole);
            std::ofstream file;
            std::ostream* out = &std::cout;
            if (!ev_out.empty()) {
                file.open(ev_out);
                out = &file;
            }
            for (const auto& r : reports) {
                *out << report_line(r) << '\n';
            }
            *out << summary_line(reports) << '\n';
        } else if (dump_cmd->parsed()) {
            const auto ckpt = load_checkpoint(df_ckpt);
            const InpaintInput in = load_input(df_files, *ckpt.model);
            const auto maps = dump_features(*ckpt.model, schedule_from(ckpt), in, df_opts, df_out);
            std::cout << "wrote " << maps.size() << " maps to " << df_out << '\n';
        }
    } catch (const IngestionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
