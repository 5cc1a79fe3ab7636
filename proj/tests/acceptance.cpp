// Acceptance suite: one PASS/FAIL line per criterion. Optional arguments select
// criteria by number; criterion 6 reuses the model trained for criterion 5.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <set>
#include <string>
#include <unistd.h>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "fixtures.hpp"
#include "sketchinpaint/checkpoint.hpp"
#include "sketchinpaint/image_io.hpp"
#include "sketchinpaint/inference.hpp"
#include "sketchinpaint/masks.hpp"
#include "sketchinpaint/metrics.hpp"
#include "sketchinpaint/sbfi.hpp"
#include "sketchinpaint/training.hpp"

using namespace sketchinpaint;
using namespace fixtures;
using test_util::Probe;
using test_util::random_grid;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

Parameter& param(SketchInpaintModel& model, const std::string& name) {
    Parameter* p = model.parameters().find(name);
    if (!p) throw std::runtime_error("no parameter " + name);
    return *p;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Group norm with the standard deviation floored, computed directly.
Grid group_norm_oracle(const Grid& x, int groups, double floor) {
    Grid out(x.shape());
    const int per = x.c() / groups;
    const int hw = x.h() * x.w();
    for (int n = 0; n < x.n(); ++n) {
        for (int g = 0; g < groups; ++g) {
            double mean = 0.0, var = 0.0;
            for (int c = g * per; c < (g + 1) * per; ++c) {
                for (int k = 0; k < hw; ++k) mean += x.plane(n, c)[k];
            }
            mean /= per * hw;
            for (int c = g * per; c < (g + 1) * per; ++c) {
                for (int k = 0; k < hw; ++k) var += (x.plane(n, c)[k] - mean) * (x.plane(n, c)[k] - mean);
            }
            const double sd = std::max(std::sqrt(var / (per * hw)), floor);
            for (int c = g * per; c < (g + 1) * per; ++c) {
                for (int k = 0; k < hw; ++k) out.plane(n, c)[k] = (x.plane(n, c)[k] - mean) / sd;
            }
        }
    }
    return out;
}

// 1. The assembled toy model predicts the same noise as its frozen base at init.
void identity_at_init() {
    const auto t0 = Clock::now();
    TrainConfig cfg;
    SketchInpaintModel model(cfg.model_config());
    Rng rng(101);
    const auto corpus = synth_corpus(8, model.config().image_size(), rng);
    std::vector<Grid> images;
    for (const auto& s : corpus) images.push_back(s.sample.image);
    model.vae().fit(images);
    double worst = 0.0;
    for (int batch = 0; batch < 5; ++batch) {
        const Conditioning cond = random_conditioning(model, 10, rng);
        const ag::Var z = ag::constant(random_grid({10, 4, 16, 16}, rng));
        const auto ts = random_timesteps(10, rng);
        ag::NoGradGuard guard;
        worst = std::max(worst, max_rel_error(model.predict_noise(z, ts, cond).value(), model.base_noise(z, ts, cond).value()));
    }
    const double secs = seconds_since(t0);
    report(1, worst <= 1e-5 && secs < 60,
           fmt("identity at init: max rel error %.3g over 50 inputs (limit 1e-5), %.1f s (limit 60)", worst, secs));
}

// 2. Central differences against analytic gradients on adapter parameters.
void gradient_correctness() {
    const auto t0 = Clock::now();
    SketchInpaintModel model(small_config(21));
    Rng rng(202);
    randomize_trainable(model, rng, 0.2);
    const SbfiBlock& block = model.sbfi(2);
    const int c = model.config().unet.channels(2);
    const ag::Var n = ag::constant(random_grid({2, c, 4, 4}, rng));
    const ag::Var s = ag::constant(random_grid({2, c, 4, 4}, rng));
    const ag::Var vm = ag::constant(block.fuse_context(n, s).vm.value());
    const Conditioning cond = random_conditioning(model, 2, rng);
    const ag::Var z = ag::constant(random_grid({2, 4, 8, 8}, rng));
    const std::vector<int> ts{120, 780};

    const Probe fuse([&] { return block.fuse_context(n, s).vm; }, rng);
    const Probe affine([&] { return block.affine_modulate(n, s, vm); }, rng);
    const Probe full([&] { return model.predict_noise(z, ts, cond); }, rng);
    struct Target {
        const Probe* probe;
        std::string name;
    };
    const std::vector<Target> targets{
        {&fuse, "sbfi.2.fuse_zero.weight"},  {&fuse, "sbfi.2.fuse_zero.bias"},  {&fuse, "sbfi.2.vm_conv.weight"},
        {&fuse, "sbfi.2.vm_conv.bias"},      {&fuse, "sbfi.2.vm_norm.gamma"},   {&fuse, "sbfi.2.vm_norm.beta"},
        {&affine, "sbfi.2.gamma_zero.weight"}, {&affine, "sbfi.2.gamma_zero.bias"},
        {&affine, "sbfi.2.beta_zero.weight"},  {&affine, "sbfi.2.beta_zero.bias"},
        {&full, "sbfi.1.fuse_zero.weight"},  {&full, "sbfi.3.gamma_zero.weight"}, {&full, "sbfi.4.beta_zero.bias"},
        {&full, "mie.enc1.proj.weight"},     {&full, "mie.enc2.proj.weight"},     {&full, "mie.enc3.proj.bias"},
        {&full, "mie.enc4.proj.weight"},
    };
    const int per_target = 8;
    int coords = 0;
    double worst = 0.0;
    std::string worst_name;
    for (const Target& t : targets) {
        Parameter& p = param(model, t.name);
        const double e = test_util::check_grad(*t.probe, p.var, rng, per_target, 1e-4);
        coords += std::min<int>(per_target, static_cast<int>(p.var.value().size()));
        if (e >= worst) {
            worst = e;
            worst_name = t.name;
        }
    }
    const double secs = seconds_since(t0);
    report(2, coords >= 100 && worst <= 1e-3 && secs < 300,
           fmt("gradients: %d coordinates, max rel error %.3g at %s (limit 1e-3), %.1f s (limit 300)", coords, worst,
               worst_name.c_str(), secs));
}

// 3. Algebra of the sketch-conditioned affine transform and GN statistics.
void affine_algebra() {
    Rng rng(303);
    SketchInpaintModel model(small_config(31));
    const SbfiBlock& block = model.sbfi(1);
    const int c = model.config().unet.channels(1);
    const int g = block.groups();
    const ag::Var x = ag::constant(random_grid({2, c, 8, 8}, rng, 3.0));
    const ag::Var s = ag::constant(random_grid({2, c, 8, 8}, rng));
    const ag::Var gamma = ag::constant(random_grid({2, c, 1, 1}, rng));
    const ag::Var beta = ag::constant(random_grid({2, c, 1, 1}, rng));
    auto all_zero = [](const Grid& v) { return std::all_of(v.values().begin(), v.values().end(), [](double a) { return a == 0.0; }); };

    const bool zero_init = all_zero(block.affine_modulate(x, s, ag::constant(Grid(2, 1, 8, 8, 0.6))).value());
    const bool zero_affine = all_zero(
        sketch_affine(x, ag::constant(Grid(2, c, 1, 1)), ag::constant(Grid(2, c, 1, 1)), ag::constant(Grid(2, 1, 8, 8, 0.6)), g).value());
    const bool zero_gate = all_zero(sketch_affine(x, gamma, beta, ag::constant(Grid(2, 1, 8, 8)), g).value());
    const Grid normalized = sketch_affine(x, ag::constant(Grid(2, c, 1, 1, 1.0)), ag::constant(Grid(2, c, 1, 1)),
                                          ag::constant(Grid(2, 1, 8, 8, 1.0)), g).value();
    const double gn_err = max_rel_error(normalized, group_norm_oracle(x.value(), g, 1e-5));

    double worst_mean = 0.0, worst_var = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Grid in = random_grid({1, c, 4, 4}, rng, 0.01 + 10.0 * uniform01(rng));
        for (double& v : in.values()) v += 5.0 * (uniform01(rng) - 0.5);
        const Grid t = sketch_affine(ag::constant(in), ag::constant(Grid(1, c, 1, 1, 1.0)), ag::constant(Grid(1, c, 1, 1)),
                                     ag::constant(Grid(1, 1, 4, 4, 1.0)), g).value();
        const int per = c / g;
        for (int grp = 0; grp < g; ++grp) {
            double mean = 0.0, sq = 0.0;
            for (int ch = grp * per; ch < (grp + 1) * per; ++ch) {
                for (int k = 0; k < 16; ++k) mean += t.plane(0, ch)[k];
            }
            mean /= per * 16;
            for (int ch = grp * per; ch < (grp + 1) * per; ++ch) {
                for (int k = 0; k < 16; ++k) sq += (t.plane(0, ch)[k] - mean) * (t.plane(0, ch)[k] - mean);
            }
            worst_mean = std::max(worst_mean, std::abs(mean));
            worst_var = std::max(worst_var, std::abs(sq / (per * 16) - 1.0));
        }
    }
    report(3, zero_init && zero_affine && zero_gate && gn_err <= 1e-12 && worst_mean < 1e-5 && worst_var < 1e-3,
           fmt("affine algebra: zero-init %s, zero-affine %s, vm=0 %s, identity-affine vs GN %.3g; "
               "GN |mean| %.3g (limit 1e-5), |var-1| %.3g (limit 1e-3)",
               zero_init ? "ok" : "bad", zero_affine ? "ok" : "bad", zero_gate ? "ok" : "bad", gn_err, worst_mean,
               worst_var));
}

// 4. Partial-mask generation bounds over synthetic instances.
void datagen_bounds() {
    const auto t0 = Clock::now();
    Rng rng(404);
    const auto corpus = synth_corpus(20, 128, rng);
    const DatagenConfig cfg;
    double min_cov = 1.0, max_cov = 0.0, min_iou = 1.0;
    int masks = 0, ladder_violations = 0, blend_violations = 0, support_violations = 0;
    for (const SynthSample& sample : corpus) {
        const Grid& m0 = sample.sample.instance_mask;
        std::vector<Grid> ladder{m0};
        for (int d = 1; d <= cfg.dilation_levels; ++d) {
            ladder.push_back(dilate_mask(m0, d, cfg.dilation_levels));
            if (!support_subset(ladder[d - 1], ladder[d])) ++ladder_violations;
        }
        min_iou = std::min(min_iou, mask_iou(ladder.back(), bbox_mask(m0)));
        for (int d = 0; d < cfg.dilation_levels; ++d) {
            if (!(blend_masks(ladder[d], ladder[d + 1], 0, cfg.blur_levels, blur_kernel(0)) == ladder[d])) ++blend_violations;
            if (!(blend_masks(ladder[d], ladder[d + 1], cfg.blur_levels, cfg.blur_levels, blur_kernel(cfg.blur_levels)) ==
                  ladder[d + 1])) {
                ++blend_violations;
            }
        }
        for (int k = 0; k < 50; ++k) {
            const FourTuple t = build_four_tuple(sample.sample, cfg, static_cast<std::uint64_t>(k));
            ++masks;
            min_cov = std::min(min_cov, t.provenance.coverage);
            max_cov = std::max(max_cov, t.provenance.coverage);
            for (std::size_t i = 0; i < t.partial_sketch.size(); ++i) {
                const bool expected = t.partial_mask[i] == 0.0 && m0[i] != 0.0 && t.sketch[i] != 0.0;
                if ((t.partial_sketch[i] != 0.0) != expected) ++support_violations;
            }
        }
    }
    const double secs = seconds_since(t0);
    report(4,
           min_cov >= 0.50 && max_cov <= 0.61 && ladder_violations == 0 && min_iou >= 0.95 && blend_violations == 0 &&
               support_violations == 0 && secs < 180,
           fmt("datagen: %d masks, coverage [%.4f, %.4f] (limit [0.50, 0.61]), ladder violations %d, min d=D IoU %.4f "
               "(limit 0.95), blend endpoint mismatches %d, support violations %d, %.1f s (limit 180)",
               masks, min_cov, max_cov, ladder_violations, min_iou, blend_violations, support_violations, secs));
}

struct ToyRun {
    std::unique_ptr<SketchInpaintModel> model;
    std::vector<FourTuple> tuples;
    TrainConfig config;
    std::vector<std::pair<std::string, Grid>> frozen_before;
};

// 5. Toy conditioning efficacy: frozen components prepared once, then 2000 adapter steps.
ToyRun toy_efficacy() {
    const auto t0 = Clock::now();
    ToyRun run;
    run.config.learning_rate = 1e-3;
    run.config.steps = 2000;
    run.config.seed = 3;
    run.config.lr_decay = "cosine";
    Rng rng(11);
    for (const auto& s : synth_corpus(16, run.config.model_config().image_size(), rng)) {
        run.tuples.push_back(build_four_tuple(s.sample, DatagenConfig{}, 5));
    }
    run.model = std::make_unique<SketchInpaintModel>(run.config.model_config());
    SketchInpaintModel& model = *run.model;
    pretrain_frozen(model, pretrain_corpus(run.config), run.config);
    const double pretrain_secs = seconds_since(t0);
    for (const Parameter& p : model.parameters().all()) {
        if (p.group == ParamGroup::frozen) run.frozen_before.emplace_back(p.name, p.var.value());
    }

    const NoiseSchedule schedule = run.config.noise_schedule();
    const auto samples = prepare_samples(model, run.tuples);
    const double loss0 = evaluation_loss(model, samples, schedule, 77);
    const TrainResult result = train(model, run.tuples, run.config);
    const double loss1 = evaluation_loss(model, samples, schedule, 77);
    auto window_mean = [&](std::size_t begin) {
        double sum = 0.0;
        for (std::size_t i = begin; i < begin + 50; ++i) sum += result.losses[i];
        return sum / 50;
    };
    const double first = window_mean(0), last = window_mean(result.losses.size() - 50);

    int wins = 0;
    for (const FourTuple& t : run.tuples) {
        InpaintInput in = training_input(t, MaskType::partial);
        in.image = t.masked_image;
        const InferenceOptions io{50, 7.5, 1};
        const double with_sketch = masked_l2(infer(model, schedule, in, io), t.image, t.partial_mask);
        in.sketch.fill(0.0);
        const double black = masked_l2(infer(model, schedule, in, io), t.image, t.partial_mask);
        wins += with_sketch < black;
    }
    const double ratio = loss1 / loss0;
    const double secs = seconds_since(t0);
    report(5, ratio <= 0.20 && wins >= 12 && secs < 900,
           fmt("toy efficacy: (a) loss %.4f -> %.4f, ratio %.3f (limit 0.20) [batch loss means %.4f -> %.4f]; "
               "(b) sketch beats black sketch on %d/16 (limit 12); %.0f s incl. %.0f s frozen pretraining (limit 900)",
               loss0, loss1, ratio, first, last, wins, secs, pretrain_secs));
    return run;
}

// 6. Frozen parameters untouched, reproducible inference, bitwise checkpoints.
void freeze_and_reproducibility(const ToyRun& run) {
    const SketchInpaintModel& model = *run.model;
    int changed = 0;
    std::size_t k = 0;
    for (const Parameter& p : model.parameters().all()) {
        if (p.group != ParamGroup::frozen) continue;
        if (k >= run.frozen_before.size() || run.frozen_before[k].first != p.name ||
            !(run.frozen_before[k].second == p.var.value())) {
            ++changed;
        }
        ++k;
    }

    const fs::path dir = fs::temp_directory_path() / ("sketchinpaint_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const NoiseSchedule schedule = run.config.noise_schedule();
    InpaintInput in = training_input(run.tuples[0], MaskType::partial);
    in.image = run.tuples[0].masked_image;
    const InferenceOptions io{50, 7.5, 9};
    write_png((dir / "a.png").string(), infer(model, schedule, in, io));
    write_png((dir / "b.png").string(), infer(model, schedule, in, io));
    const bool same_image = read_bytes(dir / "a.png") == read_bytes(dir / "b.png");

    save_checkpoint((dir / "c1.bin").string(), model, {run.config.steps, "", serialize_config(run.config)});
    const LoadedCheckpoint loaded = load_checkpoint((dir / "c1.bin").string(), model.config());
    int mismatched = 0;
    for (std::size_t i = 0; i < model.parameters().all().size(); ++i) {
        const Parameter& a = model.parameters().all()[i];
        const Parameter& b = loaded.model->parameters().all()[i];
        if (a.name != b.name || a.group != b.group || !(a.var.value() == b.var.value())) ++mismatched;
    }
    save_checkpoint((dir / "c2.bin").string(), *loaded.model, loaded.meta);
    const bool same_file = read_bytes(dir / "c1.bin") == read_bytes(dir / "c2.bin");
    fs::remove_all(dir);
    report(6, changed == 0 && k == run.frozen_before.size() && same_image && mismatched == 0 && same_file,
           fmt("freeze and reproducibility: %zu frozen tensors, %d changed; repeated inference %s; checkpoint "
               "round trip %d mismatched tensors, re-saved file %s",
               run.frozen_before.size(), changed, same_image ? "byte-identical" : "differs", mismatched,
               same_file ? "byte-identical" : "differs"));
}

// 7. Goodness of fit of the mask-type mix.
void mask_mix() {
    Rng rng(707);
    const std::array<double, 3> mix{0.6, 0.3, 0.1};
    std::array<int, 3> counts{};
    const int n = 10000;
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(draw_mask_type(rng, mix))];
    double chi2 = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double e = mix[k] * n;
        chi2 += (counts[k] - e) * (counts[k] - e) / e;
    }
    const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(2.0), chi2));
    report(7, p > 0.01,
           fmt("mask mix: counts %d/%d/%d, chi-square %.3f, p %.4f (limit > 0.01)", counts[0], counts[1], counts[2],
               chi2, p));
}

// 8. Visible pixels survive inference bit for bit.
void visible_fidelity() {
    SketchInpaintModel model(small_config(81));
    Rng rng(808);
    randomize_trainable(model, rng, 0.2);
    const NoiseSchedule schedule = build_schedule(1000, 1e-4, 2e-2, ScheduleKind::linear);
    long long checked = 0, mismatched = 0;
    for (int call = 0; call < 100; ++call) {
        const InpaintInput in = random_input(model.config(), rng, call % 3 ? "a green bird" : "");
        const InferenceOptions io{uniform_int(rng, 2, 6), 1.0 + 9.0 * uniform01(rng), static_cast<std::uint64_t>(call)};
        const Grid out = infer(model, schedule, in, io);
        for (int c = 0; c < out.c(); ++c) {
            for (int i = 0; i < out.h() * out.w(); ++i) {
                if (in.partial_mask[static_cast<std::size_t>(i)] == 0.0) continue;
                ++checked;
                if (out.plane(0, c)[i] != in.image.plane(0, c)[i]) ++mismatched;
            }
        }
    }
    report(8, mismatched == 0,
           fmt("visible fidelity: 100 calls, %lld visible values, %lld differ", checked, mismatched));
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };
    try {
        if (wanted(1)) identity_at_init();
        if (wanted(2)) gradient_correctness();
        if (wanted(3)) affine_algebra();
        if (wanted(4)) datagen_bounds();
        if (wanted(5) || wanted(6)) {
            const ToyRun run = toy_efficacy();
            if (wanted(6)) freeze_and_reproducibility(run);
        }
        if (wanted(7)) mask_mix();
        if (wanted(8)) visible_fidelity();
    } catch (const std::exception& e) {
        std::printf("acceptance aborted: %s\n", e.what());
        return 2;
    }
    return failures == 0 ? 0 : 1;
}
