#include "sketchinpaint/evaluation.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sketchinpaint/datagen.hpp"
#include "sketchinpaint/errors.hpp"
#include "sketchinpaint/image_io.hpp"

namespace fs = std::filesystem;

namespace sketchinpaint {

std::vector<MetricsReport> evaluate(const SketchInpaintModel& model, const NoiseSchedule& schedule,
                                    const std::string& manifest_path, const InferenceOptions& options,
                                    bool whole_image) {
    const auto records = read_manifest(manifest_path);
    fs::path dir = fs::path(manifest_path).parent_path();
    if (dir.empty()) {
        dir = ".";
    }
    std::vector<MetricsReport> out;
    for (const auto& r : records) {
        const fs::path gt = dir / r.image;
        if (r.image.empty() || !fs::exists(gt)) {
            MetricsReport skipped;
            skipped.id = r.id;
            skipped.skipped = true;
            skipped.skip_reason = "missing ground truth";
            out.push_back(skipped);
            continue;
        }
        const FourTuple t = load_four_tuple(r, dir.string());
        InpaintInput in;
        in.image = t.masked_image;
        in.partial_mask = t.partial_mask;
        in.sketch = t.partial_sketch;
        in.caption = t.caption;
        const Grid pred = infer(model, schedule, in, options);
        out.push_back(compute_metrics(r.id, pred, t.image, t.partial_mask, whole_image));
    }
    return out;
}

namespace {

Grid channel_mean(const Grid& g) {
    Grid out(1, 1, g.h(), g.w());
    for (int c = 0; c < g.c(); ++c) {
        const double* p = g.plane(0, c);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] += p[i] / g.c();
        }
    }
    return out;
}

// vm (1, 1, h, w) times the channel mean of a per-channel vector (1, C, 1, 1).
Grid gated_mean(const Grid& vm, const Grid& per_channel) {
    double mean = 0.0;
    for (double v : per_channel.values()) {
        mean += v / static_cast<double>(per_channel.size());
    }
    Grid out = vm;
    for (double& v : out.values()) {
        v *= mean;
    }
    return out;
}

}  // namespace

std::vector<FeatureMap> dump_features(const SketchInpaintModel& model, const NoiseSchedule& schedule,
                                      const InpaintInput& input, const FeatureDumpOptions& options,
                                      const std::string& out_dir) {
    if (options.scale < 1 || options.scale > kNumScales) {
        throw ParameterError("scale", "must lie in 1..4");
    }
    const Conditioning cond = model.make_conditioning(std::span(&input, 1));
    const Grid z0 = model.vae().encode(input.image);
    Rng rng(options.seed);
    const Grid eps = normal_grid(z0.shape(), rng);
    const Grid z_t = forward_diffuse(z0, options.timestep, eps, schedule);
    ForwardTrace trace;
    {
        ag::NoGradGuard no_grad;
        const int ts[1] = {options.timestep};
        model.predict_noise(ag::constant(z_t), ts, cond, &trace);
    }
    const SbfiTrace& st = trace.sbfi[static_cast<std::size_t>(options.scale - 1)];

    std::vector<FeatureMap> maps;
    auto add = [&](const char* name, Grid values) {
        FeatureMap m;
        m.name = name;
        m.values = std::move(values);
        maps.push_back(std::move(m));
    };
    add("n_hat", channel_mean(st.n_hat.value()));
    add("s", channel_mean(st.s.value()));
    add("x", channel_mean(st.x.value()));
    add("vm", st.vm.value());
    add("vm_gamma", gated_mean(st.vm.value(), st.gamma.value()));
    add("vm_beta", gated_mean(st.vm.value(), st.beta.value()));
    add("x_hat", channel_mean(st.x_hat.value()));
    add("sn_hat", channel_mean(st.sn_hat.value()));

    double range = 0.0;
    for (const auto& m : maps) {
        if (m.name != "vm") {
            for (double v : m.values.values()) {
                range = std::max(range, std::abs(v));
            }
        }
    }
    fs::create_directories(out_dir);
    nlohmann::ordered_json index;
    index["scale"] = options.scale;
    index["timestep"] = options.timestep;
    index["seed"] = options.seed;
    index["maps"] = nlohmann::ordered_json::array();
    const std::string prefix = "scale" + std::to_string(options.scale) + "_";
    for (auto& m : maps) {
        Grid bytes = Grid::zeros_like(m.values);
        if (m.name == "vm") {
            m.zero_point = 0.0;
            m.scale = 1.0 / 255.0;
            for (std::size_t i = 0; i < bytes.size(); ++i) {
                bytes[i] = std::round(255.0 * m.values[i]);
            }
        } else {
            m.zero_point = 128.0;
            m.scale = range > 0.0 ? range / 127.0 : 0.0;
            for (std::size_t i = 0; i < bytes.size(); ++i) {
                bytes[i] = 128.0 + (range > 0.0 ? std::round(127.0 * m.values[i] / range) : 0.0);
            }
        }
        m.file = prefix + m.name + ".png";
        write_png_bytes((fs::path(out_dir) / m.file).string(), bytes);
        nlohmann::ordered_json entry;
        entry["name"] = m.name;
        entry["file"] = m.file;
        entry["zero_point"] = m.zero_point;
        entry["scale"] = m.scale;
        index["maps"].push_back(entry);
    }
    std::ofstream(fs::path(out_dir) / "features.json") << index.dump(2) << '\n';
    return maps;
}

}  // namespace sketchinpaint
