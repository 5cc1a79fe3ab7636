#include "sketchinpaint/train_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "sketchinpaint/errors.hpp"

namespace sketchinpaint {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) {
        throw ParameterError(key, "expected a number, got '" + v + "'");
    }
    return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
    Int out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ParameterError(key, "expected an integer, got '" + v + "'");
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ParameterError(key, "expected true or false, got '" + v + "'");
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0 && std::isfinite(learning_rate))) {
        throw ParameterError("learning_rate", "must be positive");
    }
    if (lr_decay != "constant" && lr_decay != "cosine") {
        throw ParameterError("lr_decay", "expected constant or cosine, got '" + lr_decay + "'");
    }
    if (batch_size < 1) {
        throw ParameterError("batch_size", "must be >= 1");
    }
    if (steps < 0) {
        throw ParameterError("steps", "must be >= 0");
    }
    double sum = 0.0;
    for (double p : mask_mix) {
        if (!(p >= 0.0)) {
            throw ParameterError("mask_mix", "probabilities must be non-negative");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ParameterError("mask_mix", "probabilities sum to " + fmt_double(sum) + ", expected 1");
    }
    if (!(text_dropout >= 0.0 && text_dropout <= 1.0)) {
        throw ParameterError("text_dropout", "must lie in [0, 1]");
    }
    if (!(sketch_dropout >= 0.0 && sketch_dropout <= 1.0)) {
        throw ParameterError("sketch_dropout", "must lie in [0, 1]");
    }
    if (log_every < 1) {
        throw ParameterError("log_every", "must be >= 1");
    }
    if (checkpoint_every < 0) {
        throw ParameterError("checkpoint_every", "must be >= 0");
    }
    if (base_pretrain_steps < 0) {
        throw ParameterError("base_pretrain_steps", "must be >= 0");
    }
    if (base_pretrain_batch < 1) {
        throw ParameterError("base_pretrain_batch", "must be >= 1");
    }
    if (!(base_pretrain_lr > 0.0 && std::isfinite(base_pretrain_lr))) {
        throw ParameterError("base_pretrain_lr", "must be positive");
    }
    if (base_pretrain_images < 1) {
        throw ParameterError("base_pretrain_images", "must be >= 1");
    }
    parse_schedule_kind(schedule);
    model_config().validate();
}

ModelConfig TrainConfig::model_config() const {
    ModelConfig m;
    m.unet.latent_size = latent_size;
    m.unet.base_width = base_width;
    m.init_seed = init_seed;
    if (identity_vae) {
        m.vae_mode = VaeMode::identity;
        m.vae_factor = 1;
        m.image_channels = m.unet.latent_channels;
    }
    return m;
}

NoiseSchedule TrainConfig::noise_schedule() const {
    return build_schedule(timesteps, beta_start, beta_end, parse_schedule_kind(schedule));
}

DropoutConfig TrainConfig::dropout() const {
    return {text_dropout, sketch_dropout};
}

double TrainConfig::learning_rate_at(int step) const {
    if (lr_decay == "constant" || steps <= 0) {
        return learning_rate;
    }
    return 0.5 * learning_rate * (1.0 + std::cos(std::numbers::pi * (step - 1) / steps));
}

std::vector<std::string> TrainConfig::keys() {
    return {"learning_rate", "lr_decay", "batch_size",  "steps",       "mask_mix",   "text_dropout", "sketch_dropout",
            "seed",          "log_every",   "checkpoint_every", "timesteps", "beta_start", "beta_end",
            "schedule",      "latent_size", "base_width",  "identity_vae", "init_seed", "base_pretrain_steps",
            "base_pretrain_batch", "base_pretrain_lr", "base_pretrain_images", "base_pretrain_seed"};
}

void TrainConfig::set(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (key == "learning_rate") learning_rate = to_double(key, v);
    else if (key == "batch_size") batch_size = to_int<int>(key, v);
    else if (key == "steps") steps = to_int<int>(key, v);
    else if (key == "mask_mix") {
        std::array<double, 3> mix{};
        std::stringstream ss(v);
        std::string part;
        std::size_t i = 0;
        while (std::getline(ss, part, ',')) {
            if (i == 3) {
                throw ParameterError(key, "expected three comma-separated probabilities");
            }
            mix[i++] = to_double(key, trim(part));
        }
        if (i != 3) {
            throw ParameterError(key, "expected three comma-separated probabilities");
        }
        mask_mix = mix;
    }
    else if (key == "text_dropout") text_dropout = to_double(key, v);
    else if (key == "lr_decay") lr_decay = v;
    else if (key == "sketch_dropout") sketch_dropout = to_double(key, v);
    else if (key == "seed") seed = to_int<std::uint64_t>(key, v);
    else if (key == "log_every") log_every = to_int<int>(key, v);
    else if (key == "checkpoint_every") checkpoint_every = to_int<int>(key, v);
    else if (key == "timesteps") timesteps = to_int<int>(key, v);
    else if (key == "beta_start") beta_start = to_double(key, v);
    else if (key == "beta_end") beta_end = to_double(key, v);
    else if (key == "schedule") schedule = v;
    else if (key == "latent_size") latent_size = to_int<int>(key, v);
    else if (key == "base_width") base_width = to_int<int>(key, v);
    else if (key == "identity_vae") identity_vae = to_bool(key, v);
    else if (key == "init_seed") init_seed = to_int<std::uint64_t>(key, v);
    else if (key == "base_pretrain_steps") base_pretrain_steps = to_int<int>(key, v);
    else if (key == "base_pretrain_batch") base_pretrain_batch = to_int<int>(key, v);
    else if (key == "base_pretrain_lr") base_pretrain_lr = to_double(key, v);
    else if (key == "base_pretrain_images") base_pretrain_images = to_int<int>(key, v);
    else if (key == "base_pretrain_seed") base_pretrain_seed = to_int<std::uint64_t>(key, v);
    else throw ParameterError(key, "unknown configuration key");
}

std::string serialize_config(const TrainConfig& c) {
    std::ostringstream out;
    out << "learning_rate = " << fmt_double(c.learning_rate) << '\n';
    out << "lr_decay = " << c.lr_decay << '\n';
    out << "batch_size = " << c.batch_size << '\n';
    out << "steps = " << c.steps << '\n';
    out << "mask_mix = " << fmt_double(c.mask_mix[0]) << ", " << fmt_double(c.mask_mix[1]) << ", "
        << fmt_double(c.mask_mix[2]) << '\n';
    out << "text_dropout = " << fmt_double(c.text_dropout) << '\n';
    out << "sketch_dropout = " << fmt_double(c.sketch_dropout) << '\n';
    out << "seed = " << c.seed << '\n';
    out << "log_every = " << c.log_every << '\n';
    out << "checkpoint_every = " << c.checkpoint_every << '\n';
    out << "timesteps = " << c.timesteps << '\n';
    out << "beta_start = " << fmt_double(c.beta_start) << '\n';
    out << "beta_end = " << fmt_double(c.beta_end) << '\n';
    out << "schedule = " << c.schedule << '\n';
    out << "latent_size = " << c.latent_size << '\n';
    out << "base_width = " << c.base_width << '\n';
    out << "identity_vae = " << (c.identity_vae ? "true" : "false") << '\n';
    out << "init_seed = " << c.init_seed << '\n';
    out << "base_pretrain_steps = " << c.base_pretrain_steps << '\n';
    out << "base_pretrain_batch = " << c.base_pretrain_batch << '\n';
    out << "base_pretrain_lr = " << fmt_double(c.base_pretrain_lr) << '\n';
    out << "base_pretrain_images = " << c.base_pretrain_images << '\n';
    out << "base_pretrain_seed = " << c.base_pretrain_seed << '\n';
    return out.str();
}

TrainConfig parse_config(const std::string& text, const std::string& source) {
    TrainConfig c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw IngestionError(source, lineno, "expected 'key = value'");
        }
        try {
            c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ParameterError& e) {
            throw IngestionError(source, lineno, e.what());
        }
    }
    try {
        c.validate();
    } catch (const ParameterError& e) {
        throw IngestionError(source, lineno, e.what());
    }
    return c;
}

TrainConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IngestionError(path, 0, "cannot open config");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

}  // namespace sketchinpaint
