#include "sketchinpaint/diffusion.hpp"

#include <cmath>
#include <numbers>

#include "sketchinpaint/errors.hpp"

namespace sketchinpaint {

const char* schedule_kind_name(ScheduleKind kind) { return kind == ScheduleKind::linear ? "linear" : "cosine"; }

ScheduleKind parse_schedule_kind(const std::string& name) {
    if (name == "linear") {
        return ScheduleKind::linear;
    }
    if (name == "cosine") {
        return ScheduleKind::cosine;
    }
    throw ParameterError("schedule", "unknown kind '" + name + "'");
}

double NoiseSchedule::at(int t) const {
    if (t < 0 || t > timesteps) {
        throw ParameterError("t", std::to_string(t) + " outside [0, " + std::to_string(timesteps) + "]");
    }
    return alpha_bar[static_cast<std::size_t>(t)];
}

NoiseSchedule build_schedule(int timesteps, double beta_start, double beta_end, ScheduleKind kind) {
    if (timesteps < 1) {
        throw ParameterError("T", "must be >= 1, got " + std::to_string(timesteps));
    }
    if (!(beta_start > 0.0 && beta_start < 1.0)) {
        throw ParameterError("beta_start", "must lie in (0, 1)");
    }
    if (!(beta_end >= beta_start && beta_end < 1.0)) {
        throw ParameterError("beta_end", "must lie in [beta_start, 1)");
    }
    NoiseSchedule s;
    s.timesteps = timesteps;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.kind = kind;
    s.alpha_bar.assign(static_cast<std::size_t>(timesteps) + 1, 1.0);

    auto cosine_curve = [timesteps](int t) {
        constexpr double offset = 0.008;
        const double phase = (static_cast<double>(t) / timesteps + offset) / (1.0 + offset) * std::numbers::pi / 2.0;
        return std::cos(phase) * std::cos(phase);
    };
    double product = 1.0;
    for (int t = 1; t <= timesteps; ++t) {
        double beta = 0.0;
        if (kind == ScheduleKind::linear) {
            beta = timesteps == 1 ? beta_start
                                  : beta_start + (beta_end - beta_start) * (t - 1) / static_cast<double>(timesteps - 1);
        } else {
            beta = std::min(1.0 - cosine_curve(t) / cosine_curve(t - 1), 0.999);
        }
        product *= 1.0 - beta;
        s.alpha_bar[static_cast<std::size_t>(t)] = product;
    }
    return s;
}

Grid forward_diffuse(const Grid& z0, int t, const Grid& eps, const NoiseSchedule& schedule) {
    std::vector<int> ts(static_cast<std::size_t>(z0.n()), t);
    return forward_diffuse(z0, ts, eps, schedule);
}

Grid forward_diffuse(const Grid& z0, std::span<const int> timesteps, const Grid& eps, const NoiseSchedule& schedule) {
    require_same_shape(z0, eps, "forward_diffuse");
    if (timesteps.size() != static_cast<std::size_t>(z0.n())) {
        throw ShapeError("forward_diffuse: " + std::to_string(timesteps.size()) + " timesteps for batch of " +
                         std::to_string(z0.n()));
    }
    Grid out = Grid::zeros_like(z0);
    const std::size_t per = static_cast<std::size_t>(z0.c()) * z0.h() * z0.w();
    for (int n = 0; n < z0.n(); ++n) {
        const double ab = schedule.at(timesteps[static_cast<std::size_t>(n)]);
        const double a = std::sqrt(ab);
        const double b = std::sqrt(1.0 - ab);
        for (std::size_t i = n * per; i < (n + 1) * per; ++i) {
            out[i] = a * z0[i] + b * eps[i];
        }
    }
    return out;
}

Grid cfg_combine(const Grid& eps_uncond, const Grid& eps_cond, double scale) {
    require_same_shape(eps_uncond, eps_cond, "cfg_combine");
    Grid out = Grid::zeros_like(eps_cond);
    const double keep = 1.0 - scale;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = keep * eps_uncond[i] + scale * eps_cond[i];
    }
    return out;
}

void Conditioning::validate() const {
    const int n = batch();
    if (text.n() != n || sketch.n() != n || text_null.size() != static_cast<std::size_t>(n) ||
        sketch_null.size() != static_cast<std::size_t>(n)) {
        throw ShapeError("conditioning: batch sizes disagree");
    }
    for (int i = 0; i < 4; ++i) {
        const Grid& level = mask_pyramid[static_cast<std::size_t>(i)];
        if (level.n() != n || level.c() != 1) {
            throw ShapeError("conditioning: mask level " + std::to_string(i + 1) + " has shape " + level.shape_str());
        }
        if (!is_binary(level)) {
            throw ValueError("conditioning: mask level " + std::to_string(i + 1) + " is not binary");
        }
    }
    const std::size_t per = static_cast<std::size_t>(sketch.c()) * sketch.h() * sketch.w();
    for (int i = 0; i < n; ++i) {
        if (!sketch_null[static_cast<std::size_t>(i)]) {
            continue;
        }
        for (std::size_t k = i * per; k < (i + 1) * per; ++k) {
            if (sketch[k] != 0.0) {
                throw ValueError("conditioning: null sketch for sample " + std::to_string(i) + " is not all zeros");
            }
        }
    }
}

void Conditioning::set_sketch_null(int sample) {
    sketch_null[static_cast<std::size_t>(sample)] = 1;
    const std::size_t per = static_cast<std::size_t>(sketch.c()) * sketch.h() * sketch.w();
    std::fill_n(sketch.data() + sample * per, per, 0.0);
}

Conditioning Conditioning::with_nulls(bool null_text, bool null_sketch) const {
    Conditioning out = *this;
    for (int i = 0; i < batch(); ++i) {
        if (null_text) {
            out.text_null[static_cast<std::size_t>(i)] = 1;
        }
        if (null_sketch) {
            out.set_sketch_null(i);
        }
    }
    return out;
}

Conditioning Conditioning::stack(std::span<const Conditioning> parts) {
    Conditioning out;
    std::vector<Grid> buf;
    auto gather = [&](auto member) {
        buf.clear();
        for (const auto& p : parts) {
            buf.push_back(member(p));
        }
        return Grid::stack_batch(buf);
    };
    out.text = gather([](const Conditioning& c) { return c.text; });
    out.masked_latent = gather([](const Conditioning& c) { return c.masked_latent; });
    out.sketch = gather([](const Conditioning& c) { return c.sketch; });
    for (std::size_t i = 0; i < 4; ++i) {
        out.mask_pyramid[i] = gather([i](const Conditioning& c) { return c.mask_pyramid[i]; });
    }
    for (const auto& p : parts) {
        out.text_null.insert(out.text_null.end(), p.text_null.begin(), p.text_null.end());
        out.sketch_null.insert(out.sketch_null.end(), p.sketch_null.begin(), p.sketch_null.end());
    }
    return out;
}

std::vector<int> ddim_timesteps(int total_timesteps, int steps) {
    if (steps < 1 || steps > total_timesteps) {
        throw ParameterError("steps", std::to_string(steps) + " outside [1, " + std::to_string(total_timesteps) + "]");
    }
    std::vector<int> ts;
    ts.reserve(static_cast<std::size_t>(steps));
    for (int i = steps; i >= 1; --i) {
        ts.push_back(static_cast<int>((static_cast<long long>(i) * total_timesteps) / steps));
    }
    return ts;
}

Grid ddim_step(const Grid& z_t, const Grid& eps, double alpha_bar_t, double alpha_bar_prev) {
    require_same_shape(z_t, eps, "ddim_step");
    Grid out = Grid::zeros_like(z_t);
    const double sa = std::sqrt(alpha_bar_t);
    const double sb = std::sqrt(1.0 - alpha_bar_t);
    const double pa = std::sqrt(alpha_bar_prev);
    const double pb = std::sqrt(1.0 - alpha_bar_prev);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x0 = (z_t[i] - sb * eps[i]) / sa;
        out[i] = pa * x0 + pb * eps[i];
    }
    return out;
}

Grid ddim_sample(const NoisePredictor& model, const Conditioning& bundle, const NoiseSchedule& schedule, int steps,
                 double cfg_scale, std::uint64_t seed) {
    const auto ts = ddim_timesteps(schedule.timesteps, steps);
    bundle.validate();
    const Conditioning uncond = bundle.with_nulls(true, true);
    Rng rng(seed);
    Grid z = normal_grid(bundle.masked_latent.shape(), rng);
    ag::NoGradGuard no_grad;
    std::vector<int> tvec(static_cast<std::size_t>(z.n()));
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const int t = ts[k];
        const int prev = k + 1 < ts.size() ? ts[k + 1] : 0;
        std::fill(tvec.begin(), tvec.end(), t);
        const ag::Var zt = ag::constant(z);
        const Grid eps_u = model.predict_noise(zt, tvec, uncond).value();
        const Grid eps_c = model.predict_noise(zt, tvec, bundle).value();
        z = ddim_step(z, cfg_combine(eps_u, eps_c, cfg_scale), schedule.at(t), schedule.at(prev));
    }
    return z;
}

LossEvaluation training_loss(const NoisePredictor& model, const TrainingBatch& batch, const NoiseSchedule& schedule,
                             Rng& rng, const DropoutConfig& dropout) {
    const int n = batch.z0.n();
    if (n == 0) {
        throw ShapeError("training_loss: empty batch");
    }
    LossEvaluation ev;
    ev.timesteps.resize(static_cast<std::size_t>(n));
    for (int& t : ev.timesteps) {
        t = uniform_int(rng, 1, schedule.timesteps);
    }
    ev.eps = normal_grid(batch.z0.shape(), rng);
    ev.z_t = forward_diffuse(batch.z0, ev.timesteps, ev.eps, schedule);

    Conditioning cond = batch.cond;
    ev.text_dropped.assign(static_cast<std::size_t>(n), 0);
    ev.sketch_dropped.assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        const bool drop_text = uniform01(rng) < dropout.text;
        const bool drop_sketch = uniform01(rng) < dropout.sketch;
        if (drop_text) {
            cond.text_null[static_cast<std::size_t>(i)] = 1;
            ev.text_dropped[static_cast<std::size_t>(i)] = 1;
        }
        if (drop_sketch) {
            cond.set_sketch_null(i);
            ev.sketch_dropped[static_cast<std::size_t>(i)] = 1;
        }
    }
    const ag::Var prediction = model.predict_noise(ag::constant(ev.z_t), ev.timesteps, cond);
    ev.loss = ag::mse(prediction, ag::constant(ev.eps));
    return ev;
}

}  // namespace sketchinpaint
