#include "sketchinpaint/nn.hpp"

#include <cmath>

#include "sketchinpaint/errors.hpp"

namespace sketchinpaint {

const char* group_name(ParamGroup group) { return group == ParamGroup::frozen ? "frozen" : "trainable"; }

ag::Var ParameterSet::add(const std::string& name, Grid init, ParamGroup group) {
    if (index_.contains(name)) {
        throw IntegrityError("duplicate parameter name '" + name + "'");
    }
    ag::Var var(std::move(init), group == ParamGroup::trainable);
    index_.emplace(name, params_.size());
    params_.push_back({name, var, group});
    return var;
}

const Parameter* ParameterSet::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
}

Parameter* ParameterSet::find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
}

std::size_t ParameterSet::element_count(ParamGroup group) const {
    std::size_t total = 0;
    for (const auto& p : params_) {
        if (p.group == group) {
            total += p.var.value().size();
        }
    }
    return total;
}

void ParameterSet::zero_grad() {
    for (auto& p : params_) {
        p.var.zero_grad();
    }
}

namespace {

Grid init_grid(const Grid::Shape& shape, int fan_in, Init init, Rng& rng) {
    Grid g(shape);
    if (init == Init::zero) {
        return g;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : g.values()) {
        v = dist(rng);
    }
    return g;
}

}  // namespace

Conv2d make_conv(ParameterSet& params, const std::string& name, int in_channels, int out_channels, int kernel,
                 int stride, ParamGroup group, Init init, Rng& rng) {
    const int fan_in = in_channels * kernel * kernel;
    Conv2d conv;
    conv.weight = params.add(name + ".weight",
                             init_grid({out_channels, in_channels, kernel, kernel}, fan_in, init, rng), group);
    conv.bias = params.add(name + ".bias", init_grid({1, out_channels, 1, 1}, fan_in, init, rng), group);
    conv.stride = stride;
    conv.padding = kernel / 2;
    return conv;
}

GroupNorm make_group_norm(ParameterSet& params, const std::string& name, int channels, int groups, ParamGroup group) {
    if (groups <= 0 || channels % groups != 0) {
        throw ParameterError("groupnorm_groups", std::to_string(groups) + " does not divide " +
                                                     std::to_string(channels) + " channels at " + name);
    }
    GroupNorm gn;
    gn.groups = groups;
    gn.gamma = params.add(name + ".gamma", Grid(1, channels, 1, 1, 1.0), group);
    gn.beta = params.add(name + ".beta", Grid(1, channels, 1, 1, 0.0), group);
    return gn;
}

ag::Var ResBlock::operator()(const ag::Var& x, const ag::Var& temb) const {
    ag::Var h = conv1(ag::silu(norm1(x)));
    h = ag::add(h, temb_proj(temb));
    h = conv2(ag::silu(norm2(h)));
    return ag::add(skip ? (*skip)(x) : x, h);
}

ResBlock make_res_block(ParameterSet& params, const std::string& name, int in_channels, int out_channels,
                        int temb_dim, int groups, ParamGroup group, Rng& rng) {
    ResBlock rb;
    rb.norm1 = make_group_norm(params, name + ".norm1", in_channels, groups, group);
    rb.conv1 = make_conv(params, name + ".conv1", in_channels, out_channels, 3, 1, group, Init::uniform_fan_in, rng);
    rb.temb_proj = make_conv(params, name + ".temb", temb_dim, out_channels, 1, 1, group, Init::uniform_fan_in, rng);
    rb.norm2 = make_group_norm(params, name + ".norm2", out_channels, groups, group);
    rb.conv2 = make_conv(params, name + ".conv2", out_channels, out_channels, 3, 1, group, Init::uniform_fan_in, rng);
    if (in_channels != out_channels) {
        rb.skip = make_conv(params, name + ".skip", in_channels, out_channels, 1, 1, group, Init::uniform_fan_in, rng);
    }
    return rb;
}

ag::Var CrossAttention::operator()(const ag::Var& x, const ag::Var& text) const {
    return ag::add(x, ag::cross_attention(norm(x), text, wq, wk, wv, wo));
}

CrossAttention make_cross_attention(ParameterSet& params, const std::string& name, int channels, int text_dim,
                                    int groups, ParamGroup group, Rng& rng) {
    CrossAttention attn;
    attn.norm = make_group_norm(params, name + ".norm", channels, groups, group);
    attn.wq = params.add(name + ".wq", init_grid({channels, channels, 1, 1}, channels, Init::uniform_fan_in, rng), group);
    attn.wk = params.add(name + ".wk", init_grid({channels, text_dim, 1, 1}, text_dim, Init::uniform_fan_in, rng), group);
    attn.wv = params.add(name + ".wv", init_grid({channels, text_dim, 1, 1}, text_dim, Init::uniform_fan_in, rng), group);
    attn.wo = params.add(name + ".wo", init_grid({channels, channels, 1, 1}, channels, Init::uniform_fan_in, rng), group);
    return attn;
}

Grid timestep_features(std::span<const int> timesteps, int dim) {
    if (dim % 2 != 0) {
        throw ShapeError("timestep_features: dim must be even, got " + std::to_string(dim));
    }
    const int half = dim / 2;
    Grid out(static_cast<int>(timesteps.size()), dim, 1, 1);
    for (std::size_t n = 0; n < timesteps.size(); ++n) {
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * i / half);
            const double arg = timesteps[n] * freq;
            out.at(static_cast<int>(n), i, 0, 0) = std::cos(arg);
            out.at(static_cast<int>(n), half + i, 0, 0) = std::sin(arg);
        }
    }
    return out;
}

}  // namespace sketchinpaint
