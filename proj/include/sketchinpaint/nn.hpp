#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sketchinpaint/autograd.hpp"
#include "sketchinpaint/random.hpp"

namespace sketchinpaint {

enum class ParamGroup { frozen, trainable };

const char* group_name(ParamGroup group);

struct Parameter {
    std::string name;
    ag::Var var;
    ParamGroup group;
};

// Ordered, name-indexed parameter registry. Trainable parameters require grad.
class ParameterSet {
public:
    ag::Var add(const std::string& name, Grid init, ParamGroup group);

    std::vector<Parameter>& all() { return params_; }
    const std::vector<Parameter>& all() const { return params_; }
    const Parameter* find(const std::string& name) const;
    Parameter* find(const std::string& name);

    // Number of scalar values in a group.
    std::size_t element_count(ParamGroup group) const;
    void zero_grad();

private:
    std::vector<Parameter> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class Init {
    uniform_fan_in,  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias
    zero,
};

struct Conv2d {
    ag::Var weight;  // (out, in, k, k)
    ag::Var bias;    // (1, out, 1, 1)
    int stride = 1;
    int padding = 0;

    ag::Var operator()(const ag::Var& x) const { return ag::conv2d(x, weight, bias, stride, padding); }
    int out_channels() const { return weight.value().n(); }
};

// padding defaults to k / 2 ("same" for odd kernels at stride 1).
Conv2d make_conv(ParameterSet& params, const std::string& name, int in_channels, int out_channels, int kernel,
                 int stride, ParamGroup group, Init init, Rng& rng);

struct GroupNorm {
    int groups = 8;
    double eps = 1e-5;
    ag::Var gamma;
    ag::Var beta;

    ag::Var operator()(const ag::Var& x) const { return ag::group_norm(x, groups, eps, gamma, beta); }
};

GroupNorm make_group_norm(ParameterSet& params, const std::string& name, int channels, int groups, ParamGroup group);

// GN -> SiLU -> conv3x3 -> +temb -> GN -> SiLU -> conv3x3, plus a 1x1 skip when widths differ.
struct ResBlock {
    GroupNorm norm1;
    Conv2d conv1;
    Conv2d temb_proj;
    GroupNorm norm2;
    Conv2d conv2;
    std::optional<Conv2d> skip;

    // temb: (N, temb_dim, 1, 1), already passed through SiLU by the caller.
    ag::Var operator()(const ag::Var& x, const ag::Var& temb) const;
};

ResBlock make_res_block(ParameterSet& params, const std::string& name, int in_channels, int out_channels,
                        int temb_dim, int groups, ParamGroup group, Rng& rng);

// x + Wo * attend(GN(x), text)
struct CrossAttention {
    GroupNorm norm;
    ag::Var wq, wk, wv, wo;

    ag::Var operator()(const ag::Var& x, const ag::Var& text) const;
};

CrossAttention make_cross_attention(ParameterSet& params, const std::string& name, int channels, int text_dim,
                                    int groups, ParamGroup group, Rng& rng);

// Sinusoidal timestep features, (N, dim, 1, 1): [cos(t * f_i), sin(t * f_i)].
Grid timestep_features(std::span<const int> timesteps, int dim);

}  // namespace sketchinpaint
