#include "sketchinpaint/optimizer.hpp"

#include <cmath>

namespace sketchinpaint {

Adam::Adam(ParameterSet& params, const AdamOptions& options) : options_(options) {
    for (Parameter& p : params.all()) {
        if (p.group == ParamGroup::trainable) {
            params_.push_back(&p);
        }
    }
    for (const Parameter* p : params_) {
        m_.push_back(Grid::zeros_like(p->var.value()));
        v_.push_back(Grid::zeros_like(p->var.value()));
    }
}

Adam::Adam(std::vector<Parameter*> params, const AdamOptions& options)
    : options_(options), params_(std::move(params)) {
    for (const Parameter* p : params_) {
        m_.push_back(Grid::zeros_like(p->var.value()));
        v_.push_back(Grid::zeros_like(p->var.value()));
    }
}

void Adam::step() {
    ++t_;
    const double b1 = options_.beta1, b2 = options_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        const Grid& g = params_[k]->var.grad();
        if (g.empty()) {
            continue;
        }
        Grid& w = params_[k]->var.mutable_value();
        Grid& m = m_[k];
        Grid& v = v_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            w[i] -= options_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.eps);
        }
    }
}

}  // namespace sketchinpaint
