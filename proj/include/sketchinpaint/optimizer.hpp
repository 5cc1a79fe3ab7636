#pragma once

#include <vector>

#include "sketchinpaint/nn.hpp"

namespace sketchinpaint {

struct AdamOptions {
    double learning_rate = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam over the trainable parameters of a set. Frozen parameters are never
// touched; trainable parameters without a gradient this step are skipped.
class Adam {
public:
    Adam(ParameterSet& params, const AdamOptions& options);
    // Explicit parameter list, used while a frozen component is being pretrained.
    Adam(std::vector<Parameter*> params, const AdamOptions& options);
    void step();
    void set_learning_rate(double lr) { options_.learning_rate = lr; }
    long long steps() const { return t_; }

private:
    AdamOptions options_;
    std::vector<Parameter*> params_;
    std::vector<Grid> m_, v_;
    long long t_ = 0;
};

}  // namespace sketchinpaint
