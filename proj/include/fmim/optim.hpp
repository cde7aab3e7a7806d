#pragma once

#include "fmim/tagger.hpp"

namespace fmim {

// AdamW with decoupled weight decay and a fixed learning rate.
struct OptimConfig {
    double lr = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;  // applied to matrices, not biases

    void validate() const;  // throws std::invalid_argument
};

struct OptimState {
    ParamSet m;  // first moments
    ParamSet v;  // second moments
    long t = 0;

    static OptimState init(const ModelParams& params);
};

// One AdamW update:
//   m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2;  bias-correct;
//   theta <- theta - lr*mhat/(sqrt(vhat)+eps) - lr*wd*theta.
// Throws std::runtime_error on non-finite gradients (the step is not applied).
void adamw_step(ModelParams& params, const Gradients& grads, OptimState& state,
                const OptimConfig& cfg);

}  // namespace fmim
