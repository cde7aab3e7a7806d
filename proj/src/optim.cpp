#include "fmim/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace fmim {

void OptimConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("OptimConfig: lr must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw std::invalid_argument("OptimConfig: betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw std::invalid_argument("OptimConfig: eps must be > 0");
    if (weight_decay < 0.0) throw std::invalid_argument("OptimConfig: weight_decay must be >= 0");
}

OptimState OptimState::init(const ModelParams& params) {
    OptimState s;
    s.m = params;
    s.m.zero();
    s.v = params;
    s.v.zero();
    s.t = 0;
    return s;
}

void adamw_step(ModelParams& params, const Gradients& grads, OptimState& state,
                const OptimConfig& cfg) {
    cfg.validate();
    if (!params.same_shape(grads) || !params.same_shape(state.m) || !params.same_shape(state.v))
        throw std::invalid_argument("adamw_step: shape mismatch");
    if (!grads.all_finite()) throw std::runtime_error("adamw_step: non-finite gradient");

    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

    auto pblocks = params.blocks();
    auto gblocks = grads.blocks();
    auto mblocks = state.m.blocks();
    auto vblocks = state.v.blocks();
    for (size_t b = 0; b < pblocks.size(); ++b) {
        std::vector<double>& theta = *pblocks[b].values;
        const std::vector<double>& g = *gblocks[b].values;
        std::vector<double>& m = *mblocks[b].values;
        std::vector<double>& v = *vblocks[b].values;
        const double wd = pblocks[b].is_bias ? 0.0 : cfg.weight_decay;
        for (size_t i = 0; i < theta.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps) + cfg.lr * wd * theta[i];
        }
    }
    params.version += 1;
}

}  // namespace fmim
