#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fmim/optim.hpp"

using namespace fmim;

namespace {

TaggerConfig small_config() {
    TaggerConfig cfg;
    cfg.vocab_size = 4;
    cfg.embed_dim = 2;
    cfg.context_window = 1;
    cfg.hidden_dim = 3;
    cfg.num_tags = 2;
    return cfg;
}

}  // namespace

TEST_CASE("init_state zeroes the moments") {
    TaggerConfig cfg = small_config();
    std::mt19937_64 rng(1);
    ModelParams params = init_params(cfg, rng);
    OptimState st = OptimState::init(params);
    CHECK(st.t == 0);
    CHECK(st.m.same_shape(params));
    CHECK(st.v.same_shape(params));
    for (const auto& block : st.m.blocks())
        for (double v : *block.values) CHECK(v == 0.0);
    for (const auto& block : st.v.blocks())
        for (double v : *block.values) CHECK(v == 0.0);
}

TEST_CASE("zero gradient and zero decay leave parameters unchanged") {
    TaggerConfig cfg = small_config();
    std::mt19937_64 rng(2);
    ModelParams params = init_params(cfg, rng);
    ModelParams before = params;
    Gradients grads = ParamSet::zeros_like(cfg);
    OptimState st = OptimState::init(params);
    OptimConfig ocfg;
    ocfg.weight_decay = 0.0;

    adamw_step(params, grads, st, ocfg);
    CHECK(st.t == 1);
    for (size_t b = 0; b < params.blocks().size(); ++b)
        CHECK(*params.blocks()[b].values == *before.blocks()[b].values);
}

TEST_CASE("first step from zero with unit gradient moves by about -lr") {
    TaggerConfig cfg = small_config();
    ModelParams params = ParamSet::zeros_like(cfg);
    Gradients grads = ParamSet::zeros_like(cfg);
    for (auto& block : grads.blocks())
        for (double& v : *block.values) v = 1.0;
    OptimState st = OptimState::init(params);
    OptimConfig ocfg;
    ocfg.lr = 2e-5;
    ocfg.weight_decay = 0.0;

    adamw_step(params, grads, st, ocfg);
    // mhat = vhat = 1 on the first step, so theta = -lr/(1+eps).
    double expected = -2e-5 / (1.0 + 1e-8);
    for (const auto& block : params.blocks())
        for (double v : *block.values) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("pure decoupled decay") {
    TaggerConfig cfg = small_config();
    ModelParams params = ParamSet::zeros_like(cfg);
    for (auto& block : params.blocks())
        for (double& v : *block.values) v = 1.0;
    Gradients grads = ParamSet::zeros_like(cfg);
    OptimState st = OptimState::init(params);
    OptimConfig ocfg;
    ocfg.lr = 2e-5;
    ocfg.weight_decay = 0.1;

    adamw_step(params, grads, st, ocfg);
    for (const auto& block : params.blocks()) {
        double expected = block.is_bias ? 1.0 : 1.0 - 2e-6;  // biases are not decayed
        for (double v : *block.values) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("update direction follows -mhat when decay is off") {
    TaggerConfig cfg = small_config();
    std::mt19937_64 rng(3);
    ModelParams params = init_params(cfg, rng);
    ModelParams before = params;
    Gradients grads = ParamSet::zeros_like(cfg);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& block : grads.blocks())
        for (double& v : *block.values) v = u(rng);
    OptimState st = OptimState::init(params);
    OptimConfig ocfg;
    ocfg.weight_decay = 0.0;

    adamw_step(params, grads, st, ocfg);
    // After one step mhat has the sign of g.
    auto pb = params.blocks();
    auto bb = before.blocks();
    auto gb = grads.blocks();
    for (size_t b = 0; b < pb.size(); ++b)
        for (size_t i = 0; i < pb[b].values->size(); ++i) {
            double delta = (*pb[b].values)[i] - (*bb[b].values)[i];
            double g = (*gb[b].values)[i];
            if (g > 1e-12) CHECK(delta < 0.0);
            if (g < -1e-12) CHECK(delta > 0.0);
        }
}

TEST_CASE("first-step magnitude is about lr for any constant gradient scale") {
    TaggerConfig cfg = small_config();
    for (double scale : {1e-6, 1.0, 1e6}) {
        ModelParams params = ParamSet::zeros_like(cfg);
        Gradients grads = ParamSet::zeros_like(cfg);
        for (auto& block : grads.blocks())
            for (double& v : *block.values) v = scale;
        OptimState st = OptimState::init(params);
        OptimConfig ocfg;
        ocfg.lr = 1e-3;
        ocfg.weight_decay = 0.0;
        adamw_step(params, grads, st, ocfg);
        for (const auto& block : params.blocks())
            for (double v : *block.values)
                CHECK(std::abs(v) == doctest::Approx(1e-3).epsilon(1e-4));
    }
}

TEST_CASE("deterministic: identical inputs give identical outputs") {
    TaggerConfig cfg = small_config();
    std::mt19937_64 rng1(4), rng2(4);
    ModelParams p1 = init_params(cfg, rng1);
    ModelParams p2 = init_params(cfg, rng2);
    Gradients g = ParamSet::zeros_like(cfg);
    std::mt19937_64 grng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& block : g.blocks())
        for (double& v : *block.values) v = u(grng);
    OptimState s1 = OptimState::init(p1), s2 = OptimState::init(p2);
    OptimConfig ocfg;
    for (int i = 0; i < 5; ++i) {
        adamw_step(p1, g, s1, ocfg);
        adamw_step(p2, g, s2, ocfg);
    }
    CHECK(p1.w1.a == p2.w1.a);
    CHECK(s1.v.w1.a == s2.v.w1.a);
}

TEST_CASE("non-finite gradients abort the step") {
    TaggerConfig cfg = small_config();
    std::mt19937_64 rng(6);
    ModelParams params = init_params(cfg, rng);
    ModelParams before = params;
    Gradients grads = ParamSet::zeros_like(cfg);
    grads.w2(0, 0) = std::numeric_limits<double>::quiet_NaN();
    OptimState st = OptimState::init(params);
    OptimConfig ocfg;
    CHECK_THROWS_AS(adamw_step(params, grads, st, ocfg), std::runtime_error);
    CHECK(params.w2.a == before.w2.a);  // step not applied
    CHECK(st.t == 0);
}

TEST_CASE("optim config validation") {
    OptimConfig cfg;
    cfg.lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = OptimConfig{};
    cfg.beta2 = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = OptimConfig{};
    cfg.weight_decay = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
