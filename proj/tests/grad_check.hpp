#pragma once

// Full-model finite-difference gradient checking for the combined training
// loss (cross entropy + weighted MI term). Central differences are only a
// valid derivative estimate on a smooth piece, so coordinates whose +/-h
// evaluations land on different ReLU sign patterns (or different MI branches)
// are excluded; the checks assert that exclusions stay rare.

#include <cmath>
#include <random>
#include <vector>

#include "fmim/mi_loss.hpp"
#include "fmim/tagger.hpp"

namespace gradcheck {

struct Setup {
    fmim::TaggerConfig cfg;
    fmim::ModelParams params;
    fmim::MiLossConfig mi;
    std::vector<std::vector<int>> src_tokens;
    std::vector<fmim::TagSequence> src_gold;
    std::vector<std::vector<int>> tgt_tokens;
};

// A tiny random model (well under 5k parameters) plus a random joint batch.
// rho is pinned 0.05 nats away from the batch's marginal entropy on the
// requested side so the branch cannot flip under perturbation.
inline Setup random_setup(std::mt19937_64& rng, bool below_branch) {
    Setup s;
    s.cfg.vocab_size = 12;
    s.cfg.embed_dim = 4;
    s.cfg.context_window = 1;
    s.cfg.hidden_dim = 6;
    s.cfg.num_tags = 3;
    s.cfg.max_len = 16;
    s.params = fmim::init_params(s.cfg, rng);

    std::uniform_int_distribution<int> n_sent(1, 3);
    std::uniform_int_distribution<int> n_tok(1, 5);
    std::uniform_int_distribution<int> tok(0, s.cfg.vocab_size - 1);
    std::uniform_int_distribution<int> tag(0, s.cfg.num_tags - 1);
    int n_src = n_sent(rng), n_tgt = n_sent(rng);
    for (int j = 0; j < n_src; ++j) {
        int n = n_tok(rng);
        std::vector<int> toks;
        fmim::TagSequence gold;
        for (int i = 0; i < n; ++i) {
            toks.push_back(tok(rng));
            gold.push_back(tag(rng));
        }
        s.src_tokens.push_back(std::move(toks));
        s.src_gold.push_back(std::move(gold));
    }
    for (int j = 0; j < n_tgt; ++j) {
        int n = n_tok(rng);
        std::vector<int> toks;
        for (int i = 0; i < n; ++i) toks.push_back(tok(rng));
        s.tgt_tokens.push_back(std::move(toks));
    }

    s.mi.alpha = 0.05;
    s.mi.epsilon = 1e-12;
    s.mi.rho = 0.0;  // placeholder until the first forward below
    double d1;
    {
        std::vector<fmim::Matrix> sp, tp;
        for (const auto& t : s.src_tokens) sp.push_back(fmim::forward(t, s.params, s.cfg).probs);
        for (const auto& t : s.tgt_tokens) tp.push_back(fmim::forward(t, s.params, s.cfg).probs);
        d1 = fmim::marginal_entropy(fmim::assemble_prob_matrix(sp, tp), s.mi.epsilon);
    }
    s.mi.rho = below_branch ? d1 + 0.05 : std::max(0.0, d1 - 0.05);
    return s;
}

// Combined loss at the given parameters. When sig is non-null it accumulates
// a hash of every ReLU sign and the MI branch, used to detect kink crossings.
inline double model_loss(const Setup& s, const fmim::ModelParams& params, uint64_t* sig) {
    auto hash_bit = [&](bool b) {
        if (sig) *sig = (*sig * 1099511628211ULL) ^ (b ? 0x9e37ULL : 0x79b9ULL);
    };

    int n_total = 0;
    for (const auto& g : s.src_gold) n_total += static_cast<int>(g.size());

    std::vector<fmim::Matrix> sp, tp;
    double ce = 0.0;
    auto run = [&](const std::vector<int>& toks) {
        fmim::ForwardResult f = fmim::forward(toks, params, s.cfg);
        for (double v : f.cache.h1.a) hash_bit(v > 0.0);
        for (double v : f.cache.h2.a) hash_bit(v > 0.0);
        return f;
    };
    for (size_t j = 0; j < s.src_tokens.size(); ++j) {
        fmim::ForwardResult f = run(s.src_tokens[j]);
        ce += fmim::cross_entropy(f.probs, s.src_gold[j], s.mi.epsilon, n_total).loss;
        sp.push_back(std::move(f.probs));
    }
    for (const auto& toks : s.tgt_tokens) tp.push_back(run(toks).probs);

    fmim::MiLossResult mi = fmim::mi_loss_and_grad(fmim::assemble_prob_matrix(sp, tp), s.mi);
    hash_bit(mi.branch == fmim::MiBranch::BelowThreshold);
    return fmim::combine_losses(ce, mi, s.mi.alpha);
}

// The same gradient assembly the training loop performs.
inline fmim::Gradients analytic_grads(const Setup& s) {
    fmim::Gradients grads = fmim::ParamSet::zeros_like(s.cfg);
    int n_total = 0;
    for (const auto& g : s.src_gold) n_total += static_cast<int>(g.size());

    std::vector<fmim::ForwardResult> src_fwd, tgt_fwd;
    std::vector<fmim::Matrix> sp, tp;
    for (const auto& toks : s.src_tokens) {
        src_fwd.push_back(fmim::forward(toks, s.params, s.cfg));
        sp.push_back(src_fwd.back().probs);
    }
    for (const auto& toks : s.tgt_tokens) {
        tgt_fwd.push_back(fmim::forward(toks, s.params, s.cfg));
        tp.push_back(tgt_fwd.back().probs);
    }
    fmim::MiLossResult mi = fmim::mi_loss_and_grad(fmim::assemble_prob_matrix(sp, tp), s.mi);

    int row = 0;
    fmim::Matrix empty;
    auto mi_slice = [&](int n_rows) {
        fmim::Matrix d(n_rows, s.cfg.num_tags);
        for (int i = 0; i < n_rows; ++i)
            for (int k = 0; k < s.cfg.num_tags; ++k)
                d(i, k) = s.mi.alpha * mi.grad_m(row + i, k);
        row += n_rows;
        return d;
    };
    for (size_t j = 0; j < src_fwd.size(); ++j) {
        fmim::Matrix dprobs = mi_slice(src_fwd[j].probs.rows);
        fmim::CeResult ce =
            fmim::cross_entropy(src_fwd[j].probs, s.src_gold[j], s.mi.epsilon, n_total);
        fmim::backward(src_fwd[j].cache, dprobs, ce.dlogits, s.params, s.cfg, grads);
    }
    for (auto& f : tgt_fwd) {
        fmim::Matrix dprobs = mi_slice(f.probs.rows);
        fmim::backward(f.cache, dprobs, empty, s.params, s.cfg, grads);
    }
    return grads;
}

struct FdReport {
    double max_rel_error = 0.0;
    int checked = 0;
    int skipped = 0;  // coordinates straddling a ReLU kink
};

inline FdReport fd_check(const Setup& s, double h) {
    fmim::Gradients analytic = analytic_grads(s);

    fmim::ModelParams work = s.params;
    auto work_blocks = work.blocks();
    auto grad_blocks = analytic.blocks();

    double scale = 0.0;
    std::vector<std::vector<double>> fd(work_blocks.size());
    std::vector<std::vector<bool>> ok(work_blocks.size());
    for (size_t b = 0; b < work_blocks.size(); ++b) {
        std::vector<double>& theta = *work_blocks[b].values;
        fd[b].assign(theta.size(), 0.0);
        ok[b].assign(theta.size(), false);
        for (size_t i = 0; i < theta.size(); ++i) {
            double orig = theta[i];
            uint64_t sig_up = 0, sig_down = 0;
            theta[i] = orig + h;
            double up = model_loss(s, work, &sig_up);
            theta[i] = orig - h;
            double down = model_loss(s, work, &sig_down);
            theta[i] = orig;
            if (sig_up != sig_down) continue;  // crossed a kink; FD invalid here
            fd[b][i] = (up - down) / (2.0 * h);
            ok[b][i] = true;
            scale = std::max({scale, std::abs(fd[b][i]), std::abs((*grad_blocks[b].values)[i])});
        }
    }

    FdReport report;
    for (size_t b = 0; b < work_blocks.size(); ++b) {
        const std::vector<double>& g = *grad_blocks[b].values;
        for (size_t i = 0; i < g.size(); ++i) {
            if (!ok[b][i]) {
                ++report.skipped;
                continue;
            }
            ++report.checked;
            if (scale > 0.0)
                report.max_rel_error =
                    std::max(report.max_rel_error, std::abs(g[i] - fd[b][i]) / scale);
        }
    }
    return report;
}

}  // namespace gradcheck
