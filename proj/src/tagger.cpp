#include "fmim/tagger.hpp"

#include <cmath>
#include <stdexcept>

namespace fmim {

void TaggerConfig::validate() const {
    if (vocab_size < 1 || embed_dim < 1 || hidden_dim < 1 || num_tags < 1 || max_len < 1)
        throw std::invalid_argument("TaggerConfig: all dimensions must be >= 1");
    if (context_window < 0) throw std::invalid_argument("TaggerConfig: negative context window");
    if (num_layers != 2) throw std::invalid_argument("TaggerConfig: num_layers is fixed at 2");
}

ParamSet ParamSet::zeros_like(const TaggerConfig& cfg) {
    ParamSet p;
    p.embeddings = Matrix(cfg.vocab_size, cfg.embed_dim);
    p.w1 = Matrix(cfg.input_dim(), cfg.hidden_dim);
    p.b1.assign(static_cast<size_t>(cfg.hidden_dim), 0.0);
    p.w2 = Matrix(cfg.hidden_dim, cfg.hidden_dim);
    p.b2.assign(static_cast<size_t>(cfg.hidden_dim), 0.0);
    p.w_out = Matrix(cfg.hidden_dim, cfg.num_tags);
    p.b_out.assign(static_cast<size_t>(cfg.num_tags), 0.0);
    return p;
}

void ParamSet::zero() {
    embeddings.fill(0.0);
    w1.fill(0.0);
    w2.fill(0.0);
    w_out.fill(0.0);
    b1.assign(b1.size(), 0.0);
    b2.assign(b2.size(), 0.0);
    b_out.assign(b_out.size(), 0.0);
}

bool ParamSet::same_shape(const ParamSet& o) const {
    return embeddings.same_shape(o.embeddings) && w1.same_shape(o.w1) && w2.same_shape(o.w2) &&
           w_out.same_shape(o.w_out) && b1.size() == o.b1.size() && b2.size() == o.b2.size() &&
           b_out.size() == o.b_out.size();
}

bool ParamSet::all_finite() const {
    auto ok = [](const std::vector<double>& xs) {
        for (double x : xs)
            if (!std::isfinite(x)) return false;
        return true;
    };
    return ok(embeddings.a) && ok(w1.a) && ok(b1) && ok(w2.a) && ok(b2) && ok(w_out.a) && ok(b_out);
}

std::vector<ParamSet::Block> ParamSet::blocks() {
    return {
        {"embeddings", &embeddings.a, false}, {"w1", &w1.a, false}, {"b1", &b1, true},
        {"w2", &w2.a, false},                 {"b2", &b2, true},    {"w_out", &w_out.a, false},
        {"b_out", &b_out, true},
    };
}

std::vector<ParamSet::Block> ParamSet::blocks() const {
    return const_cast<ParamSet*>(this)->blocks();
}

ModelParams init_params(const TaggerConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    ModelParams p = ParamSet::zeros_like(cfg);

    auto fill_uniform = [&rng](std::vector<double>& xs, double bound) {
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& x : xs) x = dist(rng);
    };

    fill_uniform(p.embeddings.a, 0.1);
    fill_uniform(p.w1.a, 1.0 / std::sqrt(static_cast<double>(cfg.input_dim())));
    fill_uniform(p.b1, 1.0 / std::sqrt(static_cast<double>(cfg.input_dim())));
    fill_uniform(p.w2.a, 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim)));
    fill_uniform(p.b2, 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim)));
    fill_uniform(p.w_out.a, 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim)));
    fill_uniform(p.b_out, 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim)));
    return p;
}

namespace {

// y = x*W + b for row-major W (in x out).
void affine(const Matrix& x, const Matrix& w, const std::vector<double>& b, Matrix& y) {
    y = Matrix(x.rows, w.cols);
    for (int i = 0; i < x.rows; ++i) {
        const double* xi = x.row_ptr(i);
        double* yi = y.row_ptr(i);
        for (int j = 0; j < w.cols; ++j) yi[j] = b[static_cast<size_t>(j)];
        for (int k = 0; k < w.rows; ++k) {
            double xv = xi[k];
            if (xv == 0.0) continue;
            const double* wk = w.row_ptr(k);
            for (int j = 0; j < w.cols; ++j) yi[j] += xv * wk[j];
        }
    }
}

void relu_inplace(Matrix& m) {
    for (double& v : m.a)
        if (v < 0.0) v = 0.0;
}

int context_id(const std::vector<int>& ids, int pos, int boundary_id) {
    if (pos < 0 || pos >= static_cast<int>(ids.size())) return boundary_id;
    return ids[static_cast<size_t>(pos)];
}

constexpr int kBoundaryId = 1;  // reserved vocabulary row

}  // namespace

ForwardResult forward(std::span<const int> token_ids, const ModelParams& params,
                      const TaggerConfig& cfg) {
    if (token_ids.empty()) throw std::invalid_argument("forward: empty token sequence");
    for (int id : token_ids)
        if (id < 0 || id >= cfg.vocab_size)
            throw std::invalid_argument("forward: token id " + std::to_string(id) +
                                        " outside vocabulary");

    ForwardResult out;
    std::vector<int> ids(token_ids.begin(), token_ids.end());
    if (static_cast<int>(ids.size()) > cfg.max_len) {
        ids.resize(static_cast<size_t>(cfg.max_len));
        out.truncated = true;
    }
    const int n = static_cast<int>(ids.size());
    const int w = cfg.context_window;
    const int d = cfg.embed_dim;

    Matrix features(n, cfg.input_dim());
    for (int i = 0; i < n; ++i) {
        double* fi = features.row_ptr(i);
        for (int off = -w; off <= w; ++off) {
            int id = context_id(ids, i + off, kBoundaryId);
            const double* e = params.embeddings.row_ptr(id);
            double* dst = fi + static_cast<size_t>(off + w) * static_cast<size_t>(d);
            for (int j = 0; j < d; ++j) dst[j] = e[j];
        }
    }

    Matrix h1, h2;
    affine(features, params.w1, params.b1, h1);
    relu_inplace(h1);
    affine(h1, params.w2, params.b2, h2);
    relu_inplace(h2);
    affine(h2, params.w_out, params.b_out, out.logits);

    out.probs = Matrix(n, cfg.num_tags);
    for (int i = 0; i < n; ++i) {
        const double* zi = out.logits.row_ptr(i);
        double* pi = out.probs.row_ptr(i);
        double zmax = zi[0];
        for (int k = 1; k < cfg.num_tags; ++k) zmax = std::max(zmax, zi[k]);
        double sum = 0.0;
        for (int k = 0; k < cfg.num_tags; ++k) {
            pi[k] = std::exp(zi[k] - zmax);
            sum += pi[k];
        }
        for (int k = 0; k < cfg.num_tags; ++k) pi[k] /= sum;
    }

    out.cache.token_ids = std::move(ids);
    out.cache.features = std::move(features);
    out.cache.h1 = std::move(h1);
    out.cache.h2 = std::move(h2);
    out.cache.probs = out.probs;
    out.cache.params_version = params.version;
    return out;
}

CeResult cross_entropy(const Matrix& probs, const TagSequence& gold, double epsilon, int n_total) {
    if (static_cast<int>(gold.size()) != probs.rows)
        throw std::invalid_argument("cross_entropy: gold length does not match probs");
    if (n_total < 1) throw std::invalid_argument("cross_entropy: n_total must be >= 1");

    CeResult res;
    res.dlogits = Matrix(probs.rows, probs.cols);
    const double scale = 1.0 / static_cast<double>(n_total);
    for (int i = 0; i < probs.rows; ++i) {
        int g = gold[static_cast<size_t>(i)];
        if (g < 0 || g >= probs.cols)
            throw std::invalid_argument("cross_entropy: gold tag out of range");
        double p = probs(i, g);
        res.loss -= std::log(p < epsilon ? epsilon : p) * scale;
        for (int k = 0; k < probs.cols; ++k)
            res.dlogits(i, k) = (probs(i, k) - (k == g ? 1.0 : 0.0)) * scale;
    }
    return res;
}

void backward(const ForwardCache& cache, const Matrix& dprobs, const Matrix& dlogits,
              const ModelParams& params, const TaggerConfig& cfg, Gradients& grads) {
    if (cache.params_version != params.version)
        throw std::runtime_error("backward: stale cache (params changed since forward)");
    const int n = static_cast<int>(cache.token_ids.size());
    const int t = cfg.num_tags;
    const bool have_dprobs = dprobs.rows > 0;
    const bool have_dlogits = dlogits.rows > 0;
    if (have_dprobs && (dprobs.rows != n || dprobs.cols != t))
        throw std::invalid_argument("backward: dprobs shape mismatch");
    if (have_dlogits && (dlogits.rows != n || dlogits.cols != t))
        throw std::invalid_argument("backward: dlogits shape mismatch");
    if (!have_dprobs && !have_dlogits)
        throw std::invalid_argument("backward: no upstream gradient given");

    // dL/dz_ij = sum_k dL/dp_ik * p_ik * (delta_kj - p_ij), plus any direct
    // logit-space contribution.
    Matrix dz(n, t);
    for (int i = 0; i < n; ++i) {
        const double* pi = cache.probs.row_ptr(i);
        double* dzi = dz.row_ptr(i);
        if (have_dprobs) {
            const double* dpi = dprobs.row_ptr(i);
            double dot = 0.0;
            for (int k = 0; k < t; ++k) dot += dpi[k] * pi[k];
            for (int j = 0; j < t; ++j) dzi[j] = pi[j] * (dpi[j] - dot);
        }
        if (have_dlogits) {
            const double* dli = dlogits.row_ptr(i);
            for (int j = 0; j < t; ++j) dzi[j] += dli[j];
        }
    }

    // Output layer.
    Matrix dh2(n, cfg.hidden_dim);
    for (int i = 0; i < n; ++i) {
        const double* h2i = cache.h2.row_ptr(i);
        const double* dzi = dz.row_ptr(i);
        for (int j = 0; j < t; ++j) grads.b_out[static_cast<size_t>(j)] += dzi[j];
        for (int k = 0; k < cfg.hidden_dim; ++k) {
            double* gw = grads.w_out.row_ptr(k);
            const double* wk = params.w_out.row_ptr(k);
            double acc = 0.0;
            for (int j = 0; j < t; ++j) {
                gw[j] += h2i[k] * dzi[j];
                acc += wk[j] * dzi[j];
            }
            dh2(i, k) = acc;
        }
    }

    // Second hidden layer (ReLU mask from post-activation values).
    Matrix dh1(n, cfg.hidden_dim);
    for (int i = 0; i < n; ++i) {
        const double* h2i = cache.h2.row_ptr(i);
        const double* h1i = cache.h1.row_ptr(i);
        double* dh2i = dh2.row_ptr(i);
        for (int j = 0; j < cfg.hidden_dim; ++j)
            if (h2i[j] <= 0.0) dh2i[j] = 0.0;
        for (int j = 0; j < cfg.hidden_dim; ++j) grads.b2[static_cast<size_t>(j)] += dh2i[j];
        for (int k = 0; k < cfg.hidden_dim; ++k) {
            double* gw = grads.w2.row_ptr(k);
            const double* wk = params.w2.row_ptr(k);
            double acc = 0.0;
            for (int j = 0; j < cfg.hidden_dim; ++j) {
                gw[j] += h1i[k] * dh2i[j];
                acc += wk[j] * dh2i[j];
            }
            dh1(i, k) = acc;
        }
    }

    // First hidden layer back to the concatenated embedding features.
    const int in_dim = cfg.input_dim();
    Matrix dfeat(n, in_dim);
    for (int i = 0; i < n; ++i) {
        const double* h1i = cache.h1.row_ptr(i);
        const double* fi = cache.features.row_ptr(i);
        double* dh1i = dh1.row_ptr(i);
        for (int j = 0; j < cfg.hidden_dim; ++j)
            if (h1i[j] <= 0.0) dh1i[j] = 0.0;
        for (int j = 0; j < cfg.hidden_dim; ++j) grads.b1[static_cast<size_t>(j)] += dh1i[j];
        double* dfi = dfeat.row_ptr(i);
        for (int k = 0; k < in_dim; ++k) {
            double* gw = grads.w1.row_ptr(k);
            const double* wk = params.w1.row_ptr(k);
            double acc = 0.0;
            for (int j = 0; j < cfg.hidden_dim; ++j) {
                gw[j] += fi[k] * dh1i[j];
                acc += wk[j] * dh1i[j];
            }
            dfi[k] = acc;
        }
    }

    // Scatter feature gradients into embedding rows, boundary included.
    const int w = cfg.context_window;
    const int d = cfg.embed_dim;
    for (int i = 0; i < n; ++i) {
        const double* dfi = dfeat.row_ptr(i);
        for (int off = -w; off <= w; ++off) {
            int id = context_id(cache.token_ids, i + off, kBoundaryId);
            double* ge = grads.embeddings.row_ptr(id);
            const double* src = dfi + static_cast<size_t>(off + w) * static_cast<size_t>(d);
            for (int j = 0; j < d; ++j) ge[j] += src[j];
        }
    }
}

TagSequence predict(const Matrix& probs) {
    TagSequence tags(static_cast<size_t>(probs.rows), 0);
    for (int i = 0; i < probs.rows; ++i) {
        const double* pi = probs.row_ptr(i);
        int best = 0;
        for (int k = 1; k < probs.cols; ++k)
            if (pi[k] > pi[best]) best = k;
        tags[static_cast<size_t>(i)] = best;
    }
    return tags;
}

}  // namespace fmim
