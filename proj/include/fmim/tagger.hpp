#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fmim/matrix.hpp"
#include "fmim/tagging.hpp"

namespace fmim {

// Desk-scale differentiable tagger: trainable token embeddings, a context
// window concatenation encoder, and a two-hidden-layer ReLU MLP head with
// softmax output.
struct TaggerConfig {
    int vocab_size = 0;      // includes the reserved UNK and BOUNDARY rows
    int embed_dim = 64;
    int context_window = 1;  // radius w; input dim is (2w+1)*embed_dim
    int hidden_dim = 384;
    int num_layers = 2;      // fixed
    int num_tags = 0;
    int max_len = 128;
    uint64_t seed = 0;

    int input_dim() const { return (2 * context_window + 1) * embed_dim; }
    void validate() const;  // throws std::invalid_argument
};

// All trainable values. The same shape triple serves as the gradient
// accumulator and as the optimizer moment buffers.
struct ParamSet {
    Matrix embeddings;            // vocab_size x embed_dim
    Matrix w1;                    // input_dim x hidden_dim
    std::vector<double> b1;       // hidden_dim
    Matrix w2;                    // hidden_dim x hidden_dim
    std::vector<double> b2;       // hidden_dim
    Matrix w_out;                 // hidden_dim x num_tags
    std::vector<double> b_out;    // num_tags
    uint64_t version = 0;         // bumped by the optimizer; guards stale caches

    static ParamSet zeros_like(const TaggerConfig& cfg);
    void zero();
    bool same_shape(const ParamSet& o) const;
    bool all_finite() const;

    struct Block {
        const char* name;
        std::vector<double>* values;
        bool is_bias;
    };
    // Fixed-order traversal of every parameter array; shared by the
    // optimizer, the checkpoint writer and the gradient checks.
    std::vector<Block> blocks();
    std::vector<Block> blocks() const;  // pointers into a const set; do not write
};

using ModelParams = ParamSet;
using Gradients = ParamSet;

// Affine layers uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], embeddings
// uniform in [-0.1, 0.1]; deterministic given the rng state.
ModelParams init_params(const TaggerConfig& cfg, std::mt19937_64& rng);

struct ForwardCache {
    std::vector<int> token_ids;  // post-truncation
    Matrix features;             // n x input_dim
    Matrix h1;                   // post-ReLU
    Matrix h2;                   // post-ReLU
    Matrix probs;                // n x T
    uint64_t params_version = 0;
};

struct ForwardResult {
    Matrix logits;  // n x T
    Matrix probs;   // n x T, rows sum to 1
    ForwardCache cache;
    bool truncated = false;
};

// Out-of-window context positions read the reserved BOUNDARY embedding row.
// Token ids must be < vocab_size (vocab error otherwise); inputs longer than
// max_len are truncated and flagged.
ForwardResult forward(std::span<const int> token_ids, const ModelParams& params,
                      const TaggerConfig& cfg);

struct CeResult {
    double loss = 0.0;  // -(1/n_total) sum of log prob at the gold tag
    Matrix dlogits;     // (1/n_total) * (probs - onehot(gold)); softmax shortcut
};

// Token-mean cross entropy. n_total is the labeled-token count of the whole
// batch so that per-sentence contributions sum to the batch loss.
CeResult cross_entropy(const Matrix& probs, const TagSequence& gold, double epsilon, int n_total);

// Exact chain rule back to every parameter. dprobs enters through the softmax
// Jacobian, dlogits is added directly past it; either may be empty. Gradients
// accumulate into `grads`. Throws std::runtime_error on a stale cache.
void backward(const ForwardCache& cache, const Matrix& dprobs, const Matrix& dlogits,
              const ModelParams& params, const TaggerConfig& cfg, Gradients& grads);

// Per-token argmax; ties break toward the lowest tag index (O first).
TagSequence predict(const Matrix& probs);

}  // namespace fmim
