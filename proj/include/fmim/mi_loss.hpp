#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fmim/matrix.hpp"

namespace fmim {

enum class Domain : uint8_t { Source = 0, Target = 1 };

// Row-stochastic N x T matrix of per-token predicted tag distributions over a
// concatenated source+target mini-batch, with bookkeeping for where each row
// came from.
struct ProbBatch {
    Matrix m;                            // N x T, rows sum to 1
    std::vector<Domain> row_origin;      // size N
    std::vector<int> sentence_offsets;   // first row of each sentence

    int num_rows() const { return m.rows; }
    int num_tags() const { return m.cols; }

    // Wraps a bare matrix as one pseudo-sentence (used by tests and
    // per-sentence diagnostics).
    static ProbBatch from_matrix(Matrix probs, Domain origin = Domain::Target);

    // Enforces the type invariants: entries in [0,1], rows sum to 1 within
    // 1e-9, N >= 1, bookkeeping sizes consistent. Throws std::invalid_argument.
    void validate() const;
};

struct MiLossConfig {
    double alpha = 0.01;     // weight of the MI loss in the combined objective
    double rho = 0.5;        // marginal-entropy threshold, nats
    double epsilon = 1e-12;  // log-clamp floor

    // num_tags bounds rho: 0 <= rho <= ln T. Throws std::invalid_argument.
    void validate(int num_tags) const;
};

enum class MiBranch { BelowThreshold, AtOrAboveThreshold };

const char* to_string(MiBranch b);

struct MiLossResult {
    double delta1 = 0.0;  // marginal entropy, nats
    double delta2 = 0.0;  // negative conditional entropy, nats (<= 0)
    double loss = 0.0;    // nats
    MiBranch branch = MiBranch::AtOrAboveThreshold;
    Matrix grad_m;        // d loss / d M, entries treated as free variables

    // {"delta1":..,"delta2":..,"loss":..,"branch":".."} for training logs.
    std::string to_json() const;
};

// Stacks per-sentence probability matrices, all source sentences first.
// Throws std::invalid_argument on a tag-count mismatch or when either side is
// empty (the joint protocol needs both domains).
ProbBatch assemble_prob_matrix(const std::vector<Matrix>& source_probs,
                               const std::vector<Matrix>& target_probs);

// Mean of the rows: the batch-level tag distribution.
std::vector<double> marginal_distribution(const ProbBatch& batch);

// Entropy of the marginal distribution, in [0, ln T].
double marginal_entropy(const ProbBatch& batch, double epsilon);

// Mean over rows of sum_k p log p, in [-ln T, 0].
double neg_conditional_entropy(const ProbBatch& batch, double epsilon);

// Thresholded MI loss and its exact gradient with respect to the matrix
// entries. Below the threshold the loss is -(delta1 + delta2); at or above it
// the marginal-entropy term is dropped and the loss is -delta2.
MiLossResult mi_loss_and_grad(const ProbBatch& batch, const MiLossConfig& cfg);

// L_train = L_CE + alpha * L_MI. Throws std::runtime_error when any input is
// non-finite (training must abort rather than continue on garbage).
double combine_losses(double ce, const MiLossResult& mi, double alpha);

// Batch-approximated mutual information: marginal entropy plus negative
// conditional entropy.
double mi_value(const ProbBatch& batch, double epsilon);

}  // namespace fmim
