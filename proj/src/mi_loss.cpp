#include "fmim/mi_loss.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace fmim {

namespace {

// ln with the probability clamped to [epsilon, 1]; 0*ln 0 := 0 falls out.
inline double clamped_log(double p, double epsilon) {
    return std::log(p < epsilon ? epsilon : p);
}

}  // namespace

ProbBatch ProbBatch::from_matrix(Matrix probs, Domain origin) {
    ProbBatch b;
    b.row_origin.assign(static_cast<size_t>(probs.rows), origin);
    b.sentence_offsets = {0};
    b.m = std::move(probs);
    b.validate();
    return b;
}

void ProbBatch::validate() const {
    if (m.rows < 1 || m.cols < 1) throw std::invalid_argument("ProbBatch: empty matrix");
    if (row_origin.size() != static_cast<size_t>(m.rows))
        throw std::invalid_argument("ProbBatch: row_origin size mismatch");
    if (sentence_offsets.empty() || sentence_offsets[0] != 0)
        throw std::invalid_argument("ProbBatch: sentence_offsets must start at 0");
    for (size_t j = 1; j < sentence_offsets.size(); ++j)
        if (sentence_offsets[j] <= sentence_offsets[j - 1] || sentence_offsets[j] >= m.rows)
            throw std::invalid_argument("ProbBatch: sentence_offsets not increasing");
    for (int i = 0; i < m.rows; ++i) {
        double sum = 0.0;
        for (int k = 0; k < m.cols; ++k) {
            double p = m(i, k);
            if (!(p >= 0.0 && p <= 1.0))
                throw std::invalid_argument("ProbBatch: entry outside [0,1]");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("ProbBatch: row does not sum to 1");
    }
}

void MiLossConfig::validate(int num_tags) const {
    if (alpha < 0.0) throw std::invalid_argument("MiLossConfig: alpha must be >= 0");
    if (num_tags < 1) throw std::invalid_argument("MiLossConfig: num_tags must be >= 1");
    double max_rho = std::log(static_cast<double>(num_tags));
    if (rho < 0.0 || rho > max_rho)
        throw std::invalid_argument("MiLossConfig: rho must lie in [0, ln T]");
    if (!(epsilon > 0.0) || epsilon > 1e-6)
        throw std::invalid_argument("MiLossConfig: epsilon must lie in (0, 1e-6]");
}

const char* to_string(MiBranch b) {
    return b == MiBranch::BelowThreshold ? "below_threshold" : "at_or_above_threshold";
}

std::string MiLossResult::to_json() const {
    nlohmann::json j;
    j["delta1"] = delta1;
    j["delta2"] = delta2;
    j["loss"] = loss;
    j["branch"] = to_string(branch);
    return j.dump();
}

ProbBatch assemble_prob_matrix(const std::vector<Matrix>& source_probs,
                               const std::vector<Matrix>& target_probs) {
    if (source_probs.empty() || target_probs.empty())
        throw std::invalid_argument(
            "assemble_prob_matrix: both source and target outputs are required");

    int num_tags = source_probs[0].cols;
    int total_rows = 0;
    auto scan = [&](const std::vector<Matrix>& probs) {
        for (const Matrix& p : probs) {
            if (p.cols != num_tags)
                throw std::invalid_argument("assemble_prob_matrix: tag-count mismatch");
            if (p.rows < 1)
                throw std::invalid_argument("assemble_prob_matrix: empty sentence output");
            total_rows += p.rows;
        }
    };
    scan(source_probs);
    scan(target_probs);

    ProbBatch batch;
    batch.m = Matrix(total_rows, num_tags);
    batch.row_origin.reserve(static_cast<size_t>(total_rows));
    int row = 0;
    auto append = [&](const std::vector<Matrix>& probs, Domain origin) {
        for (const Matrix& p : probs) {
            batch.sentence_offsets.push_back(row);
            for (int i = 0; i < p.rows; ++i, ++row) {
                batch.row_origin.push_back(origin);
                for (int k = 0; k < num_tags; ++k) batch.m(row, k) = p(i, k);
            }
        }
    };
    append(source_probs, Domain::Source);
    append(target_probs, Domain::Target);
    batch.validate();
    return batch;
}

std::vector<double> marginal_distribution(const ProbBatch& batch) {
    const Matrix& m = batch.m;
    std::vector<double> mean(static_cast<size_t>(m.cols), 0.0);
    for (int i = 0; i < m.rows; ++i)
        for (int k = 0; k < m.cols; ++k) mean[static_cast<size_t>(k)] += m(i, k);
    for (double& v : mean) v /= static_cast<double>(m.rows);
    return mean;
}

double marginal_entropy(const ProbBatch& batch, double epsilon) {
    std::vector<double> mean = marginal_distribution(batch);
    double h = 0.0;
    for (double p : mean) h -= p * clamped_log(p, epsilon);
    return h;
}

double neg_conditional_entropy(const ProbBatch& batch, double epsilon) {
    const Matrix& m = batch.m;
    double acc = 0.0;
    for (int i = 0; i < m.rows; ++i) {
        for (int k = 0; k < m.cols; ++k) {
            double p = m(i, k);
            acc += p * clamped_log(p, epsilon);
        }
    }
    return acc / static_cast<double>(m.rows);
}

MiLossResult mi_loss_and_grad(const ProbBatch& batch, const MiLossConfig& cfg) {
    batch.validate();
    // The ln-T upper bound on rho is a run-config concern (checked against the
    // tag scheme in train_run); the kernel only needs sane local values.
    if (cfg.alpha < 0.0 || cfg.rho < 0.0 || !(cfg.epsilon > 0.0) || cfg.epsilon > 1e-6)
        throw std::invalid_argument("mi_loss_and_grad: bad config");
    const Matrix& m = batch.m;
    const double n = static_cast<double>(m.rows);

    std::vector<double> mean = marginal_distribution(batch);
    std::vector<double> log_mean(mean.size());
    for (size_t k = 0; k < mean.size(); ++k) log_mean[k] = clamped_log(mean[k], cfg.epsilon);

    MiLossResult res;
    res.delta1 = 0.0;
    for (size_t k = 0; k < mean.size(); ++k) res.delta1 -= mean[k] * log_mean[k];
    res.delta2 = neg_conditional_entropy(batch, cfg.epsilon);

    // Equality takes the at-or-above branch.
    res.branch = res.delta1 < cfg.rho ? MiBranch::BelowThreshold : MiBranch::AtOrAboveThreshold;
    res.loss = res.branch == MiBranch::BelowThreshold ? -(res.delta1 + res.delta2) : -res.delta2;

    res.grad_m = Matrix(m.rows, m.cols);
    if (res.branch == MiBranch::BelowThreshold) {
        for (int i = 0; i < m.rows; ++i)
            for (int k = 0; k < m.cols; ++k)
                res.grad_m(i, k) =
                    (log_mean[static_cast<size_t>(k)] - clamped_log(m(i, k), cfg.epsilon)) / n;
    } else {
        for (int i = 0; i < m.rows; ++i)
            for (int k = 0; k < m.cols; ++k)
                res.grad_m(i, k) = -(clamped_log(m(i, k), cfg.epsilon) + 1.0) / n;
    }
    return res;
}

double combine_losses(double ce, const MiLossResult& mi, double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("combine_losses: alpha must be >= 0");
    if (!std::isfinite(ce) || !std::isfinite(mi.loss))
        throw std::runtime_error("combine_losses: non-finite loss");
    return ce + alpha * mi.loss;
}

double mi_value(const ProbBatch& batch, double epsilon) {
    return marginal_entropy(batch, epsilon) + neg_conditional_entropy(batch, epsilon);
}

}  // namespace fmim
