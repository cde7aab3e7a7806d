#pragma once

#include <string>
#include <vector>

#include "fmim/matrix.hpp"
#include "fmim/tagging.hpp"

namespace fmim {

enum class MatchMode { ABSA, ATE, NER };

const char* to_string(MatchMode m);
MatchMode match_mode_from_string(const std::string& s);  // throws on unknown

struct ScoreReport {
    long true_positives = 0;
    long predicted = 0;
    long gold = 0;
    double precision = 0.0;  // TP/predicted, 0 when nothing predicted
    double recall = 0.0;     // TP/gold, 0 when no gold spans
    double micro_f1 = 0.0;   // harmonic mean, 0 when P+R == 0
    MatchMode mode = MatchMode::ABSA;

    std::string to_json() const;
};

// Span-level micro scoring. ABSA/NER: a true positive needs (start, end,
// label) to match exactly; ATE ignores the label. Duplicate spans within a
// sentence are collapsed before matching. Throws std::invalid_argument when
// pred and gold sentence lists differ in length.
ScoreReport score_spans(const std::vector<std::vector<Span>>& pred,
                        const std::vector<std::vector<Span>>& gold, MatchMode mode);

struct SentenceDiagnostics {
    double h_y = 0.0;          // entropy of the row-mean tag distribution
    double h_y_given_x = 0.0;  // mean per-token entropy
    double mi = 0.0;           // h_y - h_y_given_x
    std::vector<Span> spans;   // argmax decode of the sentence

    std::string to_json(const std::vector<std::string>& tokens) const;
};

// The per-sentence analogue of the batch MI quantities, plus the decoded
// spans.
SentenceDiagnostics sentence_diagnostics(const Matrix& probs, double epsilon,
                                         const TagScheme& scheme);

}  // namespace fmim
