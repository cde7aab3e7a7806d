#include "fmim/eval.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "fmim/mi_loss.hpp"
#include "fmim/tagger.hpp"

namespace fmim {

const char* to_string(MatchMode m) {
    switch (m) {
        case MatchMode::ABSA: return "ABSA";
        case MatchMode::ATE: return "ATE";
        default: return "NER";
    }
}

MatchMode match_mode_from_string(const std::string& s) {
    if (s == "ABSA" || s == "absa") return MatchMode::ABSA;
    if (s == "ATE" || s == "ate") return MatchMode::ATE;
    if (s == "NER" || s == "ner") return MatchMode::NER;
    throw std::invalid_argument("unknown evaluation mode: " + s);
}

std::string ScoreReport::to_json() const {
    nlohmann::json j;
    j["true_positives"] = true_positives;
    j["predicted"] = predicted;
    j["gold"] = gold;
    j["precision"] = precision;
    j["recall"] = recall;
    j["micro_f1"] = micro_f1;
    j["mode"] = to_string(mode);
    return j.dump();
}

ScoreReport score_spans(const std::vector<std::vector<Span>>& pred,
                        const std::vector<std::vector<Span>>& gold, MatchMode mode) {
    if (pred.size() != gold.size())
        throw std::invalid_argument("score_spans: pred/gold sentence counts differ");

    // ATE relaxes the match to boundaries only; drop labels before matching.
    auto canonical = [mode](const std::vector<Span>& spans) {
        std::set<Span> out;
        for (const Span& s : spans)
            out.insert(mode == MatchMode::ATE ? Span{s.start, s.end, ""} : s);
        return out;
    };

    ScoreReport report;
    report.mode = mode;
    for (size_t i = 0; i < pred.size(); ++i) {
        std::set<Span> p = canonical(pred[i]);
        std::set<Span> g = canonical(gold[i]);
        report.predicted += static_cast<long>(p.size());
        report.gold += static_cast<long>(g.size());
        for (const Span& s : p)
            if (g.count(s)) ++report.true_positives;
    }
    report.precision = report.predicted == 0
                           ? 0.0
                           : static_cast<double>(report.true_positives) /
                                 static_cast<double>(report.predicted);
    report.recall = report.gold == 0 ? 0.0
                                     : static_cast<double>(report.true_positives) /
                                           static_cast<double>(report.gold);
    report.micro_f1 = (report.precision + report.recall) == 0.0
                          ? 0.0
                          : 2.0 * report.precision * report.recall /
                                (report.precision + report.recall);
    return report;
}

std::string SentenceDiagnostics::to_json(const std::vector<std::string>& tokens) const {
    nlohmann::json j;
    j["h_y"] = h_y;
    j["h_y_given_x"] = h_y_given_x;
    j["mi"] = mi;
    j["tokens"] = tokens;
    nlohmann::json spans_json = nlohmann::json::array();
    for (const Span& s : spans) {
        nlohmann::json sj;
        sj["start"] = s.start;
        sj["end"] = s.end;
        sj["label"] = s.label;
        spans_json.push_back(sj);
    }
    j["spans"] = spans_json;
    return j.dump();
}

SentenceDiagnostics sentence_diagnostics(const Matrix& probs, double epsilon,
                                         const TagScheme& scheme) {
    ProbBatch batch = ProbBatch::from_matrix(probs);
    SentenceDiagnostics d;
    d.h_y = marginal_entropy(batch, epsilon);
    d.h_y_given_x = -neg_conditional_entropy(batch, epsilon);
    d.mi = d.h_y - d.h_y_given_x;
    d.spans = extract_spans(predict(probs), scheme);
    return d;
}

}  // namespace fmim
