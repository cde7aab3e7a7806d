#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmim/checkpoint.hpp"
#include "fmim/data.hpp"
#include "fmim/eval.hpp"
#include "fmim/mi_loss.hpp"
#include "fmim/optim.hpp"
#include "fmim/tagger.hpp"

namespace fmim {

// Full recipe for one seeded run. Flags and config-file keys mirror these
// fields one to one.
struct RunConfig {
    MatchMode task = MatchMode::ABSA;
    std::string source_train_path;
    std::string target_unlabeled_path;
    std::string target_test_path;

    TaggerConfig tagger;     // vocab_size/num_tags filled in during setup
    OptimConfig optim;
    MiLossConfig mi;         // alpha 0.01, rho 0.5 defaults

    int batch_size = 16;
    int epochs = -1;         // -1: 20 for ABSA/ATE, 3 for NER
    int min_count = 1;
    uint64_t seed = 42;
    std::string out_dir;

    int resolved_epochs() const {
        if (epochs > 0) return epochs;
        return task == MatchMode::NER ? 3 : 20;
    }
    TagScheme scheme() const {
        return task == MatchMode::NER ? TagScheme::ner_bio() : TagScheme::unified_sentiment();
    }
};

struct StepMetrics {
    int step = 0;   // global step, 1-based
    int epoch = 0;  // 1-based
    double ce = 0.0;
    double delta1 = 0.0;
    double delta2 = 0.0;
    double mi_loss = 0.0;
    double total = 0.0;
    MiBranch branch = MiBranch::AtOrAboveThreshold;

    std::string to_json() const;
};

struct TrainOutput {
    Checkpoint checkpoint;
    std::vector<StepMetrics> steps;
    std::string metrics_jsonl;  // one JSON line per step
};

// Raised when a step produces a non-finite loss; carries a diagnostic dump of
// the offending batch.
struct TrainAbortError : std::runtime_error {
    std::string dump;
    TrainAbortError(const std::string& what, std::string dump_json)
        : std::runtime_error(what), dump(std::move(dump_json)) {}
};

// The joint training loop: per step, sample a source and a target mini-batch,
// forward both, cross entropy on the source batch only, assemble the
// probability matrix over both, MI loss and gradient, combined backward,
// AdamW step. Fully deterministic given the config seed. Corpora must already
// share the run's tag scheme; token ids are assigned here from a vocabulary
// built over both corpora.
TrainOutput train_run(const RunConfig& cfg, const Corpus& source_train,
                      const Corpus& target_unlabeled);

// Decode (predict -> extract_spans) and score a labeled corpus.
ScoreReport evaluate_model(const Checkpoint& ckpt, const Corpus& test, MatchMode mode);

struct DiagnosedSentence {
    std::vector<std::string> tokens;
    SentenceDiagnostics diag;
};

std::vector<DiagnosedSentence> diagnose_model(const Checkpoint& ckpt, const Corpus& input);

}  // namespace fmim
