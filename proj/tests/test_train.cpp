#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fmim/checkpoint.hpp"
#include "fmim/train.hpp"

using namespace fmim;

namespace {

SynthConfig small_synth() {
    SynthConfig cfg;
    cfg.n_source_train = 24;
    cfg.n_target_unlabeled = 24;
    cfg.n_target_test = 12;
    cfg.shared_vocab_size = 30;
    cfg.source_aspect_lexicon_size = 6;
    cfg.target_aspect_lexicon_size = 6;
    cfg.seed = 5;
    return cfg;
}

RunConfig small_run() {
    RunConfig cfg;
    cfg.tagger.embed_dim = 8;
    cfg.tagger.hidden_dim = 12;
    cfg.tagger.max_len = 32;
    cfg.optim.lr = 5e-3;
    cfg.optim.weight_decay = 0.0;
    cfg.batch_size = 8;
    cfg.epochs = 2;
    cfg.seed = 21;
    return cfg;
}

}  // namespace

TEST_CASE("train_run is deterministic and logs per-step MI statistics") {
    SyntheticData data = generate_synthetic(small_synth());
    RunConfig cfg = small_run();

    TrainOutput a = train_run(cfg, data.source_train, data.target_unlabeled);
    TrainOutput b = train_run(cfg, data.source_train, data.target_unlabeled);
    CHECK(a.metrics_jsonl == b.metrics_jsonl);  // bit-identical logs
    CHECK(a.checkpoint.params.w1.a == b.checkpoint.params.w1.a);
    CHECK_FALSE(a.steps.empty());
    CHECK(a.steps.size() == static_cast<size_t>(cfg.resolved_epochs()) * 3);  // 24/8 per epoch

    for (const StepMetrics& s : a.steps) {
        CHECK(s.delta1 >= 0.0);
        CHECK(s.delta1 <= std::log(4.0) + 1e-9);
        CHECK(s.delta2 <= 1e-12);
        bool below = s.branch == MiBranch::BelowThreshold;
        CHECK(below == (s.delta1 < cfg.mi.rho));
        CHECK(s.total == doctest::Approx(s.ce + cfg.mi.alpha * s.mi_loss).epsilon(1e-12));
    }

    RunConfig other = cfg;
    other.seed = 22;
    TrainOutput c = train_run(other, data.source_train, data.target_unlabeled);
    CHECK(a.metrics_jsonl != c.metrics_jsonl);
}

TEST_CASE("alpha=0 keeps MI logging but trains on CE alone") {
    SyntheticData data = generate_synthetic(small_synth());
    RunConfig cfg = small_run();
    cfg.mi.alpha = 0.0;
    TrainOutput out = train_run(cfg, data.source_train, data.target_unlabeled);
    for (const StepMetrics& s : out.steps) {
        CHECK(s.total == s.ce);  // exact: alpha * mi adds zero
        CHECK(std::isfinite(s.mi_loss));
        CHECK(std::isfinite(s.delta1));
    }
}

TEST_CASE("checkpoint save/load round-trips bit-exactly") {
    SyntheticData data = generate_synthetic(small_synth());
    RunConfig cfg = small_run();
    TrainOutput out = train_run(cfg, data.source_train, data.target_unlabeled);

    std::string path = (std::filesystem::temp_directory_path() / "fmim_test.ckpt").string();
    save_checkpoint(path, out.checkpoint);
    Checkpoint loaded = load_checkpoint(path);

    CHECK(loaded.params.embeddings.a == out.checkpoint.params.embeddings.a);
    CHECK(loaded.params.w1.a == out.checkpoint.params.w1.a);
    CHECK(loaded.params.b_out == out.checkpoint.params.b_out);
    CHECK(loaded.vocab.id_to_token == out.checkpoint.vocab.id_to_token);
    CHECK(loaded.scheme.tags == out.checkpoint.scheme.tags);
    REQUIRE(loaded.optim.has_value());
    CHECK(loaded.optim->t == out.checkpoint.optim->t);
    CHECK(loaded.optim->m.w1.a == out.checkpoint.optim->m.w1.a);
    CHECK(loaded.optim->v.w1.a == out.checkpoint.optim->v.w1.a);

    ScoreReport before = evaluate_model(out.checkpoint, data.target_test, MatchMode::ABSA);
    ScoreReport after = evaluate_model(loaded, data.target_test, MatchMode::ABSA);
    CHECK(before.micro_f1 == after.micro_f1);
    CHECK(before.true_positives == after.true_positives);
    std::remove(path.c_str());
}

TEST_CASE("load_checkpoint rejects files that are not checkpoints") {
    std::string path = (std::filesystem::temp_directory_path() / "fmim_not_ckpt.tsv").string();
    {
        std::ofstream out(path);
        out << "token\tO\n\n";
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/nothing.ckpt"), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("evaluation modes: relaxing to ATE cannot hurt") {
    SyntheticData data = generate_synthetic(small_synth());
    RunConfig cfg = small_run();
    cfg.epochs = 4;
    TrainOutput out = train_run(cfg, data.source_train, data.target_unlabeled);
    ScoreReport absa = evaluate_model(out.checkpoint, data.target_test, MatchMode::ABSA);
    ScoreReport ate = evaluate_model(out.checkpoint, data.target_test, MatchMode::ATE);
    CHECK(ate.micro_f1 >= absa.micro_f1 - 1e-12);
}

TEST_CASE("evaluate_model rejects a scheme mismatch") {
    SyntheticData data = generate_synthetic(small_synth());
    RunConfig cfg = small_run();
    cfg.epochs = 1;
    TrainOutput out = train_run(cfg, data.source_train, data.target_unlabeled);

    Corpus ner_test;
    ner_test.scheme = TagScheme::ner_bio();
    Sentence s;
    s.tokens = {"x"};
    s.gold = TagSequence{0};
    ner_test.sentences.push_back(s);
    CHECK_THROWS_AS(evaluate_model(out.checkpoint, ner_test, MatchMode::NER),
                    std::invalid_argument);
}

TEST_CASE("train_run validates inputs") {
    SyntheticData data = generate_synthetic(small_synth());
    RunConfig cfg = small_run();

    Corpus unlabeled_src = data.source_train;
    unlabeled_src.sentences[0].gold.reset();
    CHECK_THROWS_AS(train_run(cfg, unlabeled_src, data.target_unlabeled),
                    std::invalid_argument);

    Corpus empty_target;
    empty_target.scheme = data.target_unlabeled.scheme;
    CHECK_THROWS_AS(train_run(cfg, data.source_train, empty_target), std::invalid_argument);

    RunConfig bad = cfg;
    bad.mi.rho = 2.0;  // above ln 4 for the unified scheme
    CHECK_THROWS_AS(train_run(bad, data.source_train, data.target_unlabeled),
                    std::invalid_argument);
}

TEST_CASE("non-finite losses abort with a batch dump") {
    SyntheticData data = generate_synthetic(small_synth());
    RunConfig cfg = small_run();
    cfg.optim.lr = 1e280;  // guaranteed overflow after the first step
    cfg.epochs = 1;
    try {
        train_run(cfg, data.source_train, data.target_unlabeled);
        FAIL("expected TrainAbortError");
    } catch (const TrainAbortError& e) {
        CHECK(e.dump.find("\"step\"") != std::string::npos);
        CHECK(e.dump.find("\"source_indices\"") != std::string::npos);
    }
}

TEST_CASE("NER task trains end to end on a BIO corpus") {
    TagScheme bio = TagScheme::ner_bio();
    auto sentence = [&](const std::vector<std::string>& toks,
                        const std::vector<std::string>& tags, Domain d) {
        Sentence s;
        s.tokens = toks;
        s.domain = d;
        if (!tags.empty()) {
            TagSequence g;
            for (const auto& t : tags) g.push_back(bio.index_of(t));
            s.gold = g;
        }
        return s;
    };

    Corpus src, tgt, test;
    src.scheme = tgt.scheme = test.scheme = bio;
    for (int i = 0; i < 12; ++i) {
        src.sentences.push_back(sentence({"mr", "smith", "visited", "paris", "today"},
                                         {"O", "B-PER", "O", "B-LOC", "O"}, Domain::Source));
        src.sentences.push_back(sentence({"acme", "corp", "hired", "jones"},
                                         {"B-ORG", "I-ORG", "O", "B-PER"}, Domain::Source));
        tgt.sentences.push_back(sentence({"dr", "lee", "left", "oslo"}, {}, Domain::Target));
    }
    test.sentences.push_back(sentence({"mr", "smith", "visited", "paris"},
                                      {"O", "B-PER", "O", "B-LOC"}, Domain::Target));

    RunConfig cfg = small_run();
    cfg.task = MatchMode::NER;
    cfg.epochs = -1;  // NER default
    CHECK(cfg.resolved_epochs() == 3);
    cfg.batch_size = 4;

    TrainOutput out = train_run(cfg, src, tgt);
    CHECK(out.checkpoint.scheme.tags == bio.tags);
    CHECK(out.checkpoint.config.num_tags == 9);
    for (const StepMetrics& s : out.steps) CHECK(s.delta1 <= std::log(9.0) + 1e-9);

    ScoreReport r = evaluate_model(out.checkpoint, test, MatchMode::NER);
    CHECK(r.gold == 2);  // scoring path works on BIO spans
}

TEST_CASE("diagnose_model matches sentence_diagnostics columns") {
    SyntheticData data = generate_synthetic(small_synth());
    RunConfig cfg = small_run();
    cfg.epochs = 1;
    TrainOutput out = train_run(cfg, data.source_train, data.target_unlabeled);
    std::vector<DiagnosedSentence> rows = diagnose_model(out.checkpoint, data.target_test);
    REQUIRE(rows.size() == data.target_test.sentences.size());
    for (const DiagnosedSentence& r : rows) {
        CHECK(r.diag.mi >= -1e-9);
        CHECK(r.diag.mi == doctest::Approx(r.diag.h_y - r.diag.h_y_given_x).epsilon(1e-12));
    }

    std::vector<DiagnosedSentence> again = diagnose_model(out.checkpoint, data.target_test);
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].diag.h_y == again[i].diag.h_y);
        CHECK(rows[i].diag.spans == again[i].diag.spans);
    }
}
