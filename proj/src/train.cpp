#include "fmim/train.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fmim/rng.hpp"

namespace fmim {

std::string StepMetrics::to_json() const {
    nlohmann::json j;
    j["step"] = step;
    j["epoch"] = epoch;
    j["ce"] = ce;
    j["delta1"] = delta1;
    j["delta2"] = delta2;
    j["mi_loss"] = mi_loss;
    j["total"] = total;
    j["branch"] = to_string(branch);
    return j.dump();
}

namespace {

void check_scheme(const TagScheme& expected, const TagScheme& got, const char* what) {
    if (expected.tags != got.tags)
        throw std::invalid_argument(std::string("tag scheme mismatch for ") + what);
}

std::string batch_dump(int step, int epoch, const BatchPair& pair, const std::string& message) {
    nlohmann::json j;
    j["step"] = step;
    j["epoch"] = epoch;
    j["source_indices"] = pair.source;
    j["target_indices"] = pair.target;
    j["error"] = message;
    return j.dump();
}

}  // namespace

TrainOutput train_run(const RunConfig& cfg, const Corpus& source_train,
                      const Corpus& target_unlabeled) {
    TagScheme scheme = cfg.scheme();
    check_scheme(scheme, source_train.scheme, "source train corpus");
    check_scheme(scheme, target_unlabeled.scheme, "target unlabeled corpus");
    for (const Sentence& s : source_train.sentences)
        if (!s.gold) throw std::invalid_argument("train_run: unlabeled sentence in source corpus");

    cfg.optim.validate();
    cfg.mi.validate(scheme.size());
    if (cfg.batch_size < 1) throw std::invalid_argument("train_run: batch_size must be >= 1");

    Corpus ds = source_train;
    Corpus dt = target_unlabeled;
    Vocabulary vocab = build_vocab({&ds, &dt}, cfg.min_count);

    TaggerConfig tagger_cfg = cfg.tagger;
    tagger_cfg.vocab_size = vocab.size();
    tagger_cfg.num_tags = scheme.size();
    tagger_cfg.seed = cfg.seed;
    tagger_cfg.validate();

    truncate_corpus(ds, tagger_cfg.max_len);
    truncate_corpus(dt, tagger_cfg.max_len);
    assign_token_ids(ds, vocab);
    assign_token_ids(dt, vocab);

    std::mt19937_64 init_rng = make_rng(cfg.seed, "init");
    ModelParams params = init_params(tagger_cfg, init_rng);
    OptimState opt_state = OptimState::init(params);
    Gradients grads = ParamSet::zeros_like(tagger_cfg);

    JointBatchSampler sampler(ds.sentences.size(), dt.sentences.size(), cfg.batch_size,
                              derive_seed(cfg.seed, "batches"));

    TrainOutput out;
    std::ostringstream log;
    const int epochs = cfg.resolved_epochs();
    int step = 0;
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        for (const BatchPair& pair : sampler.next_epoch()) {
            ++step;
            try {
                std::vector<ForwardResult> src_fwd, tgt_fwd;
                src_fwd.reserve(pair.source.size());
                tgt_fwd.reserve(pair.target.size());
                int n_total = 0;
                for (int idx : pair.source) {
                    const Sentence& s = ds.sentences[static_cast<size_t>(idx)];
                    src_fwd.push_back(forward(s.token_ids, params, tagger_cfg));
                    n_total += s.length();
                }
                for (int idx : pair.target) {
                    const Sentence& s = dt.sentences[static_cast<size_t>(idx)];
                    tgt_fwd.push_back(forward(s.token_ids, params, tagger_cfg));
                }

                // Cross entropy over labeled (source) tokens, token-mean.
                double ce = 0.0;
                std::vector<Matrix> src_dlogits(src_fwd.size());
                for (size_t j = 0; j < src_fwd.size(); ++j) {
                    const Sentence& s = ds.sentences[static_cast<size_t>(pair.source[j])];
                    CeResult ce_res =
                        cross_entropy(src_fwd[j].probs, *s.gold, cfg.mi.epsilon, n_total);
                    ce += ce_res.loss;
                    src_dlogits[j] = std::move(ce_res.dlogits);
                }

                // MI loss over the concatenated batch.
                std::vector<Matrix> src_probs, tgt_probs;
                for (const auto& f : src_fwd) src_probs.push_back(f.probs);
                for (const auto& f : tgt_fwd) tgt_probs.push_back(f.probs);
                ProbBatch batch = assemble_prob_matrix(src_probs, tgt_probs);
                MiLossResult mi = mi_loss_and_grad(batch, cfg.mi);
                double total = combine_losses(ce, mi, cfg.mi.alpha);

                grads.zero();
                Matrix empty;
                int row = 0;
                auto mi_dprobs = [&](int n_rows) {
                    Matrix d(n_rows, tagger_cfg.num_tags);
                    for (int i = 0; i < n_rows; ++i)
                        for (int k = 0; k < tagger_cfg.num_tags; ++k)
                            d(i, k) = cfg.mi.alpha * mi.grad_m(row + i, k);
                    row += n_rows;
                    return d;
                };
                for (size_t j = 0; j < src_fwd.size(); ++j) {
                    Matrix dprobs = mi_dprobs(src_fwd[j].probs.rows);
                    backward(src_fwd[j].cache, cfg.mi.alpha > 0.0 ? dprobs : empty,
                             src_dlogits[j], params, tagger_cfg, grads);
                }
                for (auto& f : tgt_fwd) {
                    Matrix dprobs = mi_dprobs(f.probs.rows);
                    if (cfg.mi.alpha > 0.0) {
                        backward(f.cache, dprobs, empty, params, tagger_cfg, grads);
                    }
                }

                adamw_step(params, grads, opt_state, cfg.optim);

                StepMetrics sm;
                sm.step = step;
                sm.epoch = epoch;
                sm.ce = ce;
                sm.delta1 = mi.delta1;
                sm.delta2 = mi.delta2;
                sm.mi_loss = mi.loss;
                sm.total = total;
                sm.branch = mi.branch;
                out.steps.push_back(sm);
                log << sm.to_json() << '\n';
            } catch (const std::exception& e) {
                throw TrainAbortError(std::string("training aborted at step ") +
                                          std::to_string(step) + ": " + e.what(),
                                      batch_dump(step, epoch, pair, e.what()));
            }
        }
    }

    out.metrics_jsonl = log.str();
    out.checkpoint.config = tagger_cfg;
    out.checkpoint.scheme = scheme;
    out.checkpoint.vocab = std::move(vocab);
    out.checkpoint.params = std::move(params);
    out.checkpoint.optim = std::move(opt_state);
    return out;
}

ScoreReport evaluate_model(const Checkpoint& ckpt, const Corpus& test, MatchMode mode) {
    check_scheme(ckpt.scheme, test.scheme, "test corpus");

    Corpus corpus = test;
    truncate_corpus(corpus, ckpt.config.max_len);
    assign_token_ids(corpus, ckpt.vocab);

    std::vector<std::vector<Span>> pred, gold;
    pred.reserve(corpus.sentences.size());
    gold.reserve(corpus.sentences.size());
    for (const Sentence& s : corpus.sentences) {
        if (!s.gold) throw std::invalid_argument("evaluate_model: unlabeled sentence in test set");
        ForwardResult f = forward(s.token_ids, ckpt.params, ckpt.config);
        pred.push_back(extract_spans(predict(f.probs), ckpt.scheme));
        gold.push_back(extract_spans(*s.gold, ckpt.scheme));
    }
    return score_spans(pred, gold, mode);
}

std::vector<DiagnosedSentence> diagnose_model(const Checkpoint& ckpt, const Corpus& input) {
    Corpus corpus = input;
    truncate_corpus(corpus, ckpt.config.max_len);
    assign_token_ids(corpus, ckpt.vocab);

    std::vector<DiagnosedSentence> out;
    out.reserve(corpus.sentences.size());
    for (const Sentence& s : corpus.sentences) {
        ForwardResult f = forward(s.token_ids, ckpt.params, ckpt.config);
        DiagnosedSentence d;
        d.tokens = s.tokens;
        d.diag = sentence_diagnostics(f.probs, 1e-12, ckpt.scheme);
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace fmim
