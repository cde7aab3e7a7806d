#include "fmim/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fmim/rng.hpp"

namespace fmim {

CorpusStats Corpus::stats() const {
    CorpusStats s;
    s.sentences = sentences.size();
    size_t labeled = 0;
    for (const Sentence& sent : sentences) {
        s.tokens += sent.tokens.size();
        if (sent.gold) ++labeled;
    }
    s.labeled_fraction = sentences.empty() ? 0.0
                                           : static_cast<double>(labeled) /
                                                 static_cast<double>(sentences.size());
    return s;
}

std::string lowercase(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

int Vocabulary::lookup(const std::string& surface) const {
    auto it = token_to_id.find(lowercase(surface));
    return it == token_to_id.end() ? kUnk : it->second;
}

Corpus parse_conll(std::istream& in, const TagScheme& scheme, bool labeled, Domain domain) {
    Corpus corpus;
    corpus.scheme = scheme;
    Sentence current;
    current.domain = domain;
    if (labeled) current.gold = TagSequence{};

    std::string line;
    int line_no = 0;
    auto flush = [&]() {
        if (!current.tokens.empty()) {
            corpus.sentences.push_back(std::move(current));
            current = Sentence{};
            current.domain = domain;
            if (labeled) current.gold = TagSequence{};
        }
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            flush();
            continue;
        }
        size_t tab = line.find('\t');
        if (labeled) {
            if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
                throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                                         ": expected token<TAB>label");
            std::string token = line.substr(0, tab);
            std::string label = line.substr(tab + 1);
            if (token.empty())
                throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                                         ": empty token");
            int idx = scheme.index_of(label);
            if (idx < 0)
                throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                                         ": unknown label '" + label + "'");
            current.tokens.push_back(std::move(token));
            current.gold->push_back(idx);
        } else {
            if (tab != std::string::npos)
                throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                                         ": unexpected label column in unlabeled input");
            current.tokens.push_back(line);
        }
    }
    flush();
    return corpus;
}

Corpus parse_conll_file(const std::string& path, const TagScheme& scheme, bool labeled,
                        Domain domain) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return parse_conll(in, scheme, labeled, domain);
}

void write_conll(const Corpus& corpus, std::ostream& out) {
    for (const Sentence& s : corpus.sentences) {
        for (size_t i = 0; i < s.tokens.size(); ++i) {
            out << s.tokens[i];
            if (s.gold) out << '\t' << corpus.scheme.name((*s.gold)[i]);
            out << '\n';
        }
        out << '\n';
    }
}

std::string write_conll_string(const Corpus& corpus) {
    std::ostringstream os;
    write_conll(corpus, os);
    return os.str();
}

Vocabulary build_vocab(const std::vector<const Corpus*>& corpora, int min_count) {
    if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");

    struct Entry {
        long count = 0;
        long first_seen = 0;
    };
    std::unordered_map<std::string, Entry> counts;
    long position = 0;
    for (const Corpus* c : corpora) {
        for (const Sentence& s : c->sentences) {
            for (const std::string& tok : s.tokens) {
                std::string key = lowercase(tok);
                auto [it, inserted] = counts.try_emplace(key, Entry{0, position});
                it->second.count += 1;
                ++position;
            }
        }
    }

    std::vector<std::pair<std::string, Entry>> kept;
    kept.reserve(counts.size());
    for (auto& kv : counts)
        if (kv.second.count >= min_count) kept.emplace_back(kv.first, kv.second);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second.count != b.second.count) return a.second.count > b.second.count;
        return a.second.first_seen < b.second.first_seen;
    });

    Vocabulary vocab;
    vocab.id_to_token = {"<unk>", "<boundary>"};
    for (auto& kv : kept) {
        vocab.token_to_id.emplace(kv.first, vocab.size());
        vocab.id_to_token.push_back(kv.first);
    }
    return vocab;
}

void assign_token_ids(Corpus& corpus, const Vocabulary& vocab) {
    for (Sentence& s : corpus.sentences) {
        s.token_ids.resize(s.tokens.size());
        for (size_t i = 0; i < s.tokens.size(); ++i) s.token_ids[i] = vocab.lookup(s.tokens[i]);
    }
}

void truncate_corpus(Corpus& corpus, int max_len) {
    if (max_len < 1) throw std::invalid_argument("truncate_corpus: max_len must be >= 1");
    for (Sentence& s : corpus.sentences) {
        if (s.length() <= max_len) continue;
        s.tokens.resize(static_cast<size_t>(max_len));
        if (!s.token_ids.empty()) s.token_ids.resize(static_cast<size_t>(max_len));
        if (s.gold) s.gold->resize(static_cast<size_t>(max_len));
    }
}

JointBatchSampler::JointBatchSampler(size_t source_size, size_t target_size, int batch_size,
                                     uint64_t seed)
    : source_size_(source_size),
      target_size_(target_size),
      batch_size_(batch_size),
      source_rng_(derive_seed(seed, "batch-source")),
      target_rng_(derive_seed(seed, "batch-target")) {
    if (batch_size_ < 1) throw std::invalid_argument("JointBatchSampler: batch_size must be >= 1");
    if (source_size_ == 0)
        throw std::invalid_argument("JointBatchSampler: source corpus is empty");
    if (target_size_ == 0)
        throw std::invalid_argument(
            "JointBatchSampler: target corpus is empty (FMIM requires target data)");
    target_order_.resize(target_size_);
    for (size_t i = 0; i < target_size_; ++i) target_order_[i] = static_cast<int>(i);
    target_pos_ = target_size_;  // first draw triggers a shuffle
}

int JointBatchSampler::draw_target() {
    if (target_pos_ >= target_order_.size()) {
        std::shuffle(target_order_.begin(), target_order_.end(), target_rng_);
        target_pos_ = 0;
    }
    return target_order_[target_pos_++];
}

std::vector<BatchPair> JointBatchSampler::next_epoch() {
    std::vector<int> order(source_size_);
    for (size_t i = 0; i < source_size_; ++i) order[i] = static_cast<int>(i);
    std::shuffle(order.begin(), order.end(), source_rng_);

    std::vector<BatchPair> steps;
    for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(batch_size_)) {
        BatchPair pair;
        size_t end = std::min(order.size(), pos + static_cast<size_t>(batch_size_));
        pair.source.assign(order.begin() + static_cast<long>(pos),
                           order.begin() + static_cast<long>(end));
        pair.target.reserve(pair.source.size());
        for (size_t i = 0; i < pair.source.size(); ++i) pair.target.push_back(draw_target());
        steps.push_back(std::move(pair));
    }
    return steps;
}

// ---------------------------------------------------------------------------
// Synthetic domain-shift benchmark
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kPolarities = {"POS", "NEU", "NEG"};

std::vector<std::string> cue_words(const std::string& polarity) {
    std::vector<std::string> out;
    for (int i = 0; i < 2; ++i) {
        if (polarity == "POS") out.push_back("cuepos" + std::to_string(i));
        else if (polarity == "NEU") out.push_back("cueneu" + std::to_string(i));
        else out.push_back("cueneg" + std::to_string(i));
    }
    return out;
}

std::string pad3(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", i);
    return buf;
}

std::vector<std::string> default_lexicon(const std::string& prefix, int size) {
    std::vector<std::string> lex;
    lex.reserve(static_cast<size_t>(size));
    for (int i = 0; i < size; ++i) lex.push_back(prefix + pad3(i));
    return lex;
}

int sample_categorical(std::mt19937_64& rng, const std::vector<double>& probs) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double x = u(rng);
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (x < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

struct Segment {
    std::vector<std::string> tokens;
    std::vector<int> tags;  // unified-scheme indices
};

Corpus generate_corpus(const SynthConfig& cfg, const std::vector<std::string>& aspect_lexicon,
                       int n_sentences, bool labeled, Domain domain, std::mt19937_64& rng) {
    TagScheme scheme = TagScheme::unified_sentiment();
    std::vector<std::string> filler = default_lexicon("w", cfg.shared_vocab_size);

    std::uniform_int_distribution<int> len_dist(cfg.sentence_len_min, cfg.sentence_len_max);
    std::uniform_int_distribution<int> aspect_len_dist(cfg.aspect_len_min, cfg.aspect_len_max);
    std::uniform_int_distribution<size_t> filler_dist(0, filler.size() - 1);
    std::uniform_int_distribution<size_t> aspect_dist(0, aspect_lexicon.size() - 1);
    std::uniform_int_distribution<size_t> cue_pick(0, cue_words("POS").size() - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    // Zero or more aspects per sentence. Aspects are sparser in the source
    // domain (a strong outside-tag prior there is part of the shift) and
    // denser in the target domain.
    const std::vector<double> aspect_count_dist =
        domain == Domain::Source ? std::vector<double>{0.6, 0.35, 0.05}
                                 : std::vector<double>{0.03, 0.27, 0.37, 0.33};

    Corpus corpus;
    corpus.scheme = scheme;
    corpus.sentences.reserve(static_cast<size_t>(n_sentences));
    for (int si = 0; si < n_sentences; ++si) {
        std::vector<Segment> segments;
        int n_filler = len_dist(rng);
        for (int i = 0; i < n_filler; ++i)
            segments.push_back({{filler[filler_dist(rng)]}, {scheme.outside()}});

        int n_aspects = sample_categorical(rng, aspect_count_dist);
        for (int a = 0; a < n_aspects; ++a) {
            int pol = sample_categorical(rng, cfg.sentiment_distribution);
            int tag = scheme.index_of(kPolarities[static_cast<size_t>(pol)]);
            std::string cue = cue_words(kPolarities[static_cast<size_t>(pol)])
                                  [cue_pick(rng)];
            int phrase_len = aspect_len_dist(rng);
            // Cue strictly before the phrase, so the tag of every position is
            // a deterministic function of a small left context.
            Segment seg;
            seg.tokens.push_back(cue);
            seg.tags.push_back(scheme.outside());
            for (int p = 0; p < phrase_len; ++p) {
                seg.tokens.push_back(aspect_lexicon[aspect_dist(rng)]);
                seg.tags.push_back(tag);
            }
            segments.push_back(std::move(seg));
        }

        // Standalone cues: a cue alone does not imply an aspect.
        int n_lone_cues = 1;
        if (u(rng) < 0.2) ++n_lone_cues;
        for (int lc = 0; lc < n_lone_cues; ++lc) {
            int pol = sample_categorical(rng, cfg.sentiment_distribution);
            std::string cue = cue_words(kPolarities[static_cast<size_t>(pol)])
                                  [cue_pick(rng)];
            segments.push_back({{cue}, {scheme.outside()}});
        }

        // Cue-less aspect-lexicon mentions tagged O: token identity alone does
        // not imply an aspect either, so the labeling rule genuinely needs the
        // cue context. This is what transfers across domains.
        if (u(rng) < 0.8) {
            segments.push_back({{filler[filler_dist(rng)], aspect_lexicon[aspect_dist(rng)]},
                                {scheme.outside(), scheme.outside()}});
        }

        std::shuffle(segments.begin(), segments.end(), rng);

        Sentence sent;
        sent.domain = domain;
        TagSequence gold;
        for (const Segment& seg : segments) {
            sent.tokens.insert(sent.tokens.end(), seg.tokens.begin(), seg.tokens.end());
            gold.insert(gold.end(), seg.tags.begin(), seg.tags.end());
        }
        if (labeled) sent.gold = std::move(gold);
        corpus.sentences.push_back(std::move(sent));
    }
    return corpus;
}

}  // namespace

void SynthConfig::validate() const {
    if (n_source_train < 1 || n_target_unlabeled < 1 || n_target_test < 1)
        throw std::invalid_argument("SynthConfig: sentence counts must be >= 1");
    if (shared_vocab_size < 1)
        throw std::invalid_argument("SynthConfig: shared_vocab_size must be >= 1");
    if (aspect_len_min < 1 || aspect_len_max < aspect_len_min)
        throw std::invalid_argument("SynthConfig: bad aspect length range");
    if (sentence_len_min < 1 || sentence_len_max < sentence_len_min)
        throw std::invalid_argument("SynthConfig: bad sentence length range");
    if (sentiment_distribution.size() != 3)
        throw std::invalid_argument("SynthConfig: sentiment_distribution needs 3 entries");
    double sum = 0.0;
    for (double p : sentiment_distribution) {
        if (p < 0.0) throw std::invalid_argument("SynthConfig: negative probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("SynthConfig: sentiment_distribution must sum to 1");

    std::vector<std::string> src = source_aspect_lexicon.empty()
                                       ? default_lexicon("srcasp", source_aspect_lexicon_size)
                                       : source_aspect_lexicon;
    std::vector<std::string> tgt = target_aspect_lexicon.empty()
                                       ? default_lexicon("tgtasp", target_aspect_lexicon_size)
                                       : target_aspect_lexicon;
    if (src.empty() || tgt.empty())
        throw std::invalid_argument("SynthConfig: aspect lexicons must be non-empty");
    std::set<std::string> src_set(src.begin(), src.end());
    for (const std::string& t : tgt)
        if (src_set.count(t))
            throw std::invalid_argument("SynthConfig: source and target aspect lexicons overlap ('" +
                                        t + "')");
}

SyntheticData generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    std::vector<std::string> src_lex = cfg.source_aspect_lexicon.empty()
                                           ? default_lexicon("srcasp", cfg.source_aspect_lexicon_size)
                                           : cfg.source_aspect_lexicon;
    std::vector<std::string> tgt_lex = cfg.target_aspect_lexicon.empty()
                                           ? default_lexicon("tgtasp", cfg.target_aspect_lexicon_size)
                                           : cfg.target_aspect_lexicon;

    SyntheticData data;
    std::mt19937_64 rng_src = make_rng(cfg.seed, "synth-source-train");
    std::mt19937_64 rng_unl = make_rng(cfg.seed, "synth-target-unlabeled");
    std::mt19937_64 rng_tst = make_rng(cfg.seed, "synth-target-test");
    data.source_train =
        generate_corpus(cfg, src_lex, cfg.n_source_train, true, Domain::Source, rng_src);
    data.target_unlabeled =
        generate_corpus(cfg, tgt_lex, cfg.n_target_unlabeled, false, Domain::Target, rng_unl);
    data.target_test =
        generate_corpus(cfg, tgt_lex, cfg.n_target_test, true, Domain::Target, rng_tst);
    return data;
}

std::optional<std::string> synth_cue_polarity(const std::string& token) {
    for (const std::string& pol : kPolarities)
        for (const std::string& cue : cue_words(pol))
            if (token == cue) return pol;
    return std::nullopt;
}

}  // namespace fmim
