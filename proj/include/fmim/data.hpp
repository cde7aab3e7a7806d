#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "fmim/mi_loss.hpp"  // Domain
#include "fmim/tagging.hpp"

namespace fmim {

struct Sentence {
    std::vector<std::string> tokens;  // surface forms, preserved verbatim
    std::vector<int> token_ids;       // filled by assign_token_ids
    std::optional<TagSequence> gold;
    Domain domain = Domain::Source;

    int length() const { return static_cast<int>(tokens.size()); }
};

struct CorpusStats {
    size_t sentences = 0;
    size_t tokens = 0;
    double labeled_fraction = 0.0;
};

struct Corpus {
    std::vector<Sentence> sentences;
    TagScheme scheme;

    CorpusStats stats() const;
};

// Token ids are looked up on lowercased surface forms; id 0 is UNK and id 1 is
// the BOUNDARY row used by the tagger for out-of-window context positions.
struct Vocabulary {
    static constexpr int kUnk = 0;
    static constexpr int kBoundary = 1;

    std::vector<std::string> id_to_token;  // [0]="<unk>", [1]="<boundary>"
    std::unordered_map<std::string, int> token_to_id;

    int size() const { return static_cast<int>(id_to_token.size()); }
    int lookup(const std::string& surface) const;  // lowercases, UNK fallback
};

std::string lowercase(const std::string& s);

// CoNLL-style TSV: one token per line, "token<TAB>label" when labeled, bare
// "token" otherwise; a blank line separates sentences; trailing blank lines
// ignored. Unknown labels and mixed column counts raise std::runtime_error
// with the offending line number.
Corpus parse_conll(std::istream& in, const TagScheme& scheme, bool labeled, Domain domain);
Corpus parse_conll_file(const std::string& path, const TagScheme& scheme, bool labeled,
                        Domain domain);
void write_conll(const Corpus& corpus, std::ostream& out);
std::string write_conll_string(const Corpus& corpus);

// Counts lowercased tokens over all given corpora (source train plus target
// unlabeled under UDA); keeps those with count >= min_count ordered by
// (count desc, first occurrence).
Vocabulary build_vocab(const std::vector<const Corpus*>& corpora, int min_count);

void assign_token_ids(Corpus& corpus, const Vocabulary& vocab);

// Drops tokens (and gold tags) beyond max_len so decoding and scoring stay
// aligned with what the tagger sees.
void truncate_corpus(Corpus& corpus, int max_len);

struct BatchPair {
    std::vector<int> source;  // sentence indices into the source corpus
    std::vector<int> target;  // sentence indices into the target corpus, same count
};

// One epoch = one shuffled pass over the source corpus in chunks of
// batch_size (last chunk may be short). Target indices come from an
// independently shuffled cycling iterator over the target corpus that
// reshuffles on wrap-around and persists across epochs. Deterministic given
// the seed.
class JointBatchSampler {
public:
    // Throws std::invalid_argument when either corpus is empty (FMIM needs
    // target data) or batch_size < 1.
    JointBatchSampler(size_t source_size, size_t target_size, int batch_size, uint64_t seed);

    std::vector<BatchPair> next_epoch();

private:
    int draw_target();

    size_t source_size_;
    size_t target_size_;
    int batch_size_;
    std::mt19937_64 source_rng_;
    std::mt19937_64 target_rng_;
    std::vector<int> target_order_;
    size_t target_pos_ = 0;
};

struct SynthConfig {
    int n_source_train = 240;
    int n_target_unlabeled = 240;
    int n_target_test = 200;
    int shared_vocab_size = 90;           // background filler word types
    int source_aspect_lexicon_size = 12;
    int target_aspect_lexicon_size = 12;
    int aspect_len_min = 1;
    int aspect_len_max = 3;
    // P(POS), P(NEU), P(NEG) for aspect polarity and standalone cue draws.
    std::vector<double> sentiment_distribution = {0.4, 0.3, 0.3};
    int sentence_len_min = 5;  // filler tokens; aspects and cues are inserted
    int sentence_len_max = 9;  // on top of these
    uint64_t seed = 13;
    // Optional explicit lexicons (comma-free token lists); when empty the
    // lexicons are generated from the sizes above and are disjoint by
    // construction.
    std::vector<std::string> source_aspect_lexicon;
    std::vector<std::string> target_aspect_lexicon;

    void validate() const;  // throws std::invalid_argument (incl. lexicon overlap)
};

struct SyntheticData {
    Corpus source_train;       // labeled
    Corpus target_unlabeled;   // no gold tags
    Corpus target_test;        // labeled
};

// Domain-shift benchmark generator. Each sentence is shared-vocabulary filler
// with zero or more embedded aspect phrases; an aspect phrase is 1..3 tokens
// from the domain's lexicon flanked by a shared cue word whose polarity
// determines the gold sentiment. Cue words also appear standalone, so token
// identity (not context alone) is the easy in-domain signal - which is what
// makes the source-only baseline collapse on the target side.
SyntheticData generate_synthetic(const SynthConfig& cfg);

// Cue-word helpers exposed for tests: returns the polarity label ("POS",
// "NEU", "NEG") when the token is one of the generator's cue words.
std::optional<std::string> synth_cue_polarity(const std::string& token);

}  // namespace fmim
