#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fmim {

enum class SchemeKind { UnifiedSentiment, BIO };

// Label alphabet plus the span-extraction rules that go with it. Tag index 0
// is always the outside tag "O".
struct TagScheme {
    SchemeKind kind = SchemeKind::UnifiedSentiment;
    std::vector<std::string> tags;

    // {O, POS, NEU, NEG}; maximal runs of one non-O tag form spans.
    static TagScheme unified_sentiment();
    // O plus B-X/I-X per entity type, e.g. bio({"PER","ORG","LOC","MISC"}).
    static TagScheme bio(const std::vector<std::string>& entity_types);
    static TagScheme ner_bio();  // {PER, ORG, LOC, MISC}
    static TagScheme ate_bio();  // single ASP type

    int size() const { return static_cast<int>(tags.size()); }
    int outside() const { return 0; }
    const std::string& name(int idx) const { return tags[static_cast<size_t>(idx)]; }
    int index_of(const std::string& tag) const;  // -1 when absent

    // BIO helpers; span_label("B-PER") == "PER". For unified tags the label is
    // the tag itself.
    bool is_begin(int idx) const;
    bool is_inside(int idx) const;
    std::string span_label(int idx) const;
    void check() const;  // throws std::invalid_argument on a malformed scheme
};

// Per-token tag indices into a TagScheme.
using TagSequence = std::vector<int>;

// Half-open token range [start, end) carrying a non-O label ("POS", "PER", ...).
struct Span {
    int start = 0;
    int end = 0;
    std::string label;

    bool operator==(const Span& o) const {
        return start == o.start && end == o.end && label == o.label;
    }
    bool operator<(const Span& o) const {
        if (start != o.start) return start < o.start;
        if (end != o.end) return end < o.end;
        return label < o.label;
    }
};

struct ValidationIssue {
    int position = 0;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> errors;    // out-of-range indices
    std::vector<ValidationIssue> warnings;  // BIO orphan I- tags
    bool valid() const { return errors.empty(); }
};

// Decodes a tag sequence into typed spans. Unified scheme: a maximal run of
// one non-O tag is a span and a sentiment change ends it. BIO: standard
// decoding, lenient about orphan I- tags (they open a new span).
// Throws std::invalid_argument on out-of-range tag indices.
std::vector<Span> extract_spans(const TagSequence& tags, const TagScheme& scheme);

// Inverse of extract_spans for building fixtures. Spans must be
// non-overlapping and within [0, length); throws std::invalid_argument
// otherwise.
TagSequence spans_to_tags(const std::vector<Span>& spans, int length, const TagScheme& scheme);

// Report-only check; never throws, never mutates.
ValidationReport validate_sequence(const TagSequence& tags, const TagScheme& scheme);

// Span-preserving re-tagging: decode under `from`, map each span label, encode
// under `to`. label_map returning nullopt means the label cannot be mapped and
// raises std::invalid_argument.
using LabelMap = std::function<std::optional<std::string>(const std::string&)>;
TagSequence convert_scheme(const TagSequence& tags, const TagScheme& from, const TagScheme& to,
                           const LabelMap& label_map);

// Collapses every sentiment/entity label onto "ASP" (the ATE remapping).
LabelMap ate_label_map();

}  // namespace fmim
