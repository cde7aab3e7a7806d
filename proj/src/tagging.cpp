#include "fmim/tagging.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace fmim {

TagScheme TagScheme::unified_sentiment() {
    TagScheme s;
    s.kind = SchemeKind::UnifiedSentiment;
    s.tags = {"O", "POS", "NEU", "NEG"};
    return s;
}

TagScheme TagScheme::bio(const std::vector<std::string>& entity_types) {
    TagScheme s;
    s.kind = SchemeKind::BIO;
    s.tags = {"O"};
    for (const auto& t : entity_types) {
        s.tags.push_back("B-" + t);
        s.tags.push_back("I-" + t);
    }
    s.check();
    return s;
}

TagScheme TagScheme::ner_bio() { return bio({"PER", "ORG", "LOC", "MISC"}); }

TagScheme TagScheme::ate_bio() { return bio({"ASP"}); }

int TagScheme::index_of(const std::string& tag) const {
    for (size_t i = 0; i < tags.size(); ++i)
        if (tags[i] == tag) return static_cast<int>(i);
    return -1;
}

bool TagScheme::is_begin(int idx) const {
    return kind == SchemeKind::BIO && tags[static_cast<size_t>(idx)].rfind("B-", 0) == 0;
}

bool TagScheme::is_inside(int idx) const {
    return kind == SchemeKind::BIO && tags[static_cast<size_t>(idx)].rfind("I-", 0) == 0;
}

std::string TagScheme::span_label(int idx) const {
    const std::string& t = tags[static_cast<size_t>(idx)];
    if (kind == SchemeKind::BIO && (is_begin(idx) || is_inside(idx))) return t.substr(2);
    return t;
}

void TagScheme::check() const {
    if (tags.empty() || tags[0] != "O")
        throw std::invalid_argument("TagScheme: outside tag O must be at index 0");
    std::set<std::string> seen(tags.begin(), tags.end());
    if (seen.size() != tags.size()) throw std::invalid_argument("TagScheme: duplicate tags");
    if (kind == SchemeKind::BIO) {
        for (size_t i = 1; i < tags.size(); ++i) {
            const std::string& t = tags[i];
            if (t.size() < 3 || (t.rfind("B-", 0) != 0 && t.rfind("I-", 0) != 0))
                throw std::invalid_argument("TagScheme: BIO tag must be B-X or I-X: " + t);
        }
    }
}

namespace {

void check_indices(const TagSequence& tags, const TagScheme& scheme) {
    for (size_t i = 0; i < tags.size(); ++i) {
        if (tags[i] < 0 || tags[i] >= scheme.size())
            throw std::invalid_argument("invalid tag sequence: index " + std::to_string(tags[i]) +
                                        " out of range at position " + std::to_string(i));
    }
}

}  // namespace

std::vector<Span> extract_spans(const TagSequence& tags, const TagScheme& scheme) {
    check_indices(tags, scheme);
    std::vector<Span> spans;
    const int n = static_cast<int>(tags.size());

    if (scheme.kind == SchemeKind::UnifiedSentiment) {
        int i = 0;
        while (i < n) {
            if (tags[static_cast<size_t>(i)] == scheme.outside()) {
                ++i;
                continue;
            }
            // maximal run of one identical non-O tag; a sentiment change ends it
            int tag = tags[static_cast<size_t>(i)];
            int start = i;
            while (i < n && tags[static_cast<size_t>(i)] == tag) ++i;
            spans.push_back({start, i, scheme.name(tag)});
        }
        return spans;
    }

    // BIO, lenient: an orphan I-X opens a new span.
    int i = 0;
    while (i < n) {
        int tag = tags[static_cast<size_t>(i)];
        if (tag == scheme.outside()) {
            ++i;
            continue;
        }
        std::string label = scheme.span_label(tag);
        int start = i;
        ++i;
        while (i < n) {
            int t = tags[static_cast<size_t>(i)];
            if (scheme.is_inside(t) && scheme.span_label(t) == label)
                ++i;
            else
                break;
        }
        spans.push_back({start, i, label});
    }
    return spans;
}

TagSequence spans_to_tags(const std::vector<Span>& spans, int length, const TagScheme& scheme) {
    if (length < 0) throw std::invalid_argument("spans_to_tags: negative length");
    TagSequence tags(static_cast<size_t>(length), scheme.outside());
    std::vector<Span> sorted = spans;
    std::sort(sorted.begin(), sorted.end());
    int prev_end = -1;
    for (const Span& s : sorted) {
        if (s.start < 0 || s.end > length || s.start >= s.end)
            throw std::invalid_argument("spans_to_tags: span out of bounds");
        if (s.start < prev_end) throw std::invalid_argument("spans_to_tags: overlapping spans");
        prev_end = s.end;
        if (scheme.kind == SchemeKind::UnifiedSentiment) {
            int idx = scheme.index_of(s.label);
            if (idx <= 0) throw std::invalid_argument("spans_to_tags: unknown label " + s.label);
            for (int i = s.start; i < s.end; ++i) tags[static_cast<size_t>(i)] = idx;
        } else {
            int b = scheme.index_of("B-" + s.label);
            int in = scheme.index_of("I-" + s.label);
            if (b < 0 || in < 0)
                throw std::invalid_argument("spans_to_tags: unknown label " + s.label);
            tags[static_cast<size_t>(s.start)] = b;
            for (int i = s.start + 1; i < s.end; ++i) tags[static_cast<size_t>(i)] = in;
        }
    }
    return tags;
}

ValidationReport validate_sequence(const TagSequence& tags, const TagScheme& scheme) {
    ValidationReport report;
    for (size_t i = 0; i < tags.size(); ++i) {
        if (tags[i] < 0 || tags[i] >= scheme.size()) {
            report.errors.push_back({static_cast<int>(i),
                                     "tag index " + std::to_string(tags[i]) + " out of range"});
        }
    }
    if (!report.errors.empty() || scheme.kind != SchemeKind::BIO) return report;

    for (size_t i = 0; i < tags.size(); ++i) {
        int t = tags[i];
        if (!scheme.is_inside(t)) continue;
        std::string label = scheme.span_label(t);
        bool continues = false;
        if (i > 0) {
            int p = tags[i - 1];
            continues = (scheme.is_begin(p) || scheme.is_inside(p)) && scheme.span_label(p) == label;
        }
        if (!continues)
            report.warnings.push_back(
                {static_cast<int>(i), "orphan " + scheme.name(t) + " at position " + std::to_string(i)});
    }
    return report;
}

TagSequence convert_scheme(const TagSequence& tags, const TagScheme& from, const TagScheme& to,
                           const LabelMap& label_map) {
    std::vector<Span> spans = extract_spans(tags, from);
    for (Span& s : spans) {
        std::optional<std::string> mapped = label_map(s.label);
        if (!mapped)
            throw std::invalid_argument("convert_scheme: unmappable label " + s.label);
        s.label = *mapped;
    }
    return spans_to_tags(spans, static_cast<int>(tags.size()), to);
}

LabelMap ate_label_map() {
    return [](const std::string&) -> std::optional<std::string> { return std::string("ASP"); };
}

}  // namespace fmim
