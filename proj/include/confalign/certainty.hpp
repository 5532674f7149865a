#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "confalign/common.hpp"
#include "confalign/prompting.hpp"

namespace confalign {

enum class certainty_failure { multiple_categories, no_category, option_reiteration, numeric_out_of_range };

inline const char* to_string(certainty_failure f) {
    switch (f) {
        case certainty_failure::multiple_categories: return "multiple_categories";
        case certainty_failure::no_category: return "no_category";
        case certainty_failure::option_reiteration: return "option_reiteration";
        case certainty_failure::numeric_out_of_range: return "numeric_out_of_range";
    }
    return "?";
}

inline certainty_failure certainty_failure_from_string(const std::string& s) {
    if (s == "multiple_categories") return certainty_failure::multiple_categories;
    if (s == "no_category") return certainty_failure::no_category;
    if (s == "option_reiteration") return certainty_failure::option_reiteration;
    if (s == "numeric_out_of_range") return certainty_failure::numeric_out_of_range;
    throw validation_error("unknown certainty failure: " + s);
}

// Result of reading a verbalized-certainty response: either a category with its
// score or a failure class, never both.
struct certainty_outcome {
    std::optional<std::string> category;
    std::optional<double> score;
    std::string raw_text;
    std::optional<certainty_failure> failure;
    // a key letter pointed at a different category than the phrase; the phrase won
    bool letter_conflict = false;

    bool ok() const { return !failure.has_value(); }

    static certainty_outcome success(const likert_category& cat, std::string raw, bool conflict = false) {
        certainty_outcome o;
        o.category = cat.label;
        o.score = cat.score;
        o.raw_text = std::move(raw);
        o.letter_conflict = conflict;
        return o;
    }
    static certainty_outcome failed(certainty_failure f, std::string raw) {
        certainty_outcome o;
        o.failure = f;
        o.raw_text = std::move(raw);
        return o;
    }
};

namespace detail {

inline bool phrase_at(const std::string& lower_text, size_t pos, const std::string& lower_phrase) {
    if (pos + lower_phrase.size() > lower_text.size()) return false;
    if (lower_text.compare(pos, lower_phrase.size(), lower_phrase) != 0) return false;
    // word boundaries on both sides
    if (pos > 0 && is_alpha(lower_text[pos - 1])) return false;
    size_t end = pos + lower_phrase.size();
    if (end < lower_text.size() && is_alpha(lower_text[end])) return false;
    return true;
}

inline bool contains_phrase(const std::string& lower_text, const std::string& phrase) {
    std::string lower_phrase = to_lower(phrase);
    size_t pos = 0;
    while ((pos = lower_text.find(lower_phrase, pos)) != std::string::npos) {
        if (phrase_at(lower_text, pos, lower_phrase)) {
            // "not certain" must not be the head of "not certain at all"
            if (lower_phrase == "not certain" &&
                lower_text.compare(pos, std::string("not certain at all").size(), "not certain at all") == 0) {
                ++pos;
                continue;
            }
            return true;
        }
        ++pos;
    }
    return false;
}

// Key letters like "b." — a scale key followed by a dot and whitespace/end,
// preceded by start or separating punctuation (never a dot, so "i.e." and
// "U.S.A." do not trigger).
inline std::set<char> scale_keys_in(const std::string& lower_text, const likert_scale& scale) {
    std::set<char> keys;
    for (size_t i = 0; i < lower_text.size(); ++i) {
        char c = lower_text[i];
        if (!scale.by_key(c)) continue;
        if (i + 1 >= lower_text.size() || lower_text[i + 1] != '.') continue;
        if (i > 0) {
            char before = lower_text[i - 1];
            bool ok_before = before == ' ' || before == '\t' || before == '\n' || before == '(' ||
                             before == '"' || before == ':' || before == ',' || before == ';';
            if (!ok_before) continue;
        }
        if (i + 2 < lower_text.size()) {
            char after = lower_text[i + 2];
            if (!(after == ' ' || after == '\t' || after == '\n')) continue;
        }
        keys.insert(c);
    }
    return keys;
}

}  // namespace detail

// Scans a response for the scale's category phrases (case-insensitive,
// longest first) and key letters. A single category wins; the phrase is
// authoritative when a key letter disagrees.
inline certainty_outcome parse_certainty(const std::string& response, const likert_scale& scale,
                                         const std::vector<std::string>& option_texts = {}) {
    std::string lower = detail::to_lower(response);

    std::vector<const likert_category*> by_length;
    for (const auto& c : scale.categories) by_length.push_back(&c);
    std::sort(by_length.begin(), by_length.end(), [](const likert_category* a, const likert_category* b) {
        return a->label.size() > b->label.size();
    });

    std::vector<const likert_category*> phrase_hits;
    for (const auto* cat : by_length)
        if (detail::contains_phrase(lower, cat->label)) phrase_hits.push_back(cat);

    std::set<char> keys = detail::scale_keys_in(lower, scale);

    if (phrase_hits.size() >= 2) return certainty_outcome::failed(certainty_failure::multiple_categories, response);
    if (phrase_hits.size() == 1) {
        const likert_category* cat = phrase_hits.front();
        bool conflict = false;
        for (char k : keys)
            if (k != cat->key) conflict = true;
        return certainty_outcome::success(*cat, response, conflict);
    }

    // Zero phrases. A restated option list ("A. eardrum, C. death, ...") uses
    // letters as option labels, not scale keys, so reiteration is checked
    // before bare keys are interpreted. One option text is a legitimate
    // answer restatement; two or more mean the options came back.
    int distinct_options = 0;
    for (const auto& text : option_texts) {
        if (text.empty()) continue;
        if (lower.find(detail::to_lower(text)) != std::string::npos) ++distinct_options;
    }
    if (distinct_options >= 2) return certainty_outcome::failed(certainty_failure::option_reiteration, response);

    if (keys.size() == 1) return certainty_outcome::success(*scale.by_key(*keys.begin()), response);
    if (keys.size() >= 2) return certainty_outcome::failed(certainty_failure::multiple_categories, response);
    return certainty_outcome::failed(certainty_failure::no_category, response);
}

// First integer in the response, valid when in [1, 100]; score = value / 100.
inline certainty_outcome parse_numeric_certainty(const std::string& response) {
    size_t i = 0;
    while (i < response.size() && !detail::is_digit(response[i])) ++i;
    if (i == response.size()) return certainty_outcome::failed(certainty_failure::numeric_out_of_range, response);
    size_t j = i;
    while (j < response.size() && detail::is_digit(response[j])) ++j;
    if (j - i > 9) return certainty_outcome::failed(certainty_failure::numeric_out_of_range, response);
    long value = std::stol(response.substr(i, j - i));
    if (value < 1 || value > 100)
        return certainty_outcome::failed(certainty_failure::numeric_out_of_range, response);
    certainty_outcome o;
    o.category = std::to_string(value);
    o.score = static_cast<double>(value) / 100.0;
    o.raw_text = response;
    return o;
}

// Majority vote over sampled outcomes; ties break toward the lower score.
// More than half failures propagates the modal failure class.
inline certainty_outcome self_consistency_vote(const std::vector<certainty_outcome>& outcomes) {
    if (outcomes.empty()) return certainty_outcome::failed(certainty_failure::no_category, "");

    size_t failures = 0;
    std::map<certainty_failure, size_t> failure_counts;
    for (const auto& o : outcomes)
        if (!o.ok()) {
            ++failures;
            failure_counts[*o.failure] += 1;
        }
    if (failures == outcomes.size()) return certainty_outcome::failed(certainty_failure::no_category, "");
    if (failures * 2 > outcomes.size()) {
        certainty_failure modal = certainty_failure::no_category;
        size_t best = 0;
        for (const auto& [f, n] : failure_counts)
            if (n > best) best = n, modal = f;
        return certainty_outcome::failed(modal, "");
    }

    struct bucket {
        size_t count = 0;
        double score = 0.0;
        std::string category;
    };
    std::map<std::string, bucket> buckets;
    for (const auto& o : outcomes) {
        if (!o.ok()) continue;
        auto& b = buckets[*o.category];
        b.count += 1;
        b.score = *o.score;
        b.category = *o.category;
    }
    const bucket* winner = nullptr;
    for (const auto& [_, b] : buckets) {
        if (!winner || b.count > winner->count || (b.count == winner->count && b.score < winner->score))
            winner = &b;
    }
    certainty_outcome o;
    o.category = winner->category;
    o.score = winner->score;
    o.raw_text = winner->category;
    return o;
}

}  // namespace confalign
