#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "confalign/backends.hpp"
#include "confalign/dataset.hpp"

namespace confalign {

struct no_option_mass : error {
    explicit no_option_mass(token_distribution dist)
        : error("no option token carries probability mass"), distribution(std::move(dist)) {}
    token_distribution distribution;
};
struct unparseable_answer : error {
    using error::error;
};
struct ambiguous_answer : error {
    using error::error;
};

// Token spellings recognized as each option label. Subword vocabularies
// distinguish "B" from " B", and models vary case, so every label maps to its
// case, leading-space, and (optionally) dot-suffixed forms.
struct option_token_map {
    std::map<char, std::vector<std::string>> variants;

    const std::vector<std::string>* for_label(char label) const {
        auto it = variants.find(label);
        return it == variants.end() ? nullptr : &it->second;
    }
    // nullopt when the token is no label variant
    std::optional<char> label_of(const std::string& token) const {
        for (const auto& [label, vs] : variants)
            for (const auto& v : vs)
                if (v == token) return label;
        return std::nullopt;
    }
};

inline option_token_map build_option_token_map(const std::vector<char>& labels,
                                               bool include_punctuation = true) {
    option_token_map map;
    std::set<std::string> all;
    for (char label : labels) {
        if (label < 'A' || label > 'H') throw validation_error("option label out of range A-H");
        char lower = static_cast<char>(label - 'A' + 'a');
        std::vector<std::string> vs{std::string(1, label), std::string(1, lower), std::string(" ") + label,
                                    std::string(" ") + lower};
        if (include_punctuation) {
            vs.push_back(std::string(1, label) + ".");
            vs.push_back(std::string(1, lower) + ".");
        }
        for (const auto& v : vs)
            if (!all.insert(v).second) throw validation_error("variant sets not disjoint at '" + v + "'");
        map.variants[label] = std::move(vs);
    }
    return map;
}

// Per-option adjusted probabilities and the normalized internal confidence.
struct adjusted_confidence {
    std::map<char, double> per_option;  // P_O for every label, 0 when absent
    double chosen_mass = 0.0;           // P_M
    double total_mass = 0.0;            // P_S
    double internal_confidence = 0.0;   // P_IC = P_M / P_S
    char chosen = 0;
    // more than one variant of the chosen label carries mass ('B' vs 'b')
    bool variant_ambiguity = false;
};

// Adjusted token probabilities: per option the maximum probability over its
// token variants, normalized across options. `argmax_mode` selects the literal
// max over all options as the numerator instead of the chosen option's mass
// (the two differ only when a non-argmax option was sampled).
inline adjusted_confidence adjusted_internal_confidence(const token_distribution& dist,
                                                        const option_token_map& map, char chosen,
                                                        bool argmax_mode = false) {
    if (dist.kind != score_kind::prob) throw validation_error("distribution must be normalized to probabilities");
    if (map.variants.find(chosen) == map.variants.end())
        throw validation_error(std::string("chosen label '") + chosen + "' not in option map");

    adjusted_confidence out;
    out.chosen = chosen;
    for (const auto& [label, _] : map.variants) out.per_option[label] = 0.0;

    std::map<char, int> hit_count;
    for (const auto& e : dist.entries) {
        auto label = map.label_of(e.token);
        if (!label) continue;
        hit_count[*label] += 1;
        double& p = out.per_option[*label];
        p = std::max(p, e.score);
    }
    for (const auto& [_, p] : out.per_option) out.total_mass += p;
    if (out.total_mass <= 0.0) throw no_option_mass(dist);

    out.variant_ambiguity = hit_count.count(chosen) && hit_count[chosen] > 1;
    double numerator = out.per_option[chosen];
    if (argmax_mode)
        for (const auto& [_, p] : out.per_option) numerator = std::max(numerator, p);
    out.chosen_mass = numerator;
    out.internal_confidence = numerator / out.total_mass;
    return out;
}

// Extracts the chosen option label from a model response: a leading "L." or
// bare "L" wins; otherwise a uniquely contained option text decides.
inline char extract_chosen_label(const std::string& response_text, const question& q) {
    if (response_text.empty()) throw unparseable_answer("empty response");
    std::string trimmed = detail::trim(response_text);
    auto labels = q.labels();

    if (!trimmed.empty()) {
        char c = static_cast<char>(std::toupper(static_cast<unsigned char>(trimmed[0])));
        bool is_label = false;
        for (char l : labels) is_label |= (l == c);
        if (is_label) {
            if (trimmed.size() == 1) return c;
            char next = trimmed[1];
            if (next == '.' || next == ')' || next == ':' || next == ',' ||
                std::isspace(static_cast<unsigned char>(next)))
                return c;
        }
    }

    std::string lower = detail::to_lower(trimmed);
    std::vector<char> contained;
    for (const auto& o : q.options) {
        if (o.text.empty()) continue;
        if (lower.find(detail::to_lower(o.text)) != std::string::npos) contained.push_back(o.label);
    }
    if (contained.size() == 1) return contained.front();
    if (contained.size() > 1) {
        std::string msg = "multiple option texts matched:";
        for (char l : contained) msg += std::string(" ") + l;
        throw ambiguous_answer(msg);
    }
    throw unparseable_answer("no option label or option text found in response");
}

}  // namespace confalign
