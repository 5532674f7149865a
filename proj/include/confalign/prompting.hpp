#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "confalign/common.hpp"
#include "confalign/dataset.hpp"

namespace confalign {

struct template_error : error {
    using error::error;
};
struct unsupported_combination : error {
    using error::error;
};

enum class certainty_scale_kind { likert6, likert5, likert5_defs, numerical_1_100 };

inline const char* to_string(certainty_scale_kind k) {
    switch (k) {
        case certainty_scale_kind::likert6: return "likert6";
        case certainty_scale_kind::likert5: return "likert5";
        case certainty_scale_kind::likert5_defs: return "likert5_defs";
        case certainty_scale_kind::numerical_1_100: return "numerical_1_100";
    }
    return "?";
}

inline certainty_scale_kind scale_kind_from_string(const std::string& s) {
    if (s == "likert6") return certainty_scale_kind::likert6;
    if (s == "likert5") return certainty_scale_kind::likert5;
    if (s == "likert5_defs") return certainty_scale_kind::likert5_defs;
    if (s == "numerical_1_100" || s == "numerical") return certainty_scale_kind::numerical_1_100;
    throw config_error("unknown scale: " + s);
}

struct likert_category {
    char key = 0;            // lowercase key letter as printed in the prompt
    std::string label;       // canonical category phrase
    double score = 0.0;      // value in [0,1]
    std::string definition;  // optional, rendered as ": definition"
};

// Categories stored in strictly decreasing score order starting at 1.0.
struct likert_scale {
    std::string name;
    std::vector<likert_category> categories;

    const likert_category* by_key(char key) const {
        for (const auto& c : categories)
            if (c.key == key) return &c;
        return nullptr;
    }
    // Lines "k. label" in key order, no trailing newline.
    std::string render_block() const {
        std::vector<const likert_category*> by_letter;
        for (const auto& c : categories) by_letter.push_back(&c);
        std::sort(by_letter.begin(), by_letter.end(),
                  [](const likert_category* a, const likert_category* b) { return a->key < b->key; });
        std::string out;
        for (const auto* c : by_letter) {
            if (!out.empty()) out += '\n';
            out += c->key;
            out += ". ";
            out += c->label;
            if (!c->definition.empty()) out += ": " + c->definition;
        }
        return out;
    }
};

inline const likert_scale& likert6_scale() {
    static const likert_scale s{
        "likert6",
        {{'a', "very certain", 1.0, ""},
         {'b', "fairly certain", 0.8, ""},
         {'c', "moderately certain", 0.6, ""},
         {'d', "somewhat certain", 0.4, ""},
         {'e', "not certain", 0.2, ""},
         {'f', "very uncertain", 0.0, ""}}};
    return s;
}

inline const likert_scale& likert5_scale() {
    static const likert_scale s{
        "likert5",
        {{'e', "Completely certain", 1.0, ""},
         {'d', "Fairly certain", 0.75, ""},
         {'c', "Somewhat certain", 0.5, ""},
         {'b', "Slightly certain", 0.25, ""},
         {'a', "Not certain at all", 0.0, ""}}};
    return s;
}

inline const likert_scale& likert5_defs_scale() {
    static const likert_scale s{
        "likert5_defs",
        {{'e', "Completely certain", 1.0, "Model has high confidence and no doubt in the answer."},
         {'d', "Fairly certain", 0.75, "Model has a reasonable amount of confidence in the answer."},
         {'c', "Somewhat certain", 0.5, "Model has moderate confidence in the answer."},
         {'b', "Slightly certain", 0.25, "Model has a small amount of confidence in the answer."},
         {'a', "Not certain at all", 0.0, "Model has very low confidence in the answer."}}};
    return s;
}

inline const likert_scale& scale_for(certainty_scale_kind kind) {
    switch (kind) {
        case certainty_scale_kind::likert6: return likert6_scale();
        case certainty_scale_kind::likert5: return likert5_scale();
        case certainty_scale_kind::likert5_defs: return likert5_defs_scale();
        case certainty_scale_kind::numerical_1_100: break;
    }
    throw validation_error("numerical scale has no likert categories");
}

// Which certainty-prompt components are active.
struct prompt_variant {
    bool use_tpp = true;
    bool use_oc = true;
    certainty_scale_kind scale = certainty_scale_kind::likert6;
    bool strict_grammar = false;
    int self_consistency_samples = 1;

    std::string id() const {
        std::string base = cqp_template_name(*this);
        if (self_consistency_samples > 1) base += "_sc" + std::to_string(self_consistency_samples);
        return base;
    }

    static std::string cqp_template_name(const prompt_variant& v) {
        if (v.scale == certainty_scale_kind::numerical_1_100) {
            if (v.strict_grammar) throw unsupported_combination("numerical scale with strict grammar has no template");
            return "numerical";
        }
        if (v.strict_grammar) return "strict";
        switch (v.scale) {
            case certainty_scale_kind::likert5: return "likert5";
            case certainty_scale_kind::likert5_defs: return "likert5_defs";
            default: break;
        }
        if (v.use_tpp && v.use_oc) return "full";
        if (v.use_tpp) return "ttp_lsu";
        if (v.use_oc) return "oc_lsu";
        return "lsu";
    }

    static prompt_variant from_name(const std::string& name) {
        prompt_variant v;
        if (name == "full") {
            v.use_tpp = true, v.use_oc = true;
        } else if (name == "lsu") {
            v.use_tpp = false, v.use_oc = false;
        } else if (name == "ttp_lsu") {
            v.use_tpp = true, v.use_oc = false;
        } else if (name == "oc_lsu") {
            v.use_tpp = false, v.use_oc = true;
        } else if (name == "numerical") {
            v.use_tpp = false, v.use_oc = false, v.scale = certainty_scale_kind::numerical_1_100;
        } else if (name == "likert5") {
            v.scale = certainty_scale_kind::likert5;
        } else if (name == "likert5_defs") {
            v.scale = certainty_scale_kind::likert5_defs;
        } else if (name == "strict") {
            v.scale = certainty_scale_kind::likert5, v.strict_grammar = true;
        } else {
            throw config_error("unknown prompt variant: " + name);
        }
        return v;
    }
};

inline const std::vector<std::string>& cqp_template_names() {
    static const std::vector<std::string> names{"full",      "lsu",     "ttp_lsu",      "oc_lsu",
                                                "numerical", "likert5", "likert5_defs", "strict"};
    return names;
}

// Prompt templates live on disk so they can be diffed against golden files and
// customized without recompiling. Loaded once at startup, immutable afterwards.
struct template_set {
    std::string answer_template;
    std::map<std::string, std::string> cqp;

    static template_set load(const std::string& dir) {
        template_set t;
        t.answer_template = detail::read_file(dir + "/answer.txt");
        for (const auto& name : cqp_template_names())
            t.cqp[name] = detail::read_file(dir + "/cqp/" + name + ".txt");
        return t;
    }

    const std::string& cqp_template(const std::string& name) const {
        auto it = cqp.find(name);
        if (it == cqp.end()) throw template_error("missing cqp template: " + name);
        return it->second;
    }
};

namespace detail {

// "A. text, B. text, ..." inline form used by the Options sentence.
inline std::string choices_text(const question& q) {
    std::string out;
    for (const auto& o : q.options) {
        if (!out.empty()) out += ", ";
        out += o.label;
        out += ". ";
        out += o.text;
    }
    return out;
}

// "A. text\nB. text..." block form used by the answer prompt.
inline std::string choices_lines(const question& q) {
    std::string out;
    for (const auto& o : q.options) {
        if (!out.empty()) out += '\n';
        out += o.label;
        out += ". ";
        out += o.text;
    }
    return out;
}

// Single-pass substitution of known {placeholders}; replacement text is never
// rescanned, so braces inside question or answer text pass through verbatim.
inline std::string render_template(const std::string& tpl,
                                   const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tpl.size() + 64);
    size_t pos = 0;
    while (pos < tpl.size()) {
        size_t open = tpl.find('{', pos);
        if (open == std::string::npos) {
            out.append(tpl, pos, std::string::npos);
            break;
        }
        size_t close = tpl.find('}', open + 1);
        if (close == std::string::npos) {
            out.append(tpl, pos, std::string::npos);
            break;
        }
        std::string name = tpl.substr(open + 1, close - open - 1);
        auto it = values.find(name);
        if (it == values.end()) {
            out.append(tpl, pos, close + 1 - pos);
        } else {
            out.append(tpl, pos, open - pos);
            out.append(it->second);
        }
        pos = close + 1;
    }
    return out;
}

}  // namespace detail

// Stem, one "LABEL. text" line per option, then the "Answer: " cue.
inline std::string build_answer_prompt(const question& q, const template_set& templates) {
    auto violations = validate_question(q);
    if (!violations.empty()) throw validation_error("invalid question " + q.id + ": " + violations.front());
    return detail::render_template(templates.answer_template,
                                   {{"question", q.stem}, {"choices_lines", detail::choices_lines(q)}});
}

// Renders the confidence-querying prompt for the variant's active components.
inline std::string build_cqp(const question& q, const std::string& model_answer,
                             const prompt_variant& variant, const template_set& templates) {
    if (model_answer.empty()) throw validation_error("model answer must be non-empty");
    std::string name = prompt_variant::cqp_template_name(variant);
    std::map<std::string, std::string> values{{"question", q.stem},
                                              {"choices_text", detail::choices_text(q)},
                                              {"response_text", model_answer}};
    if (variant.scale != certainty_scale_kind::numerical_1_100)
        values["scale_block"] = scale_for(variant.scale).render_block();
    return detail::render_template(templates.cqp_template(name), values);
}

// The five ablation rows, in table order; none uses self-consistency.
inline std::vector<prompt_variant> enumerate_ablation_variants() {
    std::vector<prompt_variant> out;
    for (const char* name : {"numerical", "lsu", "ttp_lsu", "oc_lsu", "full"})
        out.push_back(prompt_variant::from_name(name));
    return out;
}

}  // namespace confalign
