#pragma once

#include <optional>
#include <string>
#include <vector>

#include "confalign/common.hpp"

namespace confalign {

struct dataset_error : error {
    using error::error;
};

struct question_option {
    char label = 0;  // uppercase A-H
    std::string text;
};

// One multiple-choice item: stem plus labeled options, optional gold label.
struct question {
    std::string id;
    std::string stem;
    std::vector<question_option> options;
    std::optional<char> gold;

    std::vector<char> labels() const {
        std::vector<char> out;
        out.reserve(options.size());
        for (const auto& o : options) out.push_back(o.label);
        return out;
    }
    const std::string* option_text(char label) const {
        for (const auto& o : options)
            if (o.label == label) return &o.text;
        return nullptr;
    }
};

struct dataset_manifest {
    std::string name;
    std::string source_path;
    std::size_t question_count = 0;
    std::string checksum;  // fnv1a64 over the raw file bytes
};

struct rejected_line {
    std::size_t line_no = 0;  // 1-based
    std::string message;
};

struct dataset {
    std::string name;
    std::vector<question> questions;
    std::vector<rejected_line> rejected;
    std::size_t total_lines = 0;
    dataset_manifest manifest;
};

// Every invariant violation as a string; empty means valid.
inline std::vector<std::string> validate_question(const question& q) {
    std::vector<std::string> v;
    if (q.id.empty()) v.push_back("empty id");
    if (q.stem.empty()) v.push_back("empty stem");
    if (q.options.size() < 2) v.push_back("fewer than 2 options");
    if (q.options.size() > 8) v.push_back("more than 8 options");

    bool duplicate = false, bad_letter = false, out_of_range = false;
    std::vector<bool> seen(26, false);
    for (const auto& o : q.options) {
        if (o.label < 'A' || o.label > 'Z') {
            bad_letter = true;
            continue;
        }
        if (o.label > 'H') out_of_range = true;
        if (seen[static_cast<size_t>(o.label - 'A')]) duplicate = true;
        seen[static_cast<size_t>(o.label - 'A')] = true;
        if (o.text.empty()) v.push_back(std::string("empty option text for label ") + o.label);
    }
    if (bad_letter) v.push_back("label not an uppercase letter");
    if (out_of_range) v.push_back("label beyond H");
    if (duplicate) v.push_back("duplicate label");
    if (!bad_letter && !duplicate) {
        // contiguous ascending run starting at 'A'
        bool contiguous = true;
        for (size_t i = 0; i < q.options.size(); ++i)
            if (q.options[i].label != static_cast<char>('A' + i)) contiguous = false;
        if (!contiguous) v.push_back("labels not contiguous");
    }
    if (q.gold) {
        bool found = false;
        for (const auto& o : q.options)
            if (o.label == *q.gold) found = true;
        if (!found) v.push_back("gold label not among option labels");
    }
    return v;
}

namespace detail {

// {"id": str, "stem": str, "options": [{"label","text"}...], "gold": str|null}
inline question question_from_json(const json& j) {
    question q;
    q.id = j.at("id").get<std::string>();
    q.stem = j.at("stem").get<std::string>();
    for (const auto& o : j.at("options")) {
        question_option opt;
        std::string label = o.at("label").get<std::string>();
        if (label.size() != 1) throw validation_error("option label must be a single letter");
        opt.label = static_cast<char>(std::toupper(static_cast<unsigned char>(label[0])));
        opt.text = o.at("text").get<std::string>();
        q.options.push_back(std::move(opt));
    }
    if (j.contains("gold") && !j.at("gold").is_null()) {
        std::string g = j.at("gold").get<std::string>();
        if (g.size() != 1) throw validation_error("gold label must be a single letter");
        q.gold = static_cast<char>(std::toupper(static_cast<unsigned char>(g[0])));
    }
    return q;
}

inline json question_to_json(const question& q) {
    json j;
    j["id"] = q.id;
    j["stem"] = q.stem;
    json opts = json::array();
    for (const auto& o : q.options) opts.push_back({{"label", std::string(1, o.label)}, {"text", o.text}});
    j["options"] = std::move(opts);
    j["gold"] = q.gold ? json(std::string(1, *q.gold)) : json(nullptr);
    return j;
}

inline std::string dataset_name_from_path(const std::string& path) {
    size_t slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    size_t dot = base.find_last_of('.');
    return dot == std::string::npos ? base : base.substr(0, dot);
}

}  // namespace detail

// Canonical normalized re-emission, same line-delimited format as the input.
inline std::string serialize_questions(const std::vector<question>& questions) {
    std::string out;
    for (const auto& q : questions) {
        out += detail::question_to_json(q).dump();
        out += '\n';
    }
    return out;
}

// Loads line-delimited JSON records; invalid lines are collected, valid ones kept
// in file order. Throws on unreadable files and when zero records validate.
inline dataset load_dataset(const std::string& path) {
    std::string bytes = detail::read_file(path);
    dataset ds;
    ds.name = detail::dataset_name_from_path(path);

    auto lines = detail::split_lines(bytes);
    ds.total_lines = lines.size();
    for (size_t i = 0; i < lines.size(); ++i) {
        const size_t line_no = i + 1;
        if (detail::trim(lines[i]).empty()) {
            ds.rejected.push_back({line_no, "empty line"});
            continue;
        }
        question q;
        try {
            q = detail::question_from_json(json::parse(lines[i]));
        } catch (const std::exception& e) {
            ds.rejected.push_back({line_no, std::string("malformed record: ") + e.what()});
            continue;
        }
        auto violations = validate_question(q);
        if (!violations.empty()) {
            std::string msg = "invalid question:";
            for (const auto& v : violations) msg += " " + v + ";";
            ds.rejected.push_back({line_no, msg});
            continue;
        }
        ds.questions.push_back(std::move(q));
    }
    if (ds.questions.empty()) throw dataset_error("zero valid records in " + path);

    ds.manifest.name = ds.name;
    ds.manifest.source_path = path;
    ds.manifest.question_count = ds.questions.size();
    ds.manifest.checksum = "fnv1a64:" + detail::to_hex64(detail::fnv1a64(bytes));
    return ds;
}

inline json manifest_to_json(const dataset_manifest& m) {
    return json{{"name", m.name},
                {"source_path", m.source_path},
                {"question_count", m.question_count},
                {"checksum", m.checksum}};
}

}  // namespace confalign
