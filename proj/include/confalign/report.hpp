#pragma once

#include <map>
#include <string>
#include <vector>

#include "confalign/analysis.hpp"
#include "confalign/common.hpp"

namespace confalign {

// --- trial record serialization ------------------------------------------------

inline json trial_record_to_json(const trial_record& r) {
    json j;
    j["question_id"] = r.question_id;
    j["dataset"] = r.dataset;
    j["variant"] = r.variant_id;
    j["chosen"] = r.chosen ? json(std::string(1, r.chosen)) : json(nullptr);
    j["internal_confidence"] = r.internal_confidence ? json(*r.internal_confidence) : json(nullptr);
    j["verbalized_score"] = r.verbalized_score ? json(*r.verbalized_score) : json(nullptr);
    j["verbalized_category"] = r.verbalized_category ? json(*r.verbalized_category) : json(nullptr);
    j["verbal_failure"] = r.verbal_failure ? json(to_string(*r.verbal_failure)) : json(nullptr);
    j["correct"] = r.correct ? json(*r.correct) : json(nullptr);
    j["temperature"] = r.temperature;
    j["sample_index"] = r.sample_index;
    j["taxonomy"] = r.taxonomy ? json(to_string(*r.taxonomy)) : json(nullptr);
    j["error"] = r.error ? json(*r.error) : json(nullptr);
    j["answer_text"] = r.answer_text;
    j["certainty_text"] = r.certainty_text;
    j["label_ambiguity"] = r.label_ambiguity;
    j["letter_conflict"] = r.letter_conflict;
    return j;
}

inline trial_record trial_record_from_json(const json& j) {
    trial_record r;
    r.question_id = j.at("question_id").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.variant_id = j.at("variant").get<std::string>();
    if (!j.at("chosen").is_null()) r.chosen = j.at("chosen").get<std::string>().at(0);
    if (!j.at("internal_confidence").is_null()) r.internal_confidence = j.at("internal_confidence").get<double>();
    if (!j.at("verbalized_score").is_null()) r.verbalized_score = j.at("verbalized_score").get<double>();
    if (!j.at("verbalized_category").is_null())
        r.verbalized_category = j.at("verbalized_category").get<std::string>();
    if (!j.at("verbal_failure").is_null())
        r.verbal_failure = certainty_failure_from_string(j.at("verbal_failure").get<std::string>());
    if (!j.at("correct").is_null()) r.correct = j.at("correct").get<bool>();
    r.temperature = j.at("temperature").get<double>();
    r.sample_index = j.at("sample_index").get<int>();
    if (!j.at("taxonomy").is_null()) r.taxonomy = taxonomy_from_string(j.at("taxonomy").get<std::string>());
    if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
    r.answer_text = j.at("answer_text").get<std::string>();
    r.certainty_text = j.at("certainty_text").get<std::string>();
    r.label_ambiguity = j.at("label_ambiguity").get<bool>();
    r.letter_conflict = j.at("letter_conflict").get<bool>();
    return r;
}

inline std::string serialize_records(const std::vector<trial_record>& records) {
    std::string out;
    for (const auto& r : records) {
        out += trial_record_to_json(r).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<trial_record> parse_records(const std::string& text) {
    std::vector<trial_record> out;
    for (const auto& line : detail::split_lines(text)) {
        if (detail::trim(line).empty()) continue;
        out.push_back(trial_record_from_json(json::parse(line)));
    }
    return out;
}

// --- report ----------------------------------------------------------------------

struct dataset_stats {
    std::string name;
    correlation_result corr;
    std::size_t trials = 0;
};

// All statistics for one record set (one variant).
struct alignment_report {
    std::string model;
    std::string backend_id;
    std::string variant_id;
    alignment_thresholds thresholds;
    correlation_result overall;
    std::vector<dataset_stats> datasets;
    std::map<taxonomy_label, std::size_t> taxonomy_counts;
    std::map<certainty_failure, std::size_t> failure_counts;
    std::size_t total_trials = 0;
    std::size_t error_trials = 0;
    std::size_t paired_trials = 0;  // observations feeding rho
    confusion_matrix verbal_matrix;
    confusion_matrix internal_matrix;
    histogram verbal_histogram;
    histogram internal_histogram;
    std::vector<stability_point> stability;  // present for sweep runs
};

inline alignment_report build_report(const std::vector<trial_record>& records,
                                     alignment_thresholds thresholds = {}) {
    alignment_report rep;
    rep.thresholds = thresholds;
    rep.total_trials = records.size();
    rep.overall = alignment_correlation(records);
    rep.paired_trials = records_with_pair(records).size();
    if (!records.empty()) rep.variant_id = records.front().variant_id;

    std::map<std::string, std::vector<trial_record>> by_dataset;
    for (const auto& r : records) by_dataset[r.dataset].push_back(r);
    for (const auto& [name, rs] : by_dataset) {
        dataset_stats ds;
        ds.name = name;
        ds.trials = rs.size();
        ds.corr = alignment_correlation(rs);
        rep.datasets.push_back(std::move(ds));
    }

    for (const auto& r : records) {
        if (r.taxonomy) rep.taxonomy_counts[*r.taxonomy] += 1;
        if (r.verbal_failure) rep.failure_counts[*r.verbal_failure] += 1;
        if (r.error) rep.error_trials += 1;
    }
    rep.verbal_matrix = verbal_confusion_matrix(records);
    rep.internal_matrix = internal_confusion_matrix(records);
    rep.verbal_histogram = certainty_histogram(records);
    rep.internal_histogram = confidence_histogram(records);
    return rep;
}

namespace detail {

inline json corr_to_json(const correlation_result& c) {
    json j;
    j["rho"] = c.rho_defined ? json(c.rho) : json(nullptr);
    j["p_value"] = std::isnan(c.p_value) ? json(nullptr) : json(c.p_value);
    j["n"] = c.n;
    j["defined"] = c.rho_defined;
    return j;
}

inline json matrix_to_json(const confusion_matrix& m) {
    if (m.empty) return json{{"empty", true}};
    return json{{"empty", false},
                {"pos_correct", m.pos_correct},
                {"pos_incorrect", m.pos_incorrect},
                {"neg_correct", m.neg_correct},
                {"neg_incorrect", m.neg_incorrect},
                {"n", m.n},
                {"residual_fraction", m.residual_fraction}};
}

inline json histogram_to_json(const histogram& h) {
    json bins = json::array();
    for (size_t i = 0; i < h.labels.size(); ++i)
        bins.push_back(json{{"bin", h.labels[i]}, {"percentage", h.percentages[i]}});
    return json{{"n", h.n}, {"bins", std::move(bins)}};
}

}  // namespace detail

inline json report_to_json(const alignment_report& rep) {
    json j;
    j["model"] = rep.model;
    j["backend_id"] = rep.backend_id;
    j["variant"] = rep.variant_id;
    j["thresholds"] = json{{"ic_high", rep.thresholds.ic_high}, {"vc_high", rep.thresholds.vc_high}};
    j["overall"] = detail::corr_to_json(rep.overall);
    json datasets = json::array();
    for (const auto& d : rep.datasets)
        datasets.push_back(json{{"name", d.name}, {"trials", d.trials}, {"correlation", detail::corr_to_json(d.corr)}});
    j["datasets"] = std::move(datasets);
    json tax;
    for (auto label : {taxonomy_label::consistent_alignment, taxonomy_label::internal_overconfidence,
                       taxonomy_label::external_overconfidence, taxonomy_label::consistent_discordance}) {
        auto it = rep.taxonomy_counts.find(label);
        tax[to_string(label)] = it == rep.taxonomy_counts.end() ? 0 : it->second;
    }
    j["taxonomy"] = std::move(tax);
    json failures;
    for (auto f : {certainty_failure::multiple_categories, certainty_failure::no_category,
                   certainty_failure::option_reiteration, certainty_failure::numeric_out_of_range}) {
        auto it = rep.failure_counts.find(f);
        failures[to_string(f)] = it == rep.failure_counts.end() ? 0 : it->second;
    }
    j["verbal_failures"] = std::move(failures);
    j["counts"] = json{{"total_trials", rep.total_trials},
                       {"paired_trials", rep.paired_trials},
                       {"error_trials", rep.error_trials}};
    j["verbal_matrix"] = detail::matrix_to_json(rep.verbal_matrix);
    j["internal_matrix"] = detail::matrix_to_json(rep.internal_matrix);
    j["verbal_histogram"] = detail::histogram_to_json(rep.verbal_histogram);
    j["internal_histogram"] = detail::histogram_to_json(rep.internal_histogram);
    if (!rep.stability.empty()) {
        json curve = json::array();
        for (const auto& p : rep.stability)
            curve.push_back(json{{"temperature", p.temperature},
                                 {"avg_std", p.avg_std},
                                 {"questions", p.questions},
                                 {"excluded", p.excluded}});
        j["temperature_curve"] = std::move(curve);
    }
    return j;
}

namespace detail {

inline std::string rho_cell(const correlation_result& c, bool best) {
    if (!c.rho_defined) return "undefined";
    std::string s = format_fixed(c.rho);
    return best ? "**" + s + "**" : s;
}

}  // namespace detail

inline std::string report_to_markdown(const alignment_report& rep) {
    std::string md;
    md += "# Confidence-probability alignment report\n\n";
    md += "Model: " + (rep.model.empty() ? std::string("(unknown)") : rep.model);
    md += " | variant: " + rep.variant_id + "\n\n";

    md += "| Dataset | n | Spearman rho | p-value |\n|---|---|---|---|\n";
    for (const auto& d : rep.datasets) {
        md += "| " + d.name + " | " + std::to_string(d.corr.n) + " | ";
        md += d.corr.rho_defined ? detail::format_fixed(d.corr.rho) : std::string("undefined");
        md += " | ";
        md += std::isnan(d.corr.p_value) ? std::string("-") : detail::format_fixed(d.corr.p_value);
        md += " |\n";
    }
    md += "| overall | " + std::to_string(rep.overall.n) + " | ";
    md += rep.overall.rho_defined ? detail::format_fixed(rep.overall.rho) : std::string("undefined");
    md += " | ";
    md += std::isnan(rep.overall.p_value) ? std::string("-") : detail::format_fixed(rep.overall.p_value);
    md += " |\n\n";

    md += "## Alignment taxonomy\n\n| Label | Count |\n|---|---|\n";
    for (auto label : {taxonomy_label::consistent_alignment, taxonomy_label::internal_overconfidence,
                       taxonomy_label::external_overconfidence, taxonomy_label::consistent_discordance}) {
        auto it = rep.taxonomy_counts.find(label);
        md += std::string("| ") + to_string(label) + " | " +
              std::to_string(it == rep.taxonomy_counts.end() ? 0 : it->second) + " |\n";
    }
    md += "\n## Verbalization failures\n\n| Failure | Count |\n|---|---|\n";
    for (auto f : {certainty_failure::multiple_categories, certainty_failure::no_category,
                   certainty_failure::option_reiteration, certainty_failure::numeric_out_of_range}) {
        auto it = rep.failure_counts.find(f);
        md += std::string("| ") + to_string(f) + " | " +
              std::to_string(it == rep.failure_counts.end() ? 0 : it->second) + " |\n";
    }

    auto matrix_block = [&](const char* title, const confusion_matrix& m, const char* pos, const char* neg) {
        md += std::string("\n## ") + title + "\n\n";
        if (m.empty) {
            md += "(empty)\n";
            return;
        }
        md += "| | correct | incorrect |\n|---|---|---|\n";
        md += std::string("| ") + pos + " | " + detail::format_fixed(m.pos_correct) + " | " +
              detail::format_fixed(m.pos_incorrect) + " |\n";
        md += std::string("| ") + neg + " | " + detail::format_fixed(m.neg_correct) + " | " +
              detail::format_fixed(m.neg_incorrect) + " |\n";
        md += "\nresidual fraction: " + detail::format_fixed(m.residual_fraction) + " (n=" + std::to_string(m.n) +
              ")\n";
    };
    matrix_block("Verbalized certainty vs correctness", rep.verbal_matrix, "very certain", "fairly certain");
    matrix_block("Internal confidence vs correctness (median split)", rep.internal_matrix, "above median",
                 "at/below median");
    return md;
}

// Table-5-shaped matrix: one row per prompt configuration, one column per
// dataset, highest defined rho per dataset flagged in bold.
inline std::string ablation_to_markdown(const ablation_table_result& table,
                                        const std::map<std::string, std::string>& display_names = {
                                            {"numerical", "Numerical scale"},
                                            {"lsu", "LSU"},
                                            {"ttp_lsu", "TTP + LSU"},
                                            {"oc_lsu", "OC + LSU"},
                                            {"full", "TTP + LSU + OC"}}) {
    std::string md = "# Prompt-component ablation\n\n| Prompt |";
    for (const auto& ds : table.datasets) md += " " + ds + " |";
    md += "\n|---|";
    for (size_t i = 0; i < table.datasets.size(); ++i) md += "---|";
    md += "\n";
    for (size_t row = 0; row < table.variants.size(); ++row) {
        auto it = display_names.find(table.variants[row]);
        md += "| " + (it == display_names.end() ? table.variants[row] : it->second) + " |";
        for (size_t col = 0; col < table.datasets.size(); ++col)
            md += " " + detail::rho_cell(table.cells[row][col], table.best_row[col] == row) + " |";
        md += "\n";
    }
    return md;
}

inline json ablation_to_json(const ablation_table_result& table) {
    json j;
    j["datasets"] = table.datasets;
    json rows = json::array();
    for (size_t row = 0; row < table.variants.size(); ++row) {
        json r;
        r["variant"] = table.variants[row];
        json cells = json::array();
        for (size_t col = 0; col < table.datasets.size(); ++col) {
            json c = detail::corr_to_json(table.cells[row][col]);
            c["best"] = table.best_row[col] == row;
            cells.push_back(std::move(c));
        }
        r["cells"] = std::move(cells);
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    return j;
}

// --- csv emission ------------------------------------------------------------------

inline std::string matrices_to_csv(const alignment_report& rep) {
    std::string csv = "matrix,cell,value\n";
    auto emit = [&](const char* name, const confusion_matrix& m, const char* pos, const char* neg) {
        if (m.empty) return;
        csv += std::string(name) + "," + pos + "_correct," + detail::format_fixed(m.pos_correct) + "\n";
        csv += std::string(name) + "," + pos + "_incorrect," + detail::format_fixed(m.pos_incorrect) + "\n";
        csv += std::string(name) + "," + neg + "_correct," + detail::format_fixed(m.neg_correct) + "\n";
        csv += std::string(name) + "," + neg + "_incorrect," + detail::format_fixed(m.neg_incorrect) + "\n";
        csv += std::string(name) + ",residual_fraction," + detail::format_fixed(m.residual_fraction) + "\n";
    };
    emit("verbal", rep.verbal_matrix, "very_certain", "fairly_certain");
    emit("internal", rep.internal_matrix, "above_median", "at_or_below_median");
    return csv;
}

inline std::string histograms_to_csv(const alignment_report& rep) {
    std::string csv = "histogram,bin,percentage\n";
    for (size_t i = 0; i < rep.verbal_histogram.labels.size(); ++i)
        csv += "verbalized," + rep.verbal_histogram.labels[i] + "," +
               detail::format_fixed(rep.verbal_histogram.percentages[i]) + "\n";
    for (size_t i = 0; i < rep.internal_histogram.labels.size(); ++i)
        csv += "internal," + rep.internal_histogram.labels[i] + "," +
               detail::format_fixed(rep.internal_histogram.percentages[i]) + "\n";
    return csv;
}

inline std::string temperature_curve_to_csv(const std::vector<stability_point>& curve) {
    std::string csv = "temperature,avg_std,questions\n";
    for (const auto& p : curve)
        csv += detail::format_fixed(p.temperature) + "," + detail::format_fixed(p.avg_std) + "," +
               std::to_string(p.questions) + "\n";
    return csv;
}

}  // namespace confalign
