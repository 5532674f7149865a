// confalign — measure confidence-probability alignment of LLMs on
// multiple-choice QA: elicit answers, compute adjusted internal confidence
// from token probabilities, query verbalized certainty, and correlate the two.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "confalign/factory.hpp"
#include "confalign/report.hpp"
#include "confalign/runner.hpp"

namespace fs = std::filesystem;
using namespace confalign;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_fatal = 1;
constexpr int exit_degraded = 2;

void write_common_outputs(const std::string& dir, const std::vector<trial_record>& records,
                          const alignment_report& rep) {
    fs::create_directories(dir);
    detail::write_file(dir + "/records.jsonl", serialize_records(records));
    detail::write_file(dir + "/report.json", report_to_json(rep).dump(2) + "\n");
    detail::write_file(dir + "/report.md", report_to_markdown(rep));
    detail::write_file(dir + "/matrices.csv", matrices_to_csv(rep));
    detail::write_file(dir + "/histogram.csv", histograms_to_csv(rep));
}

void write_manifest(const std::string& dir, const run_manifest& manifest) {
    detail::write_file(dir + "/manifest.json", manifest_to_json(manifest).dump(2) + "\n");
}

alignment_report report_for(const run_result& result, const run_config& cfg, const backend& be) {
    alignment_report rep = build_report(result.records, cfg.thresholds);
    rep.model = be.model();
    rep.backend_id = be.id();
    rep.stability = result.stability;
    return rep;
}

int cmd_run(const std::string& config_path, const std::string& out_override) {
    run_config cfg = load_run_config(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    template_set templates = template_set::load(cfg.templates_dir);
    backend_bundle bundle = make_backend(cfg);

    run_result result = run_evaluation(*bundle.active, cfg, templates, bundle.cache_view);
    alignment_report rep = report_for(result, cfg, *bundle.active);
    write_common_outputs(cfg.output_dir, result.records, rep);
    write_manifest(cfg.output_dir, result.manifest);

    std::printf("%zu trials | rho %s | failures %zu | errors %zu | out %s\n", result.manifest.trials,
                rep.overall.rho_defined ? detail::format_fixed(rep.overall.rho).c_str() : "undefined",
                result.manifest.parse_failures, result.manifest.error_trials, cfg.output_dir.c_str());
    return result.manifest.degraded ? exit_degraded : exit_ok;
}

int cmd_sweep(const std::string& config_path, const std::string& out_override) {
    run_config cfg = load_run_config(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    template_set templates = template_set::load(cfg.templates_dir);
    backend_bundle bundle = make_backend(cfg);

    run_result result = run_temperature_sweep(*bundle.active, cfg, templates, bundle.cache_view);
    alignment_report rep = report_for(result, cfg, *bundle.active);
    write_common_outputs(cfg.output_dir, result.records, rep);
    detail::write_file(cfg.output_dir + "/temperature_curve.csv", temperature_curve_to_csv(result.stability));
    write_manifest(cfg.output_dir, result.manifest);

    for (const auto& p : result.stability)
        std::printf("T=%.1f  avg_std=%.4f  (questions=%zu, excluded=%zu)\n", p.temperature, p.avg_std,
                    p.questions, p.excluded);
    return result.manifest.degraded ? exit_degraded : exit_ok;
}

int cmd_ablate(const std::string& config_path, const std::string& out_override) {
    run_config cfg = load_run_config(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    template_set templates = template_set::load(cfg.templates_dir);
    backend_bundle bundle = make_backend(cfg);

    auto per_variant = run_ablation(*bundle.active, cfg, templates, bundle.cache_view);
    fs::create_directories(cfg.output_dir);

    std::vector<std::pair<std::string, std::vector<trial_record>>> table_input;
    bool degraded = false;
    for (const auto& [variant, result] : per_variant) {
        detail::write_file(cfg.output_dir + "/records_" + variant + ".jsonl", serialize_records(result.records));
        table_input.emplace_back(variant, result.records);
        degraded |= result.manifest.degraded;
    }
    ablation_table_result table = ablation_table(table_input);
    detail::write_file(cfg.output_dir + "/report.md", ablation_to_markdown(table));
    detail::write_file(cfg.output_dir + "/report.json", ablation_to_json(table).dump(2) + "\n");
    write_manifest(cfg.output_dir, per_variant.back().second.manifest);

    std::printf("%zu variants x %zu datasets -> %s/report.md\n", table.variants.size(), table.datasets.size(),
                cfg.output_dir.c_str());
    return degraded ? exit_degraded : exit_ok;
}

int cmd_report(const std::string& records_dir, const std::string& out_override, double ic_high, double vc_high) {
    std::string records_path = records_dir + "/records.jsonl";
    std::vector<trial_record> records = parse_records(detail::read_file(records_path));
    alignment_thresholds thresholds{ic_high, vc_high};
    alignment_report rep = build_report(records, thresholds);
    if (fs::exists(records_dir + "/manifest.json")) {
        json manifest = json::parse(detail::read_file(records_dir + "/manifest.json"));
        rep.model = manifest.at("config").value("model", std::string());
        rep.backend_id = manifest.at("config").value("backend_id", std::string());
    }

    std::string out = out_override.empty() ? records_dir : out_override;
    fs::create_directories(out);
    detail::write_file(out + "/report.json", report_to_json(rep).dump(2) + "\n");
    detail::write_file(out + "/report.md", report_to_markdown(rep));
    detail::write_file(out + "/matrices.csv", matrices_to_csv(rep));
    detail::write_file(out + "/histogram.csv", histograms_to_csv(rep));

    std::printf("%zu records | rho %s | reports in %s\n", records.size(),
                rep.overall.rho_defined ? detail::format_fixed(rep.overall.rho).c_str() : "undefined",
                out.c_str());
    return exit_ok;
}

int cmd_validate(const std::string& dataset_path, const std::string& emit_path) {
    dataset ds = load_dataset(dataset_path);
    std::printf("%s: %zu valid, %zu rejected of %zu lines (checksum %s)\n", ds.name.c_str(),
                ds.questions.size(), ds.rejected.size(), ds.total_lines, ds.manifest.checksum.c_str());
    for (const auto& r : ds.rejected) std::printf("  line %zu: %s\n", r.line_no, r.message.c_str());
    if (!emit_path.empty()) {
        detail::write_file(emit_path, serialize_questions(ds.questions));
        std::printf("normalized records written to %s\n", emit_path.c_str());
    }
    return ds.rejected.empty() ? exit_ok : exit_degraded;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"confidence-probability alignment toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, records_dir, dataset_path, emit_path;
    double ic_high = 0.9, vc_high = 0.8;

    auto* run = app.add_subcommand("run", "run a full evaluation");
    run->add_option("--config", config_path, "run config file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "override output directory");

    auto* sweep = app.add_subcommand("sweep", "temperature-stability sweep");
    sweep->add_option("--config", config_path, "run config file")->required()->check(CLI::ExistingFile);
    sweep->add_option("--out", out_dir, "override output directory");

    auto* ablate = app.add_subcommand("ablate", "prompt-component ablation over the five standard variants");
    ablate->add_option("--config", config_path, "run config file")->required()->check(CLI::ExistingFile);
    ablate->add_option("--out", out_dir, "override output directory");

    auto* report = app.add_subcommand("report", "rebuild reports from a records directory");
    report->add_option("--records", records_dir, "directory containing records.jsonl")
        ->required()
        ->check(CLI::ExistingDirectory);
    report->add_option("--out", out_dir, "output directory (default: records dir)");
    report->add_option("--ic-high", ic_high, "internal-confidence threshold");
    report->add_option("--vc-high", vc_high, "verbalized-certainty threshold");

    auto* validate = app.add_subcommand("validate", "validate a dataset file");
    validate->add_option("--dataset", dataset_path, "line-delimited JSON dataset")
        ->required()
        ->check(CLI::ExistingFile);
    validate->add_option("--emit", emit_path, "write normalized records here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, out_dir);
        if (sweep->parsed()) return cmd_sweep(config_path, out_dir);
        if (ablate->parsed()) return cmd_ablate(config_path, out_dir);
        if (report->parsed()) return cmd_report(records_dir, out_dir, ic_high, vc_high);
        if (validate->parsed()) return cmd_validate(dataset_path, emit_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "confalign: %s\n", e.what());
        return exit_fatal;
    }
    return exit_fatal;
}
