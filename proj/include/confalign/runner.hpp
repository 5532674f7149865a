#pragma once

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "confalign/analysis.hpp"
#include "confalign/backends.hpp"
#include "confalign/certainty.hpp"
#include "confalign/confidence.hpp"
#include "confalign/dataset.hpp"
#include "confalign/prompting.hpp"
#include "confalign/report.hpp"

namespace confalign {

struct backend_spec {
    std::string kind = "mock";  // http | replay | mock | mock-noise
    std::string base_url;
    std::string model = "demo";
    std::string backend_id;  // cache-key identity; defaults per kind
    score_kind scores = score_kind::logprob;
    double requests_per_second = 0.0;
};

struct run_config {
    std::vector<std::string> dataset_paths;
    backend_spec backend;
    prompt_variant variant;
    std::vector<double> temperature_grid{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    int samples_per_temperature = 5;
    alignment_thresholds thresholds;
    std::string cache_path;
    cache_mode mode = cache_mode::off;
    std::string output_dir = "runs/out";
    int concurrency = 4;
    std::uint64_t seed = 0;
    std::string templates_dir = "templates";
    double answer_temperature = 0.0;
    double cqp_temperature = 0.0;
    int answer_max_tokens = 10;
    int cqp_max_tokens = 200;
    int top_candidates = 20;
    bool argmax_mode = false;

    void validate() const {
        if (dataset_paths.empty()) throw config_error("no datasets configured");
        if (temperature_grid.empty()) throw config_error("temperature grid must be non-empty");
        if (samples_per_temperature < 1) throw config_error("samples must be >= 1");
        if (concurrency < 1) throw config_error("concurrency must be >= 1");
        if (top_candidates < 5) throw config_error("top_candidates must be >= 5 to cover option labels");
        if (variant.self_consistency_samples < 1) throw config_error("self_consistency must be >= 1");
    }
};

// --- config file (flat TOML-shaped key = value lines) ---------------------------

namespace detail {

inline json parse_config_scalar(const std::string& raw) {
    std::string v = trim(raw);
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
        std::string out;
        for (size_t i = 1; i + 1 < v.size(); ++i) {
            if (v[i] == '\\' && i + 2 < v.size()) {
                char next = v[i + 1];
                if (next == '"' || next == '\\') {
                    out += next;
                    ++i;
                    continue;
                }
                if (next == 'n') {
                    out += '\n';
                    ++i;
                    continue;
                }
            }
            out += v[i];
        }
        return json(out);
    }
    if (v == "true") return json(true);
    if (v == "false") return json(false);
    try {
        size_t used = 0;
        if (v.find_first_of(".eE") != std::string::npos) {
            double d = std::stod(v, &used);
            if (used == v.size()) return json(d);
        } else {
            long long i = std::stoll(v, &used);
            if (used == v.size()) return json(i);
        }
    } catch (...) {
    }
    throw config_error("cannot parse value: " + v);
}

}  // namespace detail

// Flat key = value pairs, "..." strings, numbers, booleans, [a, b] arrays of
// scalars, and # comments. Section headers and nesting are not supported.
inline json parse_config_text(const std::string& text) {
    json out = json::object();
    auto lines = detail::split_lines(text);
    for (size_t i = 0; i < lines.size(); ++i) {
        std::string line = lines[i];
        // strip comments outside quotes
        bool in_quote = false;
        for (size_t k = 0; k < line.size(); ++k) {
            if (line[k] == '"' && (k == 0 || line[k - 1] != '\\')) in_quote = !in_quote;
            if (line[k] == '#' && !in_quote) {
                line = line.substr(0, k);
                break;
            }
        }
        std::string t = detail::trim(line);
        if (t.empty()) continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw config_error("line " + std::to_string(i + 1) + ": expected key = value");
        std::string key = detail::trim(t.substr(0, eq));
        std::string value = detail::trim(t.substr(eq + 1));
        if (key.empty()) throw config_error("line " + std::to_string(i + 1) + ": empty key");
        if (!value.empty() && value.front() == '[') {
            if (value.back() != ']')
                throw config_error("line " + std::to_string(i + 1) + ": unterminated array");
            json arr = json::array();
            std::string inner = value.substr(1, value.size() - 2);
            std::string item;
            bool quoted = false;
            for (char c : inner) {
                if (c == '"') quoted = !quoted;
                if (c == ',' && !quoted) {
                    if (!detail::trim(item).empty()) arr.push_back(detail::parse_config_scalar(item));
                    item.clear();
                } else {
                    item += c;
                }
            }
            if (!detail::trim(item).empty()) arr.push_back(detail::parse_config_scalar(item));
            out[key] = std::move(arr);
        } else {
            out[key] = detail::parse_config_scalar(value);
        }
    }
    return out;
}

inline run_config run_config_from_json(const json& j) {
    run_config cfg;
    static const std::set<std::string> known{
        "datasets",        "backend",      "base_url",        "model",           "backend_id",
        "score_kind",      "requests_per_second", "variant",  "self_consistency", "temperatures",
        "samples",         "ic_high",      "vc_high",         "cache",           "cache_mode",
        "out",             "concurrency",  "seed",            "templates",       "answer_temperature",
        "cqp_temperature", "answer_max_tokens", "cqp_max_tokens", "top_candidates", "argmax_mode"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw config_error("unknown config key: " + it.key());

    if (j.contains("datasets"))
        for (const auto& d : j.at("datasets")) cfg.dataset_paths.push_back(d.get<std::string>());
    if (j.contains("backend")) cfg.backend.kind = j.at("backend").get<std::string>();
    if (j.contains("base_url")) cfg.backend.base_url = j.at("base_url").get<std::string>();
    if (j.contains("model")) cfg.backend.model = j.at("model").get<std::string>();
    if (j.contains("backend_id")) cfg.backend.backend_id = j.at("backend_id").get<std::string>();
    if (j.contains("score_kind")) cfg.backend.scores = score_kind_from_string(j.at("score_kind").get<std::string>());
    if (j.contains("requests_per_second")) cfg.backend.requests_per_second = j.at("requests_per_second").get<double>();
    if (j.contains("variant")) cfg.variant = prompt_variant::from_name(j.at("variant").get<std::string>());
    if (j.contains("self_consistency")) cfg.variant.self_consistency_samples = j.at("self_consistency").get<int>();
    if (j.contains("temperatures")) {
        cfg.temperature_grid.clear();
        for (const auto& t : j.at("temperatures")) cfg.temperature_grid.push_back(t.get<double>());
    }
    if (j.contains("samples")) cfg.samples_per_temperature = j.at("samples").get<int>();
    if (j.contains("ic_high")) cfg.thresholds.ic_high = j.at("ic_high").get<double>();
    if (j.contains("vc_high")) cfg.thresholds.vc_high = j.at("vc_high").get<double>();
    if (j.contains("cache")) cfg.cache_path = j.at("cache").get<std::string>();
    if (j.contains("cache_mode")) cfg.mode = cache_mode_from_string(j.at("cache_mode").get<std::string>());
    if (j.contains("out")) cfg.output_dir = j.at("out").get<std::string>();
    if (j.contains("concurrency")) cfg.concurrency = j.at("concurrency").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("templates")) cfg.templates_dir = j.at("templates").get<std::string>();
    if (j.contains("answer_temperature")) cfg.answer_temperature = j.at("answer_temperature").get<double>();
    if (j.contains("cqp_temperature")) cfg.cqp_temperature = j.at("cqp_temperature").get<double>();
    if (j.contains("answer_max_tokens")) cfg.answer_max_tokens = j.at("answer_max_tokens").get<int>();
    if (j.contains("cqp_max_tokens")) cfg.cqp_max_tokens = j.at("cqp_max_tokens").get<int>();
    if (j.contains("top_candidates")) cfg.top_candidates = j.at("top_candidates").get<int>();
    if (j.contains("argmax_mode")) cfg.argmax_mode = j.at("argmax_mode").get<bool>();
    return cfg;
}

inline run_config load_run_config(const std::string& path) {
    return run_config_from_json(parse_config_text(detail::read_file(path)));
}

inline json run_config_to_json(const run_config& cfg) {
    json j;
    j["datasets"] = cfg.dataset_paths;
    j["backend"] = cfg.backend.kind;
    j["base_url"] = cfg.backend.base_url;
    j["model"] = cfg.backend.model;
    j["backend_id"] = cfg.backend.backend_id;
    j["score_kind"] = to_string(cfg.backend.scores);
    j["requests_per_second"] = cfg.backend.requests_per_second;
    j["variant"] = prompt_variant::cqp_template_name(cfg.variant);
    j["self_consistency"] = cfg.variant.self_consistency_samples;
    j["temperatures"] = cfg.temperature_grid;
    j["samples"] = cfg.samples_per_temperature;
    j["ic_high"] = cfg.thresholds.ic_high;
    j["vc_high"] = cfg.thresholds.vc_high;
    j["cache"] = cfg.cache_path;
    j["cache_mode"] = cfg.mode == cache_mode::off ? "off" : (cfg.mode == cache_mode::record ? "record" : "replay");
    j["out"] = cfg.output_dir;
    j["concurrency"] = cfg.concurrency;
    j["seed"] = cfg.seed;
    j["templates"] = cfg.templates_dir;
    j["answer_temperature"] = cfg.answer_temperature;
    j["cqp_temperature"] = cfg.cqp_temperature;
    j["answer_max_tokens"] = cfg.answer_max_tokens;
    j["cqp_max_tokens"] = cfg.cqp_max_tokens;
    j["top_candidates"] = cfg.top_candidates;
    j["argmax_mode"] = cfg.argmax_mode;
    return j;
}

// --- manifest -------------------------------------------------------------------

struct run_manifest {
    json config;
    std::vector<dataset_manifest> datasets;
    std::string started_at, finished_at;
    std::size_t trials = 0;
    std::size_t cache_hits = 0;
    std::size_t parse_failures = 0;
    std::size_t error_trials = 0;
    std::size_t label_ambiguous = 0;
    double ambiguity_rate = 0.0;
    bool degraded = false;
    std::string version = k_version;
};

inline json manifest_to_json(const run_manifest& m) {
    json datasets = json::array();
    for (const auto& d : m.datasets) datasets.push_back(manifest_to_json(d));
    return json{{"toolkit_version", m.version},
                {"started_at", m.started_at},
                {"finished_at", m.finished_at},
                {"config", m.config},
                {"datasets", std::move(datasets)},
                {"counts",
                 json{{"trials", m.trials},
                      {"cache_hits", m.cache_hits},
                      {"parse_failures", m.parse_failures},
                      {"error_trials", m.error_trials},
                      {"label_ambiguous", m.label_ambiguous}}},
                {"ambiguity_rate", m.ambiguity_rate},
                {"degraded", m.degraded}};
}

// --- pipeline -------------------------------------------------------------------

namespace detail {

template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
    if (count == 0) return;
    int n = std::max(1, std::min<int>(workers, static_cast<int>(count)));
    if (n == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(n));
    for (int w = 0; w < n; ++w) {
        threads.emplace_back([&]() {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    next.store(count);
                    return;
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline int effective_top_candidates(const run_config& cfg, const question& q) {
    return std::max(cfg.top_candidates, static_cast<int>(q.options.size()));
}

}  // namespace detail

struct trial_context {
    backend* be = nullptr;
    const template_set* templates = nullptr;
    const run_config* cfg = nullptr;
};

// One question through the full pipeline: answer prompt -> completion ->
// label extraction -> adjusted confidence -> certainty prompt -> completion(s)
// -> certainty parse. Stage failures annotate the record; the run continues.
inline trial_record run_trial(const question& q, const trial_context& ctx) {
    const run_config& cfg = *ctx.cfg;
    trial_record rec;
    rec.question_id = q.id;
    rec.variant_id = cfg.variant.id();
    rec.temperature = cfg.cqp_temperature;

    std::string stage = "answer_prompt";
    try {
        std::string answer_prompt = build_answer_prompt(q, *ctx.templates);

        stage = "answer_completion";
        completion_request areq;
        areq.prompt = answer_prompt;
        areq.temperature = cfg.answer_temperature;
        areq.max_tokens = cfg.answer_max_tokens;
        areq.top_candidates = detail::effective_top_candidates(cfg, q);
        completion answer = ctx.be->complete(areq);
        rec.answer_text = detail::trim(answer.text);

        stage = "normalize_distribution";
        token_distribution dist = normalized(answer.answer_distribution);

        stage = "extract_answer";
        rec.chosen = extract_chosen_label(answer.text, q);
        if (q.gold) rec.correct = rec.chosen == *q.gold;

        stage = "internal_confidence";
        option_token_map map = build_option_token_map(q.labels());
        adjusted_confidence adj = adjusted_internal_confidence(dist, map, rec.chosen, cfg.argmax_mode);
        rec.internal_confidence = adj.internal_confidence;
        rec.label_ambiguity = adj.variant_ambiguity;

        stage = "certainty_prompt";
        std::string cqp = build_cqp(q, rec.answer_text, cfg.variant, *ctx.templates);

        stage = "certainty_completion";
        std::vector<certainty_outcome> outcomes;
        for (int s = 0; s < cfg.variant.self_consistency_samples; ++s) {
            completion_request creq;
            creq.prompt = cqp;
            creq.temperature = cfg.cqp_temperature;
            creq.max_tokens = cfg.cqp_max_tokens;
            creq.top_candidates = detail::effective_top_candidates(cfg, q);
            creq.sample_index = s;
            completion cert = ctx.be->complete(creq);
            std::vector<std::string> option_texts;
            for (const auto& o : q.options) option_texts.push_back(o.text);
            certainty_outcome outcome = cfg.variant.scale == certainty_scale_kind::numerical_1_100
                                            ? parse_numeric_certainty(cert.text)
                                            : parse_certainty(cert.text, scale_for(cfg.variant.scale), option_texts);
            if (s == 0) rec.certainty_text = cert.text;
            outcomes.push_back(std::move(outcome));
        }
        certainty_outcome final_outcome =
            outcomes.size() == 1 ? outcomes.front() : self_consistency_vote(outcomes);

        if (final_outcome.ok()) {
            rec.verbalized_score = final_outcome.score;
            rec.verbalized_category = final_outcome.category;
            rec.letter_conflict = final_outcome.letter_conflict;
        } else {
            rec.verbal_failure = final_outcome.failure;
        }
        if (rec.internal_confidence && rec.verbalized_score)
            rec.taxonomy = classify_alignment(*rec.internal_confidence, *rec.verbalized_score, cfg.thresholds);
    } catch (const std::exception& e) {
        rec.error = stage + ": " + e.what();
    }
    return rec;
}

struct run_result {
    std::vector<trial_record> records;
    run_manifest manifest;
    std::vector<stability_point> stability;  // sweeps only
};

namespace detail {

inline void sort_records(std::vector<trial_record>& records) {
    std::stable_sort(records.begin(), records.end(), [](const trial_record& a, const trial_record& b) {
        if (a.dataset != b.dataset) return a.dataset < b.dataset;
        if (a.question_id != b.question_id) return a.question_id < b.question_id;
        if (a.temperature != b.temperature) return a.temperature < b.temperature;
        return a.sample_index < b.sample_index;
    });
}

inline void finalize_manifest(run_manifest& m, const std::vector<trial_record>& records,
                              const cached_backend* cache) {
    m.trials = records.size();
    for (const auto& r : records) {
        if (r.verbal_failure) m.parse_failures += 1;
        if (r.error) m.error_trials += 1;
        if (r.label_ambiguity) m.label_ambiguous += 1;
    }
    if (!records.empty())
        m.ambiguity_rate = static_cast<double>(m.label_ambiguous) / static_cast<double>(records.size());
    if (cache) m.cache_hits = cache->hits();
    // a failure is a verbal parse failure or a pipeline error
    std::size_t failed = 0;
    for (const auto& r : records)
        if (r.error || r.verbal_failure) failed += 1;
    m.degraded = !records.empty() && failed * 2 > records.size();
    m.finished_at = completion_cache::now_iso8601();
}

}  // namespace detail

// Runs every question of every configured dataset under the concurrency limit.
// Records come back canonically ordered by (dataset, question id), so results
// are independent of worker count.
inline run_result run_evaluation(backend& be, const run_config& cfg, const template_set& templates,
                                 cached_backend* cache_view = nullptr) {
    cfg.validate();
    run_result result;
    result.manifest.started_at = completion_cache::now_iso8601();
    result.manifest.config = run_config_to_json(cfg);

    struct work_item {
        const question* q;
        std::string dataset;
    };
    std::vector<dataset> datasets;
    for (const auto& path : cfg.dataset_paths) datasets.push_back(load_dataset(path));
    std::vector<work_item> items;
    for (const auto& ds : datasets) {
        result.manifest.datasets.push_back(ds.manifest);
        for (const auto& q : ds.questions) items.push_back({&q, ds.name});
    }

    trial_context ctx{&be, &templates, &cfg};
    result.records.resize(items.size());
    detail::parallel_for(items.size(), cfg.concurrency, [&](std::size_t i) {
        trial_record rec = run_trial(*items[i].q, ctx);
        rec.dataset = items[i].dataset;
        result.records[i] = std::move(rec);
    });

    detail::sort_records(result.records);
    detail::finalize_manifest(result.manifest, result.records, cache_view);
    return result;
}

// One question's sweep: the answer is elicited once at the answer temperature,
// then certainty is sampled `samples` times per grid temperature.
inline std::vector<trial_record> run_sweep_question(const question& q, const trial_context& ctx) {
    const run_config& cfg = *ctx.cfg;

    trial_record base;
    base.question_id = q.id;
    base.variant_id = cfg.variant.id();

    std::string cqp;
    std::string stage = "answer_prompt";
    try {
        std::string answer_prompt = build_answer_prompt(q, *ctx.templates);

        stage = "answer_completion";
        completion_request areq;
        areq.prompt = answer_prompt;
        areq.temperature = cfg.answer_temperature;
        areq.max_tokens = cfg.answer_max_tokens;
        areq.top_candidates = detail::effective_top_candidates(cfg, q);
        completion answer = ctx.be->complete(areq);
        base.answer_text = detail::trim(answer.text);

        stage = "normalize_distribution";
        token_distribution dist = normalized(answer.answer_distribution);

        stage = "extract_answer";
        base.chosen = extract_chosen_label(answer.text, q);
        if (q.gold) base.correct = base.chosen == *q.gold;

        stage = "internal_confidence";
        option_token_map map = build_option_token_map(q.labels());
        adjusted_confidence adj = adjusted_internal_confidence(dist, map, base.chosen, cfg.argmax_mode);
        base.internal_confidence = adj.internal_confidence;
        base.label_ambiguity = adj.variant_ambiguity;

        stage = "certainty_prompt";
        cqp = build_cqp(q, base.answer_text, cfg.variant, *ctx.templates);
    } catch (const std::exception& e) {
        base.error = stage + ": " + e.what();
        return {base};
    }

    std::vector<std::string> option_texts;
    for (const auto& o : q.options) option_texts.push_back(o.text);

    std::vector<trial_record> out;
    for (double t : cfg.temperature_grid) {
        for (int s = 0; s < cfg.samples_per_temperature; ++s) {
            trial_record rec = base;
            rec.temperature = t;
            rec.sample_index = s;
            try {
                completion_request creq;
                creq.prompt = cqp;
                creq.temperature = t;
                creq.max_tokens = cfg.cqp_max_tokens;
                creq.top_candidates = detail::effective_top_candidates(cfg, q);
                creq.sample_index = s;
                completion cert = ctx.be->complete(creq);
                rec.certainty_text = cert.text;
                certainty_outcome outcome = cfg.variant.scale == certainty_scale_kind::numerical_1_100
                                                ? parse_numeric_certainty(cert.text)
                                                : parse_certainty(cert.text, scale_for(cfg.variant.scale),
                                                                  option_texts);
                if (outcome.ok()) {
                    rec.verbalized_score = outcome.score;
                    rec.verbalized_category = outcome.category;
                    rec.letter_conflict = outcome.letter_conflict;
                    rec.taxonomy = classify_alignment(*rec.internal_confidence, *rec.verbalized_score,
                                                      cfg.thresholds);
                } else {
                    rec.verbal_failure = outcome.failure;
                }
            } catch (const std::exception& e) {
                rec.error = std::string("certainty_completion: ") + e.what();
            }
            out.push_back(std::move(rec));
        }
    }
    return out;
}

// Emits one record per (question, temperature, sample) plus the per-temperature
// stability curve.
inline run_result run_temperature_sweep(backend& be, const run_config& cfg, const template_set& templates,
                                        cached_backend* cache_view = nullptr) {
    cfg.validate();
    if (cfg.samples_per_temperature < 2)
        throw config_error("temperature sweep needs samples >= 2 per (question, temperature)");

    run_result result;
    result.manifest.started_at = completion_cache::now_iso8601();
    result.manifest.config = run_config_to_json(cfg);

    struct work_item {
        const question* q;
        std::string dataset;
    };
    std::vector<dataset> datasets;
    for (const auto& path : cfg.dataset_paths) datasets.push_back(load_dataset(path));
    std::vector<work_item> items;
    for (const auto& ds : datasets) {
        result.manifest.datasets.push_back(ds.manifest);
        for (const auto& q : ds.questions) items.push_back({&q, ds.name});
    }

    trial_context ctx{&be, &templates, &cfg};
    std::vector<std::vector<trial_record>> per_question(items.size());
    detail::parallel_for(items.size(), cfg.concurrency, [&](std::size_t i) {
        std::vector<trial_record> recs = run_sweep_question(*items[i].q, ctx);
        for (auto& r : recs) r.dataset = items[i].dataset;
        per_question[i] = std::move(recs);
    });

    for (auto& recs : per_question)
        for (auto& r : recs) result.records.push_back(std::move(r));
    detail::sort_records(result.records);
    result.stability = temperature_stability(result.records, cfg.temperature_grid);
    detail::finalize_manifest(result.manifest, result.records, cache_view);
    return result;
}

// Executes the evaluation once per ablation variant, in table order. The
// answer stage is shared through the cache because its requests are identical
// across variants.
inline std::vector<std::pair<std::string, run_result>> run_ablation(backend& be, const run_config& cfg,
                                                                    const template_set& templates,
                                                                    cached_backend* cache_view = nullptr) {
    std::vector<std::pair<std::string, run_result>> out;
    for (const auto& variant : enumerate_ablation_variants()) {
        run_config vcfg = cfg;
        vcfg.variant = variant;
        out.emplace_back(variant.id(), run_evaluation(be, vcfg, templates, cache_view));
    }
    return out;
}

}  // namespace confalign
