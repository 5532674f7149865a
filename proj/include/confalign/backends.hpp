#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "confalign/common.hpp"

namespace confalign {

struct backend_error : error {
    backend_error(const std::string& msg, bool retryable_ = false, int status_ = 0)
        : error(msg), retryable(retryable_), status(status_) {}
    bool retryable = false;
    int status = 0;
};
struct non_introspectable_backend : backend_error {
    explicit non_introspectable_backend(const std::string& msg) : backend_error(msg) {}
};
struct cache_miss : error {
    using error::error;
};

enum class score_kind { logprob, logit, prob };

inline const char* to_string(score_kind k) {
    switch (k) {
        case score_kind::logprob: return "logprob";
        case score_kind::logit: return "logit";
        case score_kind::prob: return "prob";
    }
    return "?";
}
inline score_kind score_kind_from_string(const std::string& s) {
    if (s == "logprob") return score_kind::logprob;
    if (s == "logit") return score_kind::logit;
    if (s == "prob") return score_kind::prob;
    throw validation_error("unknown score kind: " + s);
}

struct token_entry {
    std::string token;
    double score = 0.0;
};

// Candidate tokens with scores at one generation position.
struct token_distribution {
    int position = 0;
    score_kind kind = score_kind::prob;
    std::vector<token_entry> entries;
};

struct completion_request {
    std::string prompt;
    double temperature = 0.0;
    int max_tokens = 16;
    int top_candidates = 20;
    int sample_index = 0;

    void validate() const {
        if (!(temperature >= 0.0 && temperature <= 2.0)) throw validation_error("temperature must be in [0, 2]");
        if (max_tokens < 1) throw validation_error("max_tokens must be >= 1");
        if (top_candidates < 1) throw validation_error("top_candidates must be >= 1");
        if (sample_index < 0) throw validation_error("sample_index must be >= 0");
    }
};

struct completion {
    std::string text;
    token_distribution answer_distribution;  // first generated position after the prompt
    std::string backend_id;
    bool cached = false;
};

// P(T) = exp(log P(T)); order-preserving, requires log-probabilities <= 0.
inline token_distribution exp_logprobs(const token_distribution& dist) {
    if (dist.kind != score_kind::logprob) throw validation_error("exp_logprobs expects logprob scores");
    token_distribution out;
    out.position = dist.position;
    out.kind = score_kind::prob;
    out.entries.reserve(dist.entries.size());
    for (const auto& e : dist.entries) {
        if (!(e.score <= 0.0)) throw validation_error("positive log-probability for token '" + e.token + "'");
        out.entries.push_back({e.token, std::exp(e.score)});
    }
    return out;
}

// Softmax over the returned logits only; downstream option normalization
// cancels the truncated tail mass.
inline token_distribution softmax_logits(const token_distribution& dist) {
    if (dist.kind != score_kind::logit) throw validation_error("softmax_logits expects logit scores");
    if (dist.entries.empty()) throw validation_error("softmax over empty distribution");
    double max_logit = dist.entries.front().score;
    for (const auto& e : dist.entries) {
        if (!std::isfinite(e.score)) throw validation_error("non-finite logit for token '" + e.token + "'");
        max_logit = std::max(max_logit, e.score);
    }
    double denom = 0.0;
    for (const auto& e : dist.entries) denom += std::exp(e.score - max_logit);
    token_distribution out;
    out.position = dist.position;
    out.kind = score_kind::prob;
    out.entries.reserve(dist.entries.size());
    for (const auto& e : dist.entries) out.entries.push_back({e.token, std::exp(e.score - max_logit) / denom});
    return out;
}

inline token_distribution normalized(const token_distribution& dist) {
    switch (dist.kind) {
        case score_kind::prob:
            for (const auto& e : dist.entries)
                if (!(e.score >= 0.0 && e.score <= 1.0 + 1e-12))
                    throw validation_error("probability out of [0,1] for token '" + e.token + "'");
            return dist;
        case score_kind::logprob: return exp_logprobs(dist);
        case score_kind::logit: return softmax_logits(dist);
    }
    throw validation_error("unknown score kind");
}

class backend {
  public:
    virtual ~backend() = default;
    virtual completion complete(const completion_request& req) = 0;
    virtual std::string id() const = 0;
    virtual std::string model() const = 0;
};

// --- serialization -----------------------------------------------------------

inline json distribution_to_json(const token_distribution& d) {
    json entries = json::array();
    for (const auto& e : d.entries) entries.push_back(json::array({e.token, e.score}));
    return json{{"position", d.position}, {"kind", to_string(d.kind)}, {"entries", std::move(entries)}};
}

inline token_distribution distribution_from_json(const json& j) {
    token_distribution d;
    d.position = j.at("position").get<int>();
    d.kind = score_kind_from_string(j.at("kind").get<std::string>());
    for (const auto& e : j.at("entries")) d.entries.push_back({e.at(0).get<std::string>(), e.at(1).get<double>()});
    return d;
}

inline json completion_to_json(const completion& c) {
    return json{{"text", c.text},
                {"distribution", distribution_to_json(c.answer_distribution)},
                {"backend_id", c.backend_id},
                {"cached", c.cached}};
}

inline completion completion_from_json(const json& j) {
    completion c;
    c.text = j.at("text").get<std::string>();
    c.answer_distribution = distribution_from_json(j.at("distribution"));
    c.backend_id = j.at("backend_id").get<std::string>();
    c.cached = j.at("cached").get<bool>();
    return c;
}

inline json request_to_json(const completion_request& r) {
    return json{{"prompt", r.prompt},
                {"temperature", r.temperature},
                {"max_tokens", r.max_tokens},
                {"top_candidates", r.top_candidates},
                {"sample_index", r.sample_index}};
}

// --- cache -------------------------------------------------------------------

inline std::string cache_key(const std::string& backend_id, const std::string& model,
                             const completion_request& req) {
    char num[64];
    std::string canon = "v1|" + backend_id + "|" + model + "|";
    std::snprintf(num, sizeof(num), "%zu:", req.prompt.size());
    canon += num;
    canon += req.prompt;
    std::snprintf(num, sizeof(num), "|%.17g|%d|%d|%d", req.temperature, req.max_tokens, req.top_candidates,
                  req.sample_index);
    canon += num;
    return detail::to_hex64(detail::fnv1a64(canon));
}

// Append-only line-delimited JSON log of completed requests, indexed in memory.
// Corrupt lines are skipped with a warning and treated as misses.
class completion_cache {
  public:
    completion_cache() = default;

    // Loads an existing cache file; an absent file is an empty cache that the
    // first store creates.
    explicit completion_cache(const std::string& path) : path_(path) {
        auto parent = std::filesystem::path(path).parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
        std::ifstream in(path, std::ios::binary);
        if (!in) return;
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (detail::trim(line).empty()) continue;
            try {
                json j = json::parse(line);
                index_.emplace(j.at("key").get<std::string>(), completion_from_json(j.at("completion")));
            } catch (const std::exception& e) {
                std::fprintf(stderr, "confalign: skipping corrupt cache record %s:%zu (%s)\n", path.c_str(),
                             line_no, e.what());
            }
        }
    }

    std::optional<completion> lookup(const std::string& key) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = index_.find(key);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    void store(const std::string& key, const completion_request& req, const completion& c) {
        std::lock_guard<std::mutex> lock(mutex_);
        index_.emplace(key, c);
        if (path_.empty()) return;
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        if (!out) throw io_error("cannot append to cache: " + path_);
        json rec{{"key", key},
                 {"request", request_to_json(req)},
                 {"completion", completion_to_json(c)},
                 {"timestamp", now_iso8601()}};
        out << rec.dump() << '\n';
    }

    size_t size() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return index_.size();
    }

    static std::string now_iso8601() {
        std::time_t t = std::time(nullptr);
        char buf[32];
        std::tm tm{};
        gmtime_r(&t, &tm);
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

  private:
    std::string path_;
    mutable std::mutex mutex_;
    std::multimap<std::string, completion> index_;
};

enum class cache_mode { off, record, replay };

inline cache_mode cache_mode_from_string(const std::string& s) {
    if (s == "off") return cache_mode::off;
    if (s == "record") return cache_mode::record;
    if (s == "replay") return cache_mode::replay;
    throw config_error("unknown cache mode: " + s);
}

// Wraps another backend with record/replay semantics. In replay mode the inner
// backend is never consulted; a miss is an error.
class cached_backend : public backend {
  public:
    cached_backend(backend& inner, completion_cache& cache, cache_mode mode)
        : inner_(inner), cache_(cache), mode_(mode) {}

    completion complete(const completion_request& req) override {
        req.validate();
        if (mode_ == cache_mode::off) {
            misses_.fetch_add(1);
            return inner_.complete(req);
        }
        std::string key = cache_key(inner_.id(), inner_.model(), req);
        if (auto hit = cache_.lookup(key)) {
            hits_.fetch_add(1);
            hit->cached = true;
            return *hit;
        }
        if (mode_ == cache_mode::replay)
            throw cache_miss("replay cache miss for key " + key + " (prompt " +
                             std::to_string(req.prompt.size()) + " bytes)");
        misses_.fetch_add(1);
        completion c = inner_.complete(req);
        c.cached = false;
        cache_.store(key, req, c);
        return c;
    }

    std::string id() const override { return inner_.id(); }
    std::string model() const override { return inner_.model(); }

    size_t hits() const { return hits_.load(); }
    size_t misses() const { return misses_.load(); }

  private:
    backend& inner_;
    completion_cache& cache_;
    cache_mode mode_;
    std::atomic<size_t> hits_{0};
    std::atomic<size_t> misses_{0};
};

// Replay-only view over a cache file; no inner backend exists, so no network
// operation is possible by construction.
class replay_backend : public backend {
  public:
    replay_backend(completion_cache& cache, std::string backend_id, std::string model)
        : cache_(cache), id_(std::move(backend_id)), model_(std::move(model)) {}

    completion complete(const completion_request& req) override {
        req.validate();
        std::string key = cache_key(id_, model_, req);
        if (auto hit = cache_.lookup(key)) {
            hits_.fetch_add(1);
            hit->cached = true;
            return *hit;
        }
        throw cache_miss("replay cache miss for key " + key);
    }

    std::string id() const override { return id_; }
    std::string model() const override { return model_; }
    size_t hits() const { return hits_.load(); }

  private:
    completion_cache& cache_;
    std::string id_, model_;
    std::atomic<size_t> hits_{0};
};

// --- mocks -------------------------------------------------------------------

// Deterministic backend driven by scripted (prompt, sample_index) -> completion
// entries plus an optional fallback handler.
class scripted_backend : public backend {
  public:
    explicit scripted_backend(std::string id = "mock-scripted", std::string model = "scripted")
        : id_(std::move(id)), model_(std::move(model)) {}

    void script(const std::string& prompt, completion c) { any_sample_[prompt] = std::move(c); }
    void script(const std::string& prompt, int sample_index, completion c) {
        per_sample_[{prompt, sample_index}] = std::move(c);
    }
    void set_fallback(std::function<completion(const completion_request&)> fn) { fallback_ = std::move(fn); }

    completion complete(const completion_request& req) override {
        req.validate();
        {
            std::lock_guard<std::mutex> lock(mutex_);
            calls_[req.prompt] += 1;
        }
        if (auto it = per_sample_.find({req.prompt, req.sample_index}); it != per_sample_.end())
            return stamp(it->second);
        if (auto it = any_sample_.find(req.prompt); it != any_sample_.end()) return stamp(it->second);
        if (fallback_) return stamp(fallback_(req));
        throw backend_error("scripted backend has no entry for prompt (" +
                            std::to_string(req.prompt.size()) + " bytes)");
    }

    std::string id() const override { return id_; }
    std::string model() const override { return model_; }

    int calls(const std::string& prompt) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = calls_.find(prompt);
        return it == calls_.end() ? 0 : it->second;
    }
    int total_calls() const {
        std::lock_guard<std::mutex> lock(mutex_);
        int n = 0;
        for (const auto& [_, c] : calls_) n += c;
        return n;
    }

  private:
    completion stamp(completion c) const {
        c.backend_id = id_;
        c.cached = false;
        return c;
    }

    std::string id_, model_;
    std::map<std::string, completion> any_sample_;
    std::map<std::pair<std::string, int>, completion> per_sample_;
    std::function<completion(const completion_request&)> fallback_;
    mutable std::mutex mutex_;
    std::map<std::string, int> calls_;
};

namespace detail {

// Option labels present in a rendered answer or certainty prompt, detected from
// "L. text" lines.
inline std::vector<char> labels_in_prompt(const std::string& prompt) {
    std::vector<char> labels;
    for (const auto& line : split_lines(prompt)) {
        if (line.size() >= 3 && line[0] >= 'A' && line[0] <= 'H' && line[1] == '.' && line[2] == ' ')
            if (labels.empty() || labels.back() != line[0]) labels.push_back(line[0]);
    }
    return labels;
}

inline std::string first_option_line(const std::string& prompt, char label) {
    for (const auto& line : split_lines(prompt))
        if (line.size() >= 3 && line[0] == label && line[1] == '.' && line[2] == ' ') return line;
    return std::string(1, label) + ".";
}

}  // namespace detail

// Stochastic mock whose verbalized-certainty noise amplitude grows linearly
// with temperature: numeric replies 50 +/- round(20*t), sign drawn from a
// seeded hash of (prompt, temperature, sample_index). Answer requests are
// served deterministically with all mass on option A.
class noise_backend : public backend {
  public:
    explicit noise_backend(std::uint64_t seed, std::string id = "mock-noise", std::string model = "noise")
        : seed_(seed), id_(std::move(id)), model_(std::move(model)) {}

    static long amplitude(double temperature) { return std::lround(20.0 * temperature); }

    completion complete(const completion_request& req) override {
        req.validate();
        completion c;
        c.backend_id = id_;
        if (req.prompt.size() >= 8 && req.prompt.rfind("Answer: ") == req.prompt.size() - 8) {
            auto labels = detail::labels_in_prompt(req.prompt);
            if (labels.empty()) throw backend_error("noise backend: no option labels in prompt");
            c.text = detail::first_option_line(req.prompt, labels.front());
            double rest = labels.size() > 1 ? 0.5 / static_cast<double>(labels.size() - 1) : 0.0;
            for (char l : labels)
                c.answer_distribution.entries.push_back({std::string(1, l), l == labels.front() ? 0.5 : rest});
            c.answer_distribution.kind = score_kind::prob;
            return c;
        }
        // certainty request: numeric scale reply
        std::uint64_t h = detail::fnv1a64(req.prompt, seed_ ^ 0x9e3779b97f4a7c15ull);
        h = detail::splitmix64(h ^ static_cast<std::uint64_t>(req.sample_index) ^
                               (static_cast<std::uint64_t>(std::llround(req.temperature * 1000.0)) << 20));
        long sign = (h & 1) ? 1 : -1;
        long value = 50 + amplitude(req.temperature) * sign;
        c.text = std::to_string(value);
        c.answer_distribution.kind = score_kind::prob;
        c.answer_distribution.entries.push_back({c.text.substr(0, 1), 1.0});
        return c;
    }

    std::string id() const override { return id_; }
    std::string model() const override { return model_; }

  private:
    std::uint64_t seed_;
    std::string id_, model_;
};

// Offline demo backend: answers and certainty levels derive from seeded hashes
// so that internal confidence and verbalized certainty correlate positively.
class demo_backend : public backend {
  public:
    explicit demo_backend(std::uint64_t seed, std::string id = "mock-demo", std::string model = "demo")
        : seed_(seed), id_(std::move(id)), model_(std::move(model)) {}

    completion complete(const completion_request& req) override {
        req.validate();
        completion c;
        c.backend_id = id_;
        if (req.prompt.size() >= 8 && req.prompt.rfind("Answer: ") == req.prompt.size() - 8) {
            auto labels = detail::labels_in_prompt(req.prompt);
            if (labels.empty()) throw backend_error("demo backend: no option labels in prompt");
            std::uint64_t h = detail::splitmix64(detail::fnv1a64(req.prompt, seed_));
            char chosen = labels[h % labels.size()];
            c.text = detail::first_option_line(req.prompt, chosen);
            double conf = confidence_for(c.text);
            double rest = labels.size() > 1 ? (1.0 - conf) / static_cast<double>(labels.size() - 1) : 0.0;
            for (char l : labels) c.answer_distribution.entries.push_back({std::string(1, l), l == chosen ? conf : rest});
            c.answer_distribution.kind = score_kind::prob;
            return c;
        }
        std::string answer = answer_line_in_cqp(req.prompt);
        double conf = confidence_for(answer);
        std::uint64_t h = detail::splitmix64(detail::fnv1a64(answer, seed_ ^ 0x5851f42d4c957f2dull));
        int jitter = static_cast<int>(h % 4);  // 0,1 -> 0; 2 -> -1; 3 -> +1
        int offset = jitter == 2 ? -1 : (jitter == 3 ? 1 : 0);
        if (req.prompt.find("scale of 1 to 100") != std::string::npos) {
            long v = std::lround(conf * 100.0) + 10 * offset;
            v = std::min(100l, std::max(1l, v));
            c.text = "I would rate my certainty at " + std::to_string(v) + " out of 100.";
        } else {
            // walk the likert6 ladder: index 0 = very certain
            int idx = static_cast<int>(std::lround((1.0 - conf) * 5.0)) + offset;
            idx = std::min(5, std::max(0, idx));
            static const char* lines[6] = {"a. very certain",     "b. fairly certain", "c. moderately certain",
                                           "d. somewhat certain", "e. not certain",    "f. very uncertain"};
            c.text = std::string(lines[idx]) + ". That option fits the question best.";
        }
        c.answer_distribution.kind = score_kind::prob;
        c.answer_distribution.entries.push_back({c.text.substr(0, 1), 1.0});
        return c;
    }

    std::string id() const override { return id_; }
    std::string model() const override { return model_; }

  private:
    double confidence_for(const std::string& answer_text) const {
        std::uint64_t h = detail::splitmix64(detail::fnv1a64(answer_text, seed_ ^ 0xda942042e4dd58b5ull));
        return 0.35 + 0.65 * (static_cast<double>(h >> 11) / 9007199254740992.0);
    }
    static std::string answer_line_in_cqp(const std::string& prompt) {
        for (const char* marker : {"answer was: ", "The model's answer was: "}) {
            size_t pos = prompt.find(marker);
            if (pos != std::string::npos) {
                size_t start = pos + std::string(marker).size();
                size_t end = prompt.find('\n', start);
                std::string line = prompt.substr(start, end == std::string::npos ? std::string::npos : end - start);
                if (!line.empty() && line.back() == '.') line.pop_back();
                return line;
            }
        }
        return prompt;
    }

    std::uint64_t seed_;
    std::string id_, model_;
};

}  // namespace confalign
