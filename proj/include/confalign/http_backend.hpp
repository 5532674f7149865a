#pragma once

#include <chrono>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "httplib.h"

#include "confalign/backends.hpp"
#include "confalign/common.hpp"

namespace confalign {

struct http_response {
    int status = 0;  // 0 = transport failure (no response)
    std::string body;
    std::map<std::string, std::string> headers;
};

// Transport seam: production code posts over HTTP, tests inject fakes and
// count calls.
class transport {
  public:
    virtual ~transport() = default;
    virtual http_response post(const std::string& path, const std::string& body) = 0;
};

class httplib_transport : public transport {
  public:
    httplib_transport(std::string base_url, std::string api_key, int timeout_seconds = 60)
        : base_url_(std::move(base_url)), api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds) {}

    http_response post(const std::string& path, const std::string& body) override {
        httplib::Client client(base_url_);
        client.set_connection_timeout(timeout_seconds_, 0);
        client.set_read_timeout(timeout_seconds_, 0);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        auto res = client.Post(path, headers, body, "application/json");
        http_response out;
        if (!res) return out;  // status 0 = connection-level failure
        out.status = res->status;
        out.body = res->body;
        for (const auto& [k, v] : res->headers) out.headers[k] = v;
        return out;
    }

  private:
    std::string base_url_;
    std::string api_key_;
    int timeout_seconds_;
};

// Serializes request starts so the backend never exceeds requests_per_second.
class rate_limiter {
  public:
    explicit rate_limiter(double requests_per_second = 0.0) {
        if (requests_per_second > 0.0)
            interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                std::chrono::duration<double>(1.0 / requests_per_second));
    }

    void acquire() {
        if (interval_.count() == 0) return;
        std::chrono::steady_clock::time_point target;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto now = std::chrono::steady_clock::now();
            target = last_ + interval_ > now ? last_ + interval_ : now;
            last_ = target;
        }
        std::this_thread::sleep_until(target);
    }

  private:
    std::chrono::steady_clock::duration interval_{0};
    std::mutex mutex_;
    std::chrono::steady_clock::time_point last_{};
};

struct http_backend_options {
    std::string completions_path = "/v1/completions";
    std::string backend_id = "http";          // cache-key identity
    score_kind scores = score_kind::logprob;  // logit for local servers returning raw logits
    int max_retries = 4;
    int backoff_base_ms = 250;
    int backoff_cap_ms = 4000;
    double requests_per_second = 0.0;
    bool sleep_on_retry = true;  // tests disable to keep the suite fast
};

// Generic completions-shaped HTTP backend: any provider that accepts
// {model, prompt, temperature, max_tokens, logprobs, echo} and returns
// per-token top-alternative scores works.
class http_backend : public backend {
  public:
    http_backend(transport& t, std::string model, http_backend_options options = {})
        : transport_(t), model_(std::move(model)), options_(options), limiter_(options.requests_per_second) {}

    completion complete(const completion_request& req) override {
        req.validate();
        json body{{"model", model_},
                  {"prompt", req.prompt},
                  {"temperature", req.temperature},
                  {"max_tokens", req.max_tokens},
                  {"logprobs", req.top_candidates},
                  {"echo", false}};
        const std::string payload = body.dump();

        int attempts = options_.max_retries + 1;
        for (int attempt = 0; attempt < attempts; ++attempt) {
            limiter_.acquire();
            http_response res = transport_.post(options_.completions_path, payload);
            if (res.status == 200) return parse_response(res.body);
            bool retryable = res.status == 0 || res.status == 408 || res.status == 429 || res.status >= 500;
            if (!retryable || attempt + 1 == attempts)
                throw backend_error("completion request failed with status " + std::to_string(res.status) +
                                        (res.body.empty() ? "" : ": " + res.body.substr(0, 200)),
                                    retryable, res.status);
            wait_before_retry(res, attempt);
        }
        throw backend_error("unreachable retry state");
    }

    std::string id() const override { return options_.backend_id; }
    std::string model() const override { return model_; }

  private:
    void wait_before_retry(const http_response& res, int attempt) {
        if (!options_.sleep_on_retry) return;
        long delay_ms = options_.backoff_base_ms * (1L << attempt);
        if (res.status == 429) {
            auto it = res.headers.find("Retry-After");
            if (it != res.headers.end()) {
                char* end = nullptr;
                double seconds = std::strtod(it->second.c_str(), &end);
                if (end != it->second.c_str() && seconds >= 0.0) delay_ms = static_cast<long>(seconds * 1000.0);
            }
        }
        delay_ms = std::min<long>(delay_ms, options_.backoff_cap_ms);
        std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
    }

    completion parse_response(const std::string& body) const {
        json j;
        try {
            j = json::parse(body);
        } catch (const std::exception& e) {
            throw backend_error(std::string("malformed completion response: ") + e.what());
        }
        if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
            throw backend_error("completion response has no choices");
        const json& choice = j["choices"][0];

        completion c;
        c.backend_id = id();
        c.text = choice.value("text", std::string());

        if (!choice.contains("logprobs") || choice["logprobs"].is_null())
            throw non_introspectable_backend("provider returned no token scores");
        const json& lp = choice["logprobs"];
        if (!lp.contains("top_logprobs") || !lp["top_logprobs"].is_array() || lp["top_logprobs"].empty())
            throw non_introspectable_backend("provider returned no per-token top alternatives");

        // first generated position follows the prompt directly (echo=false)
        const json& top = lp["top_logprobs"][0];
        c.answer_distribution.position = 0;
        c.answer_distribution.kind = options_.scores;
        for (auto it = top.begin(); it != top.end(); ++it)
            c.answer_distribution.entries.push_back({it.key(), it.value().get<double>()});
        if (c.answer_distribution.entries.empty())
            throw non_introspectable_backend("empty top-alternatives map at answer position");
        return c;
    }

    transport& transport_;
    std::string model_;
    http_backend_options options_;
    rate_limiter limiter_;
};

inline std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

}  // namespace confalign
