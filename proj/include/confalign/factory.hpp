#pragma once

#include <memory>

#include "confalign/backends.hpp"
#include "confalign/http_backend.hpp"
#include "confalign/runner.hpp"

namespace confalign {

// Owns a configured backend chain (transport, inner backend, cache wrapper).
struct backend_bundle {
    std::unique_ptr<transport> http;
    std::unique_ptr<backend> inner;
    std::unique_ptr<completion_cache> cache;
    std::unique_ptr<backend> wrapped;
    backend* active = nullptr;
    cached_backend* cache_view = nullptr;  // null when no read-write cache wraps the chain
};

inline std::string default_backend_id(const std::string& kind) {
    if (kind == "http" || kind == "replay") return "http";
    if (kind == "mock") return "mock-demo";
    if (kind == "mock-noise") return "mock-noise";
    return kind;
}

inline backend_bundle make_backend(const run_config& cfg) {
    backend_bundle b;
    const auto& spec = cfg.backend;
    std::string backend_id = spec.backend_id.empty() ? default_backend_id(spec.kind) : spec.backend_id;

    if (!cfg.cache_path.empty())
        b.cache = std::make_unique<completion_cache>(cfg.cache_path);

    if (spec.kind == "replay") {
        if (!b.cache) throw config_error("replay backend requires a cache path");
        b.inner = std::make_unique<replay_backend>(*b.cache, backend_id, spec.model);
        b.active = b.inner.get();
        return b;
    }

    if (spec.kind == "mock") {
        b.inner = std::make_unique<demo_backend>(cfg.seed, backend_id, spec.model);
    } else if (spec.kind == "mock-noise") {
        b.inner = std::make_unique<noise_backend>(cfg.seed, backend_id, spec.model);
    } else if (spec.kind == "http") {
        std::string base_url = env_or("CONFALIGN_BASE_URL", spec.base_url);
        if (base_url.empty()) throw config_error("http backend requires base_url or CONFALIGN_BASE_URL");
        std::string api_key = env_or("CONFALIGN_API_KEY", "");
        b.http = std::make_unique<httplib_transport>(base_url, api_key);
        http_backend_options options;
        options.backend_id = backend_id;
        options.scores = spec.scores;
        options.requests_per_second = spec.requests_per_second;
        b.inner = std::make_unique<http_backend>(*b.http, spec.model, options);
    } else {
        throw config_error("unknown backend kind: " + spec.kind);
    }

    if (cfg.mode != cache_mode::off) {
        if (!b.cache) throw config_error("cache mode '" + std::string(cfg.mode == cache_mode::record ? "record" : "replay") +
                                         "' requires a cache path");
        auto wrapped = std::make_unique<cached_backend>(*b.inner, *b.cache, cfg.mode);
        b.cache_view = wrapped.get();
        b.wrapped = std::move(wrapped);
        b.active = b.wrapped.get();
    } else {
        b.active = b.inner.get();
    }
    return b;
}

}  // namespace confalign
