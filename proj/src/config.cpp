#include "tabsearch/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tabsearch/corpus.hpp"
#include "tabsearch/error.hpp"

namespace tabsearch::config {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) throw ConfigError(fmt::format("'{}' must be an object", where));
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError(fmt::format("unknown configuration key '{}{}{}'", where, where.empty() ? "" : ".", key));
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& out, std::string_view where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("configuration key '{}.{}' has the wrong type: {}", where, key, e.what()));
    }
}

template <typename T>
void check_range(T value, T low, T high, std::string_view name) {
    if (value < low || value > high) {
        throw ConfigError(fmt::format("{} = {} is outside [{}, {}]", name, value, low, high));
    }
}

}  // namespace

PipelineConfig apply_json(PipelineConfig c, const json& j) {
    check_keys(j, "", {"corpus", "provider", "pseudoqueries_per_dataset", "embedding_dimension", "index", "query",
                       "seed"});
    if (j.contains("corpus")) {
        const auto& s = j["corpus"];
        check_keys(s, "corpus", {"path", "manifest", "missing_tokens"});
        read(s, "path", c.corpus_path, "corpus");
        read(s, "manifest", c.manifest_path, "corpus");
        read(s, "missing_tokens", c.missing_tokens, "corpus");
    }
    if (j.contains("provider")) {
        const auto& s = j["provider"];
        check_keys(s, "provider", {"mode", "generation_url", "embedding_url", "api_key", "generation_model",
                                   "embedding_model", "concurrency", "max_attempts", "initial_backoff_ms",
                                   "timeout_seconds"});
        auto& p = c.provider;
        read(s, "mode", p.mode, "provider");
        read(s, "generation_url", p.generation_url, "provider");
        read(s, "embedding_url", p.embedding_url, "provider");
        read(s, "api_key", p.api_key, "provider");
        read(s, "generation_model", p.generation_model, "provider");
        read(s, "embedding_model", p.embedding_model, "provider");
        read(s, "concurrency", p.concurrency, "provider");
        read(s, "max_attempts", p.max_attempts, "provider");
        read(s, "initial_backoff_ms", p.initial_backoff_ms, "provider");
        read(s, "timeout_seconds", p.timeout_seconds, "provider");
    }
    read(j, "pseudoqueries_per_dataset", c.pseudoqueries_per_dataset, "");
    read(j, "embedding_dimension", c.embedding_dimension, "");
    if (j.contains("index")) {
        const auto& s = j["index"];
        check_keys(s, "index", {"backend", "M", "ef_construction", "ef_search"});
        std::string backend(index::to_string(c.backend));
        read(s, "backend", backend, "index");
        auto parsed = index::backend_from_string(backend);
        if (!parsed) throw ConfigError("index.backend must be 'flat' or 'hnsw'");
        c.backend = *parsed;
        read(s, "M", c.hnsw.M, "index");
        read(s, "ef_construction", c.hnsw.ef_construction, "index");
        read(s, "ef_search", c.hnsw.ef_search, "index");
    }
    if (j.contains("query")) {
        const auto& s = j["query"];
        check_keys(s, "query", {"k", "pool", "max_subqueries", "optimize", "rerank", "background_words",
                                "rerank_profile_words", "max_output_tokens"});
        auto& q = c.query;
        read(s, "k", q.k, "query");
        read(s, "pool", q.pool_size, "query");
        read(s, "max_subqueries", q.max_subqueries, "query");
        read(s, "optimize", q.optimize, "query");
        read(s, "rerank", q.rerank, "query");
        read(s, "background_words", q.background_max_words, "query");
        read(s, "rerank_profile_words", q.rerank_profile_words, "query");
        read(s, "max_output_tokens", q.max_output_tokens, "query");
    }
    read(j, "seed", c.seed, "");
    c.hnsw.seed = c.seed;
    return c;
}

PipelineConfig apply_environment(PipelineConfig c) {
    if (const char* v = std::getenv(kEnvGenerationUrl)) c.provider.generation_url = v;
    if (const char* v = std::getenv(kEnvEmbeddingUrl)) c.provider.embedding_url = v;
    if (const char* v = std::getenv(kEnvApiKey)) c.provider.api_key = v;
    return c;
}

PipelineConfig load_config(const std::optional<std::filesystem::path>& path) {
    PipelineConfig c;
    c.missing_tokens = corpus::default_missing_tokens();
    c = apply_environment(std::move(c));
    if (path) {
        std::ifstream in(*path);
        if (!in) throw ConfigError("cannot open config file " + path->string());
        auto j = json::parse(in, nullptr, false, true);
        if (j.is_discarded()) throw ConfigError("config file " + path->string() + " is not valid JSON");
        c = apply_json(std::move(c), j);
    }
    validate(c);
    return c;
}

void validate(const PipelineConfig& c) {
    if (c.provider.mode != "offline" && c.provider.mode != "remote") {
        throw ConfigError("provider.mode must be 'offline' or 'remote'");
    }
    check_range<std::size_t>(c.provider.concurrency, 1, 256, "provider.concurrency");
    check_range(c.provider.max_attempts, 1, 10, "provider.max_attempts");
    check_range(c.provider.initial_backoff_ms, 0, 60000, "provider.initial_backoff_ms");
    check_range(c.provider.timeout_seconds, 1, 3600, "provider.timeout_seconds");
    check_range<std::size_t>(c.pseudoqueries_per_dataset, 1, 100, "pseudoqueries_per_dataset");
    check_range<std::size_t>(c.embedding_dimension, 8, 8192, "embedding_dimension");
    check_range<std::size_t>(c.hnsw.M, 2, 128, "index.M");
    check_range<std::size_t>(c.hnsw.ef_construction, 1, 4096, "index.ef_construction");
    check_range<std::size_t>(c.hnsw.ef_search, 1, 4096, "index.ef_search");
    check_range<std::size_t>(c.query.k, 1, 1000, "query.k");
    check_range<std::size_t>(c.query.pool_size, 1, 1000, "query.pool");
    check_range<std::size_t>(c.query.max_subqueries, 1, 20, "query.max_subqueries");
    check_range<std::size_t>(c.query.background_max_words, 1, 2000, "query.background_words");
    check_range<std::size_t>(c.query.rerank_profile_words, 10, 10000, "query.rerank_profile_words");
    check_range(c.query.max_output_tokens, 16, 32768, "query.max_output_tokens");
}

json to_json(const PipelineConfig& c) {
    return {
        {"corpus", {{"path", c.corpus_path}, {"manifest", c.manifest_path}, {"missing_tokens", c.missing_tokens}}},
        {"provider",
         {{"mode", c.provider.mode},
          {"generation_url", c.provider.generation_url},
          {"embedding_url", c.provider.embedding_url},
          {"generation_model", c.provider.generation_model},
          {"embedding_model", c.provider.embedding_model},
          {"concurrency", c.provider.concurrency},
          {"max_attempts", c.provider.max_attempts},
          {"initial_backoff_ms", c.provider.initial_backoff_ms},
          {"timeout_seconds", c.provider.timeout_seconds}}},
        {"pseudoqueries_per_dataset", c.pseudoqueries_per_dataset},
        {"embedding_dimension", c.embedding_dimension},
        {"index",
         {{"backend", std::string(index::to_string(c.backend))},
          {"M", c.hnsw.M},
          {"ef_construction", c.hnsw.ef_construction},
          {"ef_search", c.hnsw.ef_search}}},
        {"query",
         {{"k", c.query.k},
          {"pool", c.query.pool_size},
          {"max_subqueries", c.query.max_subqueries},
          {"optimize", c.query.optimize},
          {"rerank", c.query.rerank},
          {"background_words", c.query.background_max_words},
          {"rerank_profile_words", c.query.rerank_profile_words},
          {"max_output_tokens", c.query.max_output_tokens}}},
        {"seed", c.seed},
    };
}

}  // namespace tabsearch::config
