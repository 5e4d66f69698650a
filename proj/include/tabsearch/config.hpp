#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tabsearch/query_pipeline.hpp"
#include "tabsearch/vector_index.hpp"

namespace tabsearch::config {

struct ProviderConfig {
    std::string mode = "offline";  // offline | remote
    std::string generation_url;
    std::string embedding_url;
    std::string api_key;
    std::string generation_model = "gpt-5-mini";
    std::string embedding_model = "text-embedding-3-small";
    std::size_t concurrency = 8;
    int max_attempts = 3;
    int initial_backoff_ms = 500;
    int timeout_seconds = 120;
};

struct PipelineConfig {
    std::string corpus_path;
    std::string manifest_path;  // empty = derive ids from relative paths
    std::vector<std::string> missing_tokens;
    ProviderConfig provider;
    std::size_t pseudoqueries_per_dataset = 10;
    std::size_t embedding_dimension = 256;
    index::Backend backend = index::Backend::hnsw;
    index::HnswParams hnsw;
    pipeline::QueryOptions query;
    std::uint64_t seed = 42;
};

inline constexpr const char* kEnvGenerationUrl = "TABSEARCH_GENERATION_URL";
inline constexpr const char* kEnvEmbeddingUrl = "TABSEARCH_EMBEDDING_URL";
inline constexpr const char* kEnvApiKey = "TABSEARCH_API_KEY";

/// Defaults, then environment variables, then the file (if any).
PipelineConfig load_config(const std::optional<std::filesystem::path>& path);

/// Overlays json onto base. Unknown keys and wrong types throw ConfigError.
PipelineConfig apply_json(PipelineConfig base, const nlohmann::json& j);
PipelineConfig apply_environment(PipelineConfig base);

/// Throws ConfigError when a knob leaves its documented range.
void validate(const PipelineConfig& config);

/// Full key set with current values; the api key is never written out.
nlohmann::json to_json(const PipelineConfig& config);

}  // namespace tabsearch::config
