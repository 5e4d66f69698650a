#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tabsearch/corpus.hpp"
#include "tabsearch/providers.hpp"
#include "tabsearch/vector_index.hpp"

namespace tabsearch::indexer {

struct BuildOptions {
    std::size_t pseudoqueries = 10;  // T
    index::Backend backend = index::Backend::hnsw;
    index::HnswParams hnsw;
    std::size_t concurrency = 8;
    bool allow_partial = false;
    int max_output_tokens = 2048;
    corpus::ParseOptions parse;
};

struct DatasetBuild {
    std::string dataset_id;
    std::size_t pseudoquery_count = 0;
    std::optional<std::string> failure;
};

struct BuildReport {
    std::vector<DatasetBuild> datasets;
    std::vector<corpus::Diagnostic> skipped_files;
    std::size_t record_count = 0;
    std::size_t failed = 0;

    nlohmann::json to_json() const;
};

struct BuildResult {
    index::VectorIndex index;
    BuildReport report;
};

/// Asks the generator for `count` pseudoqueries in one call and keeps at most
/// `count` distinct non-empty ones.
std::vector<std::string> generate_pseudoqueries(providers::TextGenerator& generator,
                                                const profiler::DatasetProfile& profile, std::size_t count,
                                                int max_output_tokens);

/// Offline phase: profile, generate, embed and insert every table. Datasets
/// are processed concurrently but inserted in collection order, so the index
/// is identical for identical inputs. Throws ProviderUnavailable when a
/// dataset fails and partial builds are not allowed.
BuildResult build_index(const corpus::Collection& collection, providers::TextGenerator& generator,
                        providers::TextEmbedder& embedder, const BuildOptions& options);

}  // namespace tabsearch::indexer
