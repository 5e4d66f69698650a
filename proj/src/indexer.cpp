#include "tabsearch/indexer.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "tabsearch/error.hpp"
#include "tabsearch/prompts.hpp"
#include "tabsearch/text_util.hpp"

namespace tabsearch::indexer {

nlohmann::json BuildReport::to_json() const {
    nlohmann::json datasets_json = nlohmann::json::array();
    for (const auto& d : datasets) {
        datasets_json.push_back({{"dataset_id", d.dataset_id},
                                 {"pseudoqueries", d.pseudoquery_count},
                                 {"failure", d.failure ? nlohmann::json(*d.failure) : nlohmann::json(nullptr)}});
    }
    nlohmann::json skipped = nlohmann::json::array();
    for (const auto& s : skipped_files) skipped.push_back({{"path", s.path}, {"message", s.message}});
    return {{"datasets", datasets_json}, {"skipped_files", skipped}, {"record_count", record_count}, {"failed", failed}};
}

std::vector<std::string> generate_pseudoqueries(providers::TextGenerator& generator,
                                                const profiler::DatasetProfile& profile, std::size_t count,
                                                int max_output_tokens) {
    providers::GenerationRequest request;
    request.role = providers::GenerationRole::pseudoquery_gen;
    request.prompt = prompts::pseudoquery_prompt(profile.rendered_text, count);
    request.max_output_tokens = max_output_tokens;
    auto result = generator.generate(request);
    auto items = prompts::parse_string_list(result.text);
    if (!items) return {};

    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto& item : *items) {
        auto text = text::normalize_whitespace(item);
        if (text.empty() || !seen.insert(text).second) continue;
        out.push_back(std::move(text));
        if (out.size() == count) break;
    }
    return out;
}

namespace {

struct Prepared {
    profiler::DatasetProfile profile;
    std::vector<std::string> texts;
    std::vector<providers::EmbeddingVector> vectors;
    std::optional<std::string> failure;
};

Prepared prepare(const corpus::DatasetTable& table, providers::TextGenerator& generator,
                 providers::TextEmbedder& embedder, const BuildOptions& options) {
    Prepared p;
    try {
        p.profile = profiler::profile_dataset(table, options.parse);
    } catch (const Error& e) {
        p.failure = std::string("profiling failed: ") + e.what();
        return p;
    }
    try {
        p.texts = generate_pseudoqueries(generator, p.profile, options.pseudoqueries, options.max_output_tokens);
        if (p.texts.empty()) {
            p.failure = "generator returned no usable pseudoqueries";
            return p;
        }
        p.vectors = embedder.embed(p.texts);
    } catch (const ProviderUnavailable& e) {
        p.failure = std::string("provider failure: ") + e.what();
        p.texts.clear();
        p.vectors.clear();
    }
    return p;
}

}  // namespace

BuildResult build_index(const corpus::Collection& collection, providers::TextGenerator& generator,
                        providers::TextEmbedder& embedder, const BuildOptions& options) {
    if (options.pseudoqueries == 0) throw InvalidInput("pseudoqueries per dataset must be at least 1");
    if (collection.tables.empty()) throw EmptyCollection("no datasets to index");

    const auto n = collection.tables.size();
    std::vector<Prepared> prepared(n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const auto workers = std::max<std::size_t>(1, std::min(options.concurrency, n));
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                try {
                    for (auto i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                        prepared[i] = prepare(collection.tables[i], generator, embedder, options);
                    }
                } catch (...) {
                    next = n;
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            });
        }
    }
    if (first_error) std::rethrow_exception(first_error);

    BuildReport report;
    report.skipped_files = collection.diagnostics;
    index::VectorIndex index(embedder.dimension(), options.backend, options.hnsw, embedder.id());
    for (std::size_t i = 0; i < n; ++i) {
        auto& p = prepared[i];
        const auto& id = collection.tables[i].id;
        report.datasets.push_back({id, p.texts.size(), p.failure});
        if (p.failure) {
            ++report.failed;
            spdlog::warn("dataset {} not indexed: {}", id, *p.failure);
            continue;
        }
        p.profile.dataset_id = id;
        index.add_profile(p.profile);
        for (std::size_t t = 0; t < p.texts.size(); ++t) {
            index.insert(p.texts[t], id, p.vectors[t].values);
        }
    }
    if (report.failed > 0 && !options.allow_partial) {
        throw ProviderUnavailable(fmt::format("{} of {} datasets failed; refusing to write a partial index",
                                              report.failed, n));
    }
    if (index.size() == 0) throw EmptyIndex("no pseudoqueries were indexed");
    index.seal();
    report.record_count = index.size();
    return {std::move(index), std::move(report)};
}

}  // namespace tabsearch::indexer
