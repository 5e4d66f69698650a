#include "tabsearch/query_pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "tabsearch/error.hpp"
#include "tabsearch/prompts.hpp"
#include "tabsearch/text_util.hpp"

namespace tabsearch::pipeline {

namespace {

void warn(std::vector<std::string>* warnings, std::string message) {
    spdlog::warn("{}", message);
    if (warnings) warnings->push_back(std::move(message));
}

void require_query(std::string_view query) {
    if (text::trim(query).empty()) throw InvalidInput("query must not be empty");
}

}  // namespace

std::vector<std::string> RankedResult::dataset_ids() const {
    std::vector<std::string> ids;
    ids.reserve(entries.size());
    for (const auto& e : entries) ids.push_back(e.dataset_id);
    return ids;
}

std::string expand_query(providers::TextGenerator& generator, std::string_view query, const QueryOptions& options,
                         std::vector<std::string>* warnings) {
    require_query(query);
    providers::GenerationRequest request{providers::GenerationRole::query_expand,
                                         prompts::expansion_prompt(query, options.background_max_words),
                                         options.max_output_tokens, 0.0};
    try {
        auto result = generator.generate(request);
        return text::truncate_words(result.text, options.background_max_words);
    } catch (const std::exception& e) {
        warn(warnings, std::string("query expansion failed, continuing without background: ") + e.what());
        return {};
    }
}

SubquerySet identity_subqueries(std::string_view query) {
    require_query(query);
    return {std::string(query), {}, {text::normalize_whitespace(query)}};
}

SubquerySet decompose_query(providers::TextGenerator& generator, std::string_view query, std::string_view background,
                            const QueryOptions& options, std::vector<std::string>* warnings) {
    require_query(query);
    const auto limit = std::max<std::size_t>(1, options.max_subqueries);
    auto fallback = [&](std::string why) {
        warn(warnings, "query decomposition " + why + "; using the original query");
        auto set = identity_subqueries(query);
        set.background = std::string(background);
        return set;
    };

    providers::GenerationRequest request{providers::GenerationRole::query_decompose,
                                         prompts::decomposition_prompt(query, background, limit),
                                         options.max_output_tokens, 0.0};
    std::string output;
    try {
        output = generator.generate(request).text;
    } catch (const std::exception& e) {
        return fallback(std::string("failed (") + e.what() + ")");
    }
    auto items = prompts::parse_string_list(output);
    if (!items) return fallback("returned no usable subqueries");

    SubquerySet set{std::string(query), std::string(background), {}};
    std::set<std::string> seen;
    for (const auto& item : *items) {
        auto normalized = text::normalize_whitespace(item);
        if (normalized.empty() || !seen.insert(normalized).second) continue;
        set.subqueries.push_back(std::move(normalized));
    }
    if (set.subqueries.empty()) return fallback("returned no usable subqueries");
    if (set.subqueries.size() > limit) set.subqueries.resize(limit);
    return set;
}

std::vector<Candidate> aggregate_candidates(std::span<const std::vector<RetrievedHit>> retrieved,
                                            std::size_t pool_size) {
    std::map<std::string, Candidate, std::less<>> by_dataset;
    for (std::size_t n = 0; n < retrieved.size(); ++n) {
        for (const auto& hit : retrieved[n]) {
            auto [it, inserted] = by_dataset.try_emplace(hit.dataset_id);
            auto& c = it->second;
            if (inserted) {
                c.dataset_id = hit.dataset_id;
                c.best_distance = hit.distance;
            }
            c.matches.push_back({n, hit.pseudoquery_id, hit.distance});
            c.retrieval_score = c.matches.size();
            c.best_distance = std::min(c.best_distance, hit.distance);
        }
    }
    std::vector<Candidate> pool;
    pool.reserve(by_dataset.size());
    for (auto& [id, c] : by_dataset) pool.push_back(std::move(c));
    std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
        if (a.retrieval_score != b.retrieval_score) return a.retrieval_score > b.retrieval_score;
        if (a.best_distance != b.best_distance) return a.best_distance < b.best_distance;
        return a.dataset_id < b.dataset_id;
    });
    if (pool.size() > pool_size) pool.resize(pool_size);
    return pool;
}

std::vector<Candidate> retrieve_candidates(const index::VectorIndex& index, providers::TextEmbedder& embedder,
                                           const SubquerySet& subqueries, std::size_t k, std::size_t pool_size) {
    if (index.size() == 0) throw EmptyIndex("index holds no records");
    if (k == 0 || pool_size == 0) throw InvalidInput("k and pool size must be at least 1");
    if (subqueries.subqueries.empty()) throw InvalidInput("no subqueries to retrieve with");

    auto vectors = embedder.embed(subqueries.subqueries);
    std::vector<std::vector<RetrievedHit>> retrieved(vectors.size());
    for (std::size_t n = 0; n < vectors.size(); ++n) {
        for (const auto& neighbor : index.search(vectors[n].values, k)) {
            retrieved[n].push_back({neighbor.id, index.record(neighbor.id).dataset_id, neighbor.distance});
        }
    }
    auto pool = aggregate_candidates(retrieved, pool_size);
    for (auto& c : pool) c.profile = index.profile(c.dataset_id);
    return pool;
}

RerankDecision repair_rerank_output(std::string_view output, std::span<const Candidate> candidates) {
    RerankDecision decision;
    auto identity = [&] {
        decision.order.clear();
        for (std::size_t i = 0; i < candidates.size(); ++i) decision.order.push_back(i);
    };
    auto items = prompts::parse_string_list(output);
    if (!items) {
        decision.fallback = true;
        identity();
        return decision;
    }
    std::unordered_map<std::string_view, std::size_t> position;
    for (std::size_t i = 0; i < candidates.size(); ++i) position.emplace(candidates[i].dataset_id, i);

    std::vector<bool> used(candidates.size(), false);
    for (const auto& item : *items) {
        auto it = position.find(text::trim(item));
        if (it == position.end() || used[it->second]) continue;
        used[it->second] = true;
        decision.order.push_back(it->second);
    }
    if (decision.order.empty()) {
        decision.fallback = true;
        identity();
        return decision;
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!used[i]) decision.order.push_back(i);
    }
    return decision;
}

namespace {

RankedResult ranking_from_order(std::span<const Candidate> candidates, const std::vector<std::size_t>& order) {
    RankedResult result;
    result.entries.reserve(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        const auto& c = candidates[order[r]];
        result.entries.push_back({c.dataset_id, r + 1, order[r] + 1, c.retrieval_score, c.best_distance});
    }
    return result;
}

}  // namespace

RankedResult retrieval_ranking(std::span<const Candidate> candidates) {
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    return ranking_from_order(candidates, order);
}

RankedResult rerank(providers::TextGenerator& generator, std::string_view query, std::vector<Candidate> candidates,
                    const QueryOptions& options) {
    require_query(query);
    if (candidates.size() <= 1) {
        auto result = retrieval_ranking(candidates);
        result.reranked = true;
        return result;
    }
    std::vector<prompts::RerankItem> items;
    items.reserve(candidates.size());
    for (const auto& c : candidates) {
        items.push_back({c.dataset_id, c.retrieval_score,
                         c.profile ? prompts::truncate_profile(c.profile->rendered_text, options.rerank_profile_words)
                                   : std::string("(profile unavailable)")});
    }
    providers::GenerationRequest request{providers::GenerationRole::rerank, prompts::rerank_prompt(query, items),
                                         options.max_output_tokens, 0.0};
    std::vector<std::string> warnings;
    RerankDecision decision;
    try {
        decision = repair_rerank_output(generator.generate(request).text, candidates);
        if (decision.fallback) warn(&warnings, "reranker output was unparseable; keeping retrieval order");
    } catch (const std::exception& e) {
        warn(&warnings, std::string("reranking failed, keeping retrieval order: ") + e.what());
        decision = repair_rerank_output("", candidates);
    }
    auto result = ranking_from_order(candidates, decision.order);
    result.reranked = !decision.fallback;
    result.rerank_fallback = decision.fallback;
    result.warnings = std::move(warnings);
    return result;
}

SearchPipeline::SearchPipeline(const index::VectorIndex& index, providers::TextGenerator& generator,
                               providers::TextEmbedder& embedder, QueryOptions options)
    : index_(index), generator_(generator), embedder_(embedder), options_(options) {
    if (embedder_.dimension() != index_.dimension()) {
        throw DimensionError("embedding provider dimension does not match the index");
    }
}

std::vector<Candidate> SearchPipeline::candidate_pool(std::string_view query, const QueryOptions& options,
                                                      SubquerySet* used, std::vector<std::string>* warnings) const {
    SubquerySet set;
    if (options.optimize) {
        auto background = expand_query(generator_, query, options, warnings);
        set = decompose_query(generator_, query, background, options, warnings);
    } else {
        set = identity_subqueries(query);
    }
    std::vector<Candidate> pool;
    try {
        pool = retrieve_candidates(index_, embedder_, set, options.k, options.pool_size);
    } catch (const ProviderUnavailable& e) {
        auto plain = identity_subqueries(query);
        if (set.subqueries == plain.subqueries) throw;
        warn(warnings, std::string("embedding subqueries failed, retrying with the original query: ") + e.what());
        plain.background = set.background;
        set = std::move(plain);
        pool = retrieve_candidates(index_, embedder_, set, options.k, options.pool_size);
    }
    if (used) *used = std::move(set);
    return pool;
}

RankedResult SearchPipeline::search(std::string_view query, std::string query_id) const {
    return search(query, std::move(query_id), options_);
}

RankedResult SearchPipeline::search(std::string_view query, std::string query_id, const QueryOptions& options) const {
    require_query(query);
    std::vector<std::string> warnings;
    SubquerySet set;
    auto pool = candidate_pool(query, options, &set, &warnings);
    RankedResult result = options.rerank ? rerank(generator_, query, std::move(pool), options) : retrieval_ranking(pool);
    result.query_id = std::move(query_id);
    result.subqueries = std::move(set);
    warnings.insert(warnings.end(), result.warnings.begin(), result.warnings.end());
    result.warnings = std::move(warnings);
    return result;
}

}  // namespace tabsearch::pipeline
