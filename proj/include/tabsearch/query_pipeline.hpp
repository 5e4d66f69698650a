#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabsearch/profiler.hpp"
#include "tabsearch/providers.hpp"
#include "tabsearch/vector_index.hpp"

namespace tabsearch::pipeline {

struct QueryOptions {
    std::size_t k = 10;               // pseudoqueries retrieved per subquery
    std::size_t pool_size = 20;       // candidates handed to the reranker
    std::size_t max_subqueries = 5;
    bool optimize = true;             // expansion + decomposition
    bool rerank = true;
    std::size_t background_max_words = 200;
    std::size_t rerank_profile_words = 400;
    int max_output_tokens = 1024;
};

struct SubquerySet {
    std::string original;
    std::string background;
    std::vector<std::string> subqueries;
};

struct Match {
    std::size_t subquery = 0;
    index::PseudoqueryId pseudoquery_id = 0;
    double distance = 0.0;
};

struct Candidate {
    std::string dataset_id;
    const profiler::DatasetProfile* profile = nullptr;
    std::size_t retrieval_score = 0;  // == matches.size()
    double best_distance = 0.0;
    std::vector<Match> matches;
};

/// One retrieved pseudoquery, already resolved to its dataset.
struct RetrievedHit {
    index::PseudoqueryId pseudoquery_id = 0;
    std::string dataset_id;
    double distance = 0.0;
};

struct RankedEntry {
    std::string dataset_id;
    std::size_t rank = 0;            // 1-based final rank
    std::size_t retrieval_rank = 0;  // 1-based rank before reranking
    std::size_t retrieval_score = 0;
    double best_distance = 0.0;
};

struct RankedResult {
    std::string query_id;
    SubquerySet subqueries;
    std::vector<RankedEntry> entries;
    bool reranked = false;
    bool rerank_fallback = false;
    std::vector<std::string> warnings;

    std::vector<std::string> dataset_ids() const;
};

/// Background document B(q). Provider failure degrades to "" with a warning.
std::string expand_query(providers::TextGenerator& generator, std::string_view query, const QueryOptions& options,
                         std::vector<std::string>* warnings = nullptr);

/// U(q): normalised, de-duplicated, clamped to [1, max_subqueries]; [q] on unusable output.
SubquerySet decompose_query(providers::TextGenerator& generator, std::string_view query, std::string_view background,
                            const QueryOptions& options, std::vector<std::string>* warnings = nullptr);

SubquerySet identity_subqueries(std::string_view query);

/// Count aggregation: a dataset scores one point per occurrence of one of its
/// pseudoqueries in any retrieved set. Sorted by (score desc, best distance
/// asc, id asc) and truncated to pool_size.
std::vector<Candidate> aggregate_candidates(std::span<const std::vector<RetrievedHit>> retrieved,
                                            std::size_t pool_size);

std::vector<Candidate> retrieve_candidates(const index::VectorIndex& index, providers::TextEmbedder& embedder,
                                           const SubquerySet& subqueries, std::size_t k, std::size_t pool_size);

struct RerankDecision {
    std::vector<std::size_t> order;  // permutation of candidate positions
    bool fallback = false;           // output unusable; retrieval order kept
};

/// Turns raw reranker output into a permutation: unknown and repeated ids are
/// dropped, omitted ids are appended in retrieval order.
RerankDecision repair_rerank_output(std::string_view output, std::span<const Candidate> candidates);

RankedResult rerank(providers::TextGenerator& generator, std::string_view query, std::vector<Candidate> candidates,
                    const QueryOptions& options);

/// Ranking in retrieval order, no provider involved.
RankedResult retrieval_ranking(std::span<const Candidate> candidates);

class SearchPipeline {
public:
    SearchPipeline(const index::VectorIndex& index, providers::TextGenerator& generator,
                   providers::TextEmbedder& embedder, QueryOptions options = {});

    RankedResult search(std::string_view query, std::string query_id = {}) const;
    RankedResult search(std::string_view query, std::string query_id, const QueryOptions& options) const;

    /// Optimisation stage plus retrieval, without reranking.
    std::vector<Candidate> candidate_pool(std::string_view query, const QueryOptions& options,
                                          SubquerySet* used = nullptr,
                                          std::vector<std::string>* warnings = nullptr) const;

    const QueryOptions& options() const noexcept { return options_; }

private:
    const index::VectorIndex& index_;
    providers::TextGenerator& generator_;
    providers::TextEmbedder& embedder_;
    QueryOptions options_;
};

}  // namespace tabsearch::pipeline
