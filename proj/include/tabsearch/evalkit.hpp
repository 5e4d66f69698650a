#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace tabsearch::eval {

/// query id -> dataset id -> graded relevance (>= 0).
using Qrels = std::map<std::string, std::map<std::string, int>>;

struct RunEntry {
    std::string dataset_id;
    double score = 0.0;
};

/// query id -> ranked list, best first.
using Run = std::map<std::string, std::vector<RunEntry>>;

Qrels read_qrels(std::istream& in, const std::string& source = "<qrels>");
Qrels read_qrels(const std::filesystem::path& path);
Run read_run(std::istream& in, const std::string& source = "<run>");
Run read_run(const std::filesystem::path& path);
void write_run(std::ostream& out, const Run& run, const std::string& tag);
void write_run(const std::filesystem::path& path, const Run& run, const std::string& tag);

/// Datasets with grade >= 1.
std::set<std::string> relevant_set(const std::map<std::string, int>& judgments);

// Per-query metrics. nullopt means the query cannot be scored (no relevant /
// no positive grade) and must be skipped.
std::optional<double> recall_at_k(std::span<const std::string> ranking, const std::set<std::string>& relevant,
                                  std::size_t k);
std::optional<double> precision_at_k(std::span<const std::string> ranking, const std::set<std::string>& relevant,
                                     std::size_t k);
std::optional<double> average_precision(std::span<const std::string> ranking, const std::set<std::string>& relevant);
/// Linear gain, log2(rank + 1) discount, ideal DCG over all judged items.
std::optional<double> ndcg_at_k(std::span<const std::string> ranking, const std::map<std::string, int>& grades,
                                std::size_t k);

struct QueryScores {
    std::map<std::string, double> metrics;  // metric name -> value
};

struct EvalReport {
    std::map<std::string, QueryScores> per_query;
    std::map<std::string, double> means;
    std::vector<std::string> metric_names;
    std::vector<std::string> diagnostics;
    std::size_t evaluated = 0;

    std::vector<double> column(const std::string& metric) const;
};

struct EvalOptions {
    std::vector<std::size_t> recall_cutoffs = {1, 5, 10};
    std::size_t cutoff = 10;  // P@k, R@k, nDCG@k
};

/// Queries without relevant judgments, or present in the run but not the
/// qrels, are skipped with a diagnostic. Judged queries absent from the run
/// score zero.
EvalReport evaluate(const Run& run, const Qrels& qrels, const EvalOptions& options = {});

struct BootstrapInterval {
    double low = 0.0;
    double high = 0.0;
    double mean = 0.0;
};

/// Percentile bootstrap of the mean, resampling queries with replacement.
/// Throws InsufficientData for fewer than two scores.
BootstrapInterval bootstrap_ci(std::span<const double> scores, double confidence = 0.95,
                               std::size_t resamples = 10000, std::uint64_t seed = 42);

}  // namespace tabsearch::eval
