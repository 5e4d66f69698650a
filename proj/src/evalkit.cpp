#include "tabsearch/evalkit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "tabsearch/error.hpp"

namespace tabsearch::eval {

namespace {

std::vector<std::string> fields_of(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> fields;
    std::string f;
    while (in >> f) fields.push_back(f);
    return fields;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

Qrels read_qrels(std::istream& in, const std::string& source) {
    Qrels qrels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto f = fields_of(line);
        if (f.empty()) continue;
        if (f.size() != 4) throw FormatError(source, line_no, "expected '<query_id> 0 <dataset_id> <grade>'");
        int grade = 0;
        if (!parse_number(f[3], grade)) throw FormatError(source, line_no, "grade '" + f[3] + "' is not an integer");
        if (grade < 0) throw FormatError(source, line_no, "negative grade");
        auto [it, inserted] = qrels[f[0]].emplace(f[2], grade);
        if (!inserted) throw FormatError(source, line_no, "duplicate judgment for (" + f[0] + ", " + f[2] + ")");
    }
    return qrels;
}

Qrels read_qrels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open qrels file " + path.string());
    return read_qrels(in, path.string());
}

Run read_run(std::istream& in, const std::string& source) {
    struct Row {
        long rank;
        std::size_t line;
        RunEntry entry;
    };
    std::map<std::string, std::vector<Row>> rows;
    std::map<std::string, std::set<std::string>> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto f = fields_of(line);
        if (f.empty()) continue;
        if (f.size() != 6) {
            throw FormatError(source, line_no, "expected '<query_id> Q0 <dataset_id> <rank> <score> <tag>'");
        }
        long rank = 0;
        double score = 0.0;
        if (!parse_number(f[3], rank)) throw FormatError(source, line_no, "rank '" + f[3] + "' is not an integer");
        if (!parse_number(f[4], score)) throw FormatError(source, line_no, "score '" + f[4] + "' is not a number");
        if (!seen[f[0]].insert(f[2]).second) {
            throw FormatError(source, line_no, "duplicate dataset '" + f[2] + "' for query '" + f[0] + "'");
        }
        rows[f[0]].push_back({rank, line_no, {f[2], score}});
    }
    Run run;
    for (auto& [query, list] : rows) {
        std::stable_sort(list.begin(), list.end(), [](const Row& a, const Row& b) { return a.rank < b.rank; });
        auto& out = run[query];
        for (auto& r : list) out.push_back(std::move(r.entry));
    }
    return run;
}

Run read_run(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open run file " + path.string());
    return read_run(in, path.string());
}

void write_run(std::ostream& out, const Run& run, const std::string& tag) {
    for (const auto& [query, entries] : run) {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            fmt::print(out, "{} Q0 {} {} {} {}\n", query, entries[i].dataset_id, i + 1, entries[i].score, tag);
        }
    }
}

void write_run(const std::filesystem::path& path, const Run& run, const std::string& tag) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write run file " + path.string());
    write_run(out, run, tag);
}

std::set<std::string> relevant_set(const std::map<std::string, int>& judgments) {
    std::set<std::string> out;
    for (const auto& [doc, grade] : judgments) {
        if (grade >= 1) out.insert(doc);
    }
    return out;
}

namespace {

void require_cutoff(std::size_t k) {
    if (k == 0) throw InvalidInput("metric cutoff must be at least 1");
}

std::size_t hits_in_top(std::span<const std::string> ranking, const std::set<std::string>& relevant, std::size_t k) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) hits += relevant.count(ranking[i]);
    return hits;
}

}  // namespace

std::optional<double> recall_at_k(std::span<const std::string> ranking, const std::set<std::string>& relevant,
                                  std::size_t k) {
    require_cutoff(k);
    if (relevant.empty()) return std::nullopt;
    return static_cast<double>(hits_in_top(ranking, relevant, k)) / static_cast<double>(relevant.size());
}

std::optional<double> precision_at_k(std::span<const std::string> ranking, const std::set<std::string>& relevant,
                                     std::size_t k) {
    require_cutoff(k);
    if (relevant.empty()) return std::nullopt;
    return static_cast<double>(hits_in_top(ranking, relevant, k)) / static_cast<double>(k);
}

std::optional<double> average_precision(std::span<const std::string> ranking, const std::set<std::string>& relevant) {
    if (relevant.empty()) return std::nullopt;
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        if (!relevant.count(ranking[i])) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    return sum / static_cast<double>(relevant.size());
}

std::optional<double> ndcg_at_k(std::span<const std::string> ranking, const std::map<std::string, int>& grades,
                                std::size_t k) {
    require_cutoff(k);
    std::vector<int> ideal;
    for (const auto& [doc, grade] : grades) {
        if (grade > 0) ideal.push_back(grade);
    }
    if (ideal.empty()) return std::nullopt;
    std::sort(ideal.rbegin(), ideal.rend());

    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i) {
        auto it = grades.find(ranking[i]);
        if (it != grades.end() && it->second > 0) dcg += it->second / std::log2(static_cast<double>(i) + 2.0);
    }
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
    return dcg / idcg;
}

std::vector<double> EvalReport::column(const std::string& metric) const {
    std::vector<double> out;
    for (const auto& [query, scores] : per_query) {
        auto it = scores.metrics.find(metric);
        if (it != scores.metrics.end()) out.push_back(it->second);
    }
    return out;
}

EvalReport evaluate(const Run& run, const Qrels& qrels, const EvalOptions& options) {
    EvalReport report;
    const auto k = options.cutoff;
    report.metric_names = {"MAP", fmt::format("P@{}", k), fmt::format("R@{}", k), fmt::format("nDCG@{}", k)};
    for (auto c : options.recall_cutoffs) report.metric_names.push_back(fmt::format("Recall@{}", c));

    for (const auto& [query, entries] : run) {
        if (!qrels.count(query)) report.diagnostics.push_back("query '" + query + "' has no judgments; skipped");
    }
    for (const auto& [query, judgments] : qrels) {
        auto relevant = relevant_set(judgments);
        if (relevant.empty()) {
            report.diagnostics.push_back("query '" + query + "' has no relevant datasets; skipped");
            continue;
        }
        std::vector<std::string> ranking;
        if (auto it = run.find(query); it != run.end()) {
            for (const auto& e : it->second) ranking.push_back(e.dataset_id);
        } else {
            report.diagnostics.push_back("query '" + query + "' is missing from the run; scored as empty");
        }
        QueryScores scores;
        scores.metrics["MAP"] = *average_precision(ranking, relevant);
        scores.metrics[fmt::format("P@{}", k)] = *precision_at_k(ranking, relevant, k);
        scores.metrics[fmt::format("R@{}", k)] = *recall_at_k(ranking, relevant, k);
        scores.metrics[fmt::format("nDCG@{}", k)] = *ndcg_at_k(ranking, judgments, k);
        for (auto c : options.recall_cutoffs) {
            scores.metrics[fmt::format("Recall@{}", c)] = *recall_at_k(ranking, relevant, c);
        }
        report.per_query.emplace(query, std::move(scores));
        ++report.evaluated;
    }
    for (const auto& name : report.metric_names) {
        auto values = report.column(name);
        double sum = 0.0;
        for (double v : values) sum += v;
        report.means[name] = values.empty() ? 0.0 : sum / static_cast<double>(values.size());
    }
    return report;
}

BootstrapInterval bootstrap_ci(std::span<const double> scores, double confidence, std::size_t resamples,
                               std::uint64_t seed) {
    if (scores.size() < 2) throw InsufficientData("bootstrap needs at least two per-query scores");
    if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidInput("confidence must lie in (0, 1)");
    if (resamples == 0) throw InvalidInput("resample count must be positive");
    const auto n = scores.size();

    BootstrapInterval ci;
    double total = 0.0;
    for (double s : scores) total += s;
    ci.mean = total / static_cast<double>(n);

    std::mt19937_64 rng(seed);
    std::vector<double> means(resamples);
    for (auto& m : means) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += scores[rng() % n];
        m = sum / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const double tail = (1.0 - confidence) / 2.0;
    auto lo = static_cast<std::size_t>(std::floor(tail * static_cast<double>(resamples)));
    auto hi = static_cast<std::size_t>(std::ceil((1.0 - tail) * static_cast<double>(resamples)));
    lo = std::min(lo, resamples - 1);
    hi = std::clamp<std::size_t>(hi, 1, resamples) - 1;
    ci.low = means[lo];
    ci.high = means[hi];
    return ci;
}

}  // namespace tabsearch::eval
