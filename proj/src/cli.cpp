#include "tabsearch/cli.hpp"

#include <atomic>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "tabsearch/config.hpp"
#include "tabsearch/corpus.hpp"
#include "tabsearch/error.hpp"
#include "tabsearch/evalkit.hpp"
#include "tabsearch/hashing.hpp"
#include "tabsearch/indexer.hpp"
#include "tabsearch/profiler.hpp"
#include "tabsearch/providers.hpp"
#include "tabsearch/query_pipeline.hpp"
#include "tabsearch/text_util.hpp"

namespace tabsearch::cli {

namespace fs = std::filesystem;

namespace {

// Flags that override configuration values when given.
struct Overrides {
    std::optional<std::string> corpus;
    std::optional<std::string> manifest;
    std::optional<std::string> mode;
    std::optional<std::string> backend;
    std::optional<std::size_t> M;
    std::optional<std::size_t> ef_construction;
    std::optional<std::size_t> ef_search;
    std::optional<std::size_t> pseudoqueries;
    std::optional<std::size_t> dimension;
    std::optional<std::size_t> concurrency;
    std::optional<std::size_t> k;
    std::optional<std::size_t> pool;
    std::optional<std::size_t> max_subqueries;
    std::optional<std::uint64_t> seed;
    bool no_query_opt = false;
    bool no_rerank = false;
};

config::PipelineConfig resolve(const std::optional<std::string>& config_path, const Overrides& o) {
    auto c = config::load_config(config_path ? std::optional<fs::path>(*config_path) : std::nullopt);
    if (o.corpus) c.corpus_path = *o.corpus;
    if (o.manifest) c.manifest_path = *o.manifest;
    if (o.mode) c.provider.mode = *o.mode;
    if (o.backend) {
        auto b = index::backend_from_string(*o.backend);
        if (!b) throw ConfigError("--backend must be 'flat' or 'hnsw'");
        c.backend = *b;
    }
    if (o.M) c.hnsw.M = *o.M;
    if (o.ef_construction) c.hnsw.ef_construction = *o.ef_construction;
    if (o.ef_search) c.hnsw.ef_search = *o.ef_search;
    if (o.pseudoqueries) c.pseudoqueries_per_dataset = *o.pseudoqueries;
    if (o.dimension) c.embedding_dimension = *o.dimension;
    if (o.concurrency) c.provider.concurrency = *o.concurrency;
    if (o.k) c.query.k = *o.k;
    if (o.pool) c.query.pool_size = *o.pool;
    if (o.max_subqueries) c.query.max_subqueries = *o.max_subqueries;
    if (o.seed) c.seed = *o.seed;
    c.hnsw.seed = c.seed;
    if (o.no_query_opt) c.query.optimize = false;
    if (o.no_rerank) c.query.rerank = false;
    config::validate(c);
    return c;
}

providers::RemoteSettings remote_settings(const config::ProviderConfig& p, std::size_t dimension) {
    providers::RemoteSettings s;
    s.generation_url = p.generation_url;
    s.embedding_url = p.embedding_url;
    s.api_key = p.api_key;
    s.generation_model = p.generation_model;
    s.embedding_model = p.embedding_model;
    s.embedding_dimension = dimension;
    s.max_in_flight = p.concurrency;
    s.max_attempts = p.max_attempts;
    s.initial_backoff = std::chrono::milliseconds(p.initial_backoff_ms);
    s.timeout = std::chrono::seconds(p.timeout_seconds);
    return s;
}

// Provider stack: base provider, call instrumentation, then the embedding cache.
struct Providers {
    std::unique_ptr<providers::TextGenerator> base_generator;
    std::unique_ptr<providers::TextEmbedder> base_embedder;
    std::unique_ptr<providers::InstrumentedGenerator> generator;
    std::unique_ptr<providers::InstrumentedEmbedder> counted_embedder;
    std::unique_ptr<providers::EmbeddingCache> cache;
    std::unique_ptr<providers::CachingEmbedder> embedder;

    Providers(const config::ProviderConfig& p, std::size_t dimension, const fs::path& cache_path) {
        if (p.mode == "remote") {
            if (p.generation_url.empty() || p.embedding_url.empty()) {
                throw ConfigError(fmt::format("remote mode needs endpoint URLs (set {} and {})",
                                              config::kEnvGenerationUrl, config::kEnvEmbeddingUrl));
            }
            base_generator = std::make_unique<providers::RemoteGenerator>(remote_settings(p, dimension));
            base_embedder = std::make_unique<providers::RemoteEmbedder>(remote_settings(p, dimension));
        } else {
            base_generator = std::make_unique<providers::OfflineGenerator>();
            base_embedder = std::make_unique<providers::OfflineEmbedder>(dimension);
        }
        generator = std::make_unique<providers::InstrumentedGenerator>(*base_generator);
        counted_embedder = std::make_unique<providers::InstrumentedEmbedder>(*base_embedder);
        cache = std::make_unique<providers::EmbeddingCache>(cache_path);
        if (cache->skipped_lines() > 0) {
            spdlog::warn("embedding cache {}: skipped {} malformed lines", cache_path.string(), cache->skipped_lines());
        }
        embedder = std::make_unique<providers::CachingEmbedder>(*counted_embedder, *cache);
    }
};

fs::path cache_path_for(const fs::path& index_path) { return fs::path(index_path.string() + ".embcache"); }

corpus::Collection load_corpus(const config::PipelineConfig& c) {
    if (c.corpus_path.empty()) throw ConfigError("no corpus given (use --corpus or corpus.path)");
    corpus::LoadOptions options;
    options.parse.missing_tokens = c.missing_tokens;
    std::optional<fs::path> manifest;
    if (!c.manifest_path.empty()) manifest = c.manifest_path;
    auto collection = corpus::load_collection(c.corpus_path, manifest, options);
    return collection;
}

index::VectorIndex open_index(const std::string& path) {
    if (!fs::exists(path)) throw InvalidInput("index file '" + path + "' does not exist; run 'index' first");
    return index::VectorIndex::load(path);
}

void check_embedder(const index::VectorIndex& idx, const providers::TextEmbedder& embedder) {
    auto built_with = idx.manifest().embedder;
    if (!built_with.empty() && built_with != embedder.id()) {
        throw IncompatibleIndex(fmt::format("index was built with embedder '{}' but the configured embedder is '{}'",
                                            built_with, embedder.id()));
    }
}

struct QueryLine {
    std::string id;
    std::string text;
};

std::vector<QueryLine> read_queries(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open queries file " + path.string());
    std::vector<QueryLine> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty() || line.front() == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw FormatError(path.string(), line_no, "expected '<query_id>\\t<query text>'");
        QueryLine q{std::string(text::trim(line.substr(0, tab))), std::string(text::trim(line.substr(tab + 1)))};
        if (q.id.empty() || q.text.empty()) throw FormatError(path.string(), line_no, "empty query id or text");
        out.push_back(std::move(q));
    }
    if (out.empty()) throw InvalidInput("queries file " + path.string() + " holds no queries");
    return out;
}

std::vector<pipeline::RankedResult> run_batch(const pipeline::SearchPipeline& search,
                                              const std::vector<QueryLine>& queries,
                                              const pipeline::QueryOptions& options, std::size_t threads) {
    std::vector<pipeline::RankedResult> results(queries.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::max<std::size_t>(1, std::min(threads, queries.size())); ++w) {
            pool.emplace_back([&] {
                for (auto i = next.fetch_add(1); i < queries.size(); i = next.fetch_add(1)) {
                    try {
                        results[i] = search.search(queries[i].text, queries[i].id, options);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

eval::Run to_run(const std::vector<pipeline::RankedResult>& results) {
    eval::Run run;
    for (const auto& r : results) {
        auto& list = run[r.query_id];
        const auto n = r.entries.size();
        for (const auto& e : r.entries) list.push_back({e.dataset_id, static_cast<double>(n - e.rank + 1)});
    }
    return run;
}

// Candidate pool as (dataset, retrieval score) in retrieval order.
std::vector<std::pair<std::string, std::size_t>> pool_of(const pipeline::RankedResult& r) {
    std::vector<std::pair<std::size_t, std::pair<std::string, std::size_t>>> by_rank;
    for (const auto& e : r.entries) by_rank.push_back({e.retrieval_rank, {e.dataset_id, e.retrieval_score}});
    std::sort(by_rank.begin(), by_rank.end());
    std::vector<std::pair<std::string, std::size_t>> out;
    for (auto& [rank, entry] : by_rank) out.push_back(std::move(entry));
    return out;
}

void print_stats(std::ostream& err, const providers::InstrumentedGenerator& g,
                 const providers::InstrumentedEmbedder& e) {
    fmt::print(err, "provider calls: generation={} (failures {}, prompt_tokens {}, output_tokens {}), embedding={} ({} texts)\n",
               g.stats().calls.load(), g.stats().failures.load(), g.stats().prompt_tokens.load(),
               g.stats().output_tokens.load(), e.stats().calls.load(), e.stats().items.load());
}

int cmd_profile(const config::PipelineConfig& c, const std::optional<std::string>& json_path, std::ostream& out) {
    auto collection = load_corpus(c);
    corpus::ParseOptions parse;
    parse.missing_tokens = c.missing_tokens;
    std::ofstream json_out;
    if (json_path) {
        json_out.open(*json_path);
        if (!json_out) throw InvalidInput("cannot write " + *json_path);
    }
    std::size_t profiled = 0;
    for (const auto& table : collection.tables) {
        profiler::DatasetProfile profile;
        try {
            profile = profiler::profile_dataset(table, parse);
        } catch (const EmptyTable& e) {
            spdlog::warn("{}: {}", table.id, e.what());
            continue;
        }
        ++profiled;
        fmt::print(out, "## {}\n{}\n\n", table.id, profile.rendered_text);
        if (json_path) {
            for (const auto& col : profile.column_profiles) {
                auto record = profiler::to_json(col);
                record["dataset_id"] = table.id;
                record["row_count"] = profile.row_count;
                json_out << record.dump() << '\n';
            }
        }
    }
    if (profiled == 0) throw EmptyCollection("no dataset could be profiled");
    return kOk;
}

int cmd_index(const config::PipelineConfig& c, const std::string& out_path, const std::optional<std::string>& report_path,
              bool allow_partial, std::ostream& out, std::ostream& err) {
    auto collection = load_corpus(c);
    if (auto parent = fs::path(out_path).parent_path(); !parent.empty()) fs::create_directories(parent);
    Providers p(c.provider, c.embedding_dimension, cache_path_for(out_path));

    indexer::BuildOptions options;
    options.pseudoqueries = c.pseudoqueries_per_dataset;
    options.backend = c.backend;
    options.hnsw = c.hnsw;
    options.concurrency = c.provider.concurrency;
    options.allow_partial = allow_partial;
    options.parse.missing_tokens = c.missing_tokens;

    auto [idx, report] = indexer::build_index(collection, *p.generator, *p.embedder, options);
    idx.save(out_path);

    std::ifstream in(out_path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    fmt::print(out, "index: {}\n", out_path);
    fmt::print(out, "backend: {}\n", index::to_string(c.backend));
    fmt::print(out, "datasets: {} indexed, {} failed, {} files skipped\n", report.datasets.size() - report.failed,
               report.failed, report.skipped_files.size());
    fmt::print(out, "records: {}\n", report.record_count);
    for (const auto& d : report.datasets) {
        if (d.failure) {
            fmt::print(out, "  {}\tFAILED\t{}\n", d.dataset_id, *d.failure);
        } else {
            fmt::print(out, "  {}\t{}\n", d.dataset_id, d.pseudoquery_count);
        }
    }
    for (const auto& s : report.skipped_files) fmt::print(out, "  {}\tSKIPPED\t{}\n", s.path, s.message);
    fmt::print(out, "sha256: {}\n", hashing::sha256_hex(bytes));
    print_stats(err, *p.generator, *p.counted_embedder);

    if (report_path) {
        std::ofstream r(*report_path);
        if (!r) throw InvalidInput("cannot write " + *report_path);
        auto j = report.to_json();
        j["sha256"] = hashing::sha256_hex(bytes);
        j["embedding_calls"] = p.counted_embedder->stats().calls.load();
        r << j.dump(2) << '\n';
    }
    return kOk;
}

int cmd_query(const config::PipelineConfig& c, const std::string& index_path, const std::string& query,
              const std::string& query_id, bool trec, const std::string& tag, std::ostream& out, std::ostream& err) {
    auto idx = open_index(index_path);
    Providers p(c.provider, idx.dimension(), cache_path_for(index_path));
    check_embedder(idx, *p.embedder);
    pipeline::SearchPipeline search(idx, *p.generator, *p.embedder, c.query);
    auto result = search.search(query, query_id, c.query);
    for (const auto& w : result.warnings) fmt::print(err, "warning: {}\n", w);

    if (trec) {
        eval::write_run(out, to_run({result}), tag);
        return kOk;
    }
    fmt::print(out, "query: {}\n", query);
    if (!result.subqueries.background.empty()) fmt::print(out, "background: {}\n", result.subqueries.background);
    fmt::print(out, "subqueries:\n");
    for (std::size_t i = 0; i < result.subqueries.subqueries.size(); ++i) {
        fmt::print(out, "  {}. {}\n", i + 1, result.subqueries.subqueries[i]);
    }
    const char* stage = !c.query.rerank ? "retrieval" : result.rerank_fallback ? "retrieval (rerank fallback)" : "rerank";
    fmt::print(out, "ranking: {}\n", stage);
    fmt::print(out, "{:>4}  {:<40} {:>9} {:>6} {:>10}\n", "rank", "dataset", "retrieval", "score", "distance");
    for (const auto& e : result.entries) {
        fmt::print(out, "{:>4}  {:<40} {:>9} {:>6} {:>10.6f}\n", e.rank, e.dataset_id, e.retrieval_rank,
                   e.retrieval_score, e.best_distance);
    }
    return kOk;
}

struct EvalFlags {
    std::string index;
    std::string queries;
    std::string qrels;
    std::optional<std::string> run_out;
    std::string tag = "tabsearch";
    bool ablate = false;
    bool bootstrap = false;
    std::size_t resamples = 10000;
    double confidence = 0.95;
    bool per_query = false;
};

int cmd_eval(const config::PipelineConfig& c, const EvalFlags& f, std::ostream& out, std::ostream& err) {
    auto idx = open_index(f.index);
    auto queries = read_queries(f.queries);
    auto qrels = eval::read_qrels(fs::path(f.qrels));
    std::vector<std::string> qrels_only;
    for (const auto& [qid, judged] : qrels) {
        bool asked = std::any_of(queries.begin(), queries.end(), [&](const auto& q) { return q.id == qid; });
        if (!asked) qrels_only.push_back(qid);
    }
    for (const auto& qid : qrels_only) {
        fmt::print(err, "diagnostic: qrels query {} has no query text; skipped\n", qid);
        qrels.erase(qid);
    }
    Providers p(c.provider, idx.dimension(), cache_path_for(f.index));
    check_embedder(idx, *p.embedder);
    pipeline::SearchPipeline search(idx, *p.generator, *p.embedder, c.query);

    struct Arm {
        std::string name;
        std::vector<pipeline::RankedResult> results;
        eval::EvalReport report;
    };
    std::vector<Arm> arms;
    arms.push_back({"full", run_batch(search, queries, c.query, c.provider.concurrency), {}});
    if (f.ablate) {
        auto ablated = c.query;
        ablated.optimize = false;
        arms.push_back({"no-query-opt", run_batch(search, queries, ablated, c.provider.concurrency), {}});
    }
    for (auto& arm : arms) {
        for (const auto& r : arm.results) {
            for (const auto& w : r.warnings) fmt::print(err, "warning: {} ({}): {}\n", r.query_id, arm.name, w);
        }
        arm.report = eval::evaluate(to_run(arm.results), qrels);
    }
    for (const auto& d : arms.front().report.diagnostics) fmt::print(err, "diagnostic: {}\n", d);
    if (f.run_out) eval::write_run(fs::path(*f.run_out), to_run(arms.front().results), f.tag);

    const auto& names = arms.front().report.metric_names;
    fmt::print(out, "queries: {} evaluated of {}\n", arms.front().report.evaluated, queries.size());
    if (arms.front().report.evaluated == 0) {
        fmt::print(err, "error: no query could be evaluated against the qrels\n");
        return kDataError;
    }
    fmt::print(out, "{:<12}", "metric");
    for (const auto& arm : arms) fmt::print(out, " {:>14}", arm.name);
    fmt::print(out, "\n");
    for (const auto& m : names) {
        fmt::print(out, "{:<12}", m);
        for (const auto& arm : arms) fmt::print(out, " {:>14.4f}", arm.report.means.at(m));
        fmt::print(out, "\n");
    }
    if (f.ablate) {
        std::size_t identical = 0;
        for (std::size_t i = 0; i < queries.size(); ++i) {
            identical += pool_of(arms[0].results[i]) == pool_of(arms[1].results[i]);
        }
        fmt::print(out, "identical candidate pools: {}/{}\n", identical, queries.size());
    }
    if (f.bootstrap) {
        fmt::print(out, "bootstrap {:.0f}% CI ({} resamples, seed {}):\n", f.confidence * 100.0, f.resamples, c.seed);
        for (const auto& arm : arms) {
            for (const auto& m : names) {
                auto column = arm.report.column(m);
                try {
                    auto ci = eval::bootstrap_ci(column, f.confidence, f.resamples, c.seed);
                    fmt::print(out, "  {:<14} {:<12} {:.4f} [{:.4f}, {:.4f}]\n", arm.name, m, ci.mean, ci.low, ci.high);
                } catch (const InsufficientData& e) {
                    fmt::print(out, "  {:<14} {:<12} n/a ({})\n", arm.name, m, e.what());
                }
            }
        }
    }
    if (f.per_query) {
        fmt::print(out, "per-query ({}):\n", arms.front().name);
        for (const auto& [qid, scores] : arms.front().report.per_query) {
            fmt::print(out, "  {}", qid);
            for (const auto& m : names) fmt::print(out, " {}={:.4f}", m, scores.metrics.at(m));
            fmt::print(out, "\n");
        }
    }
    return kOk;
}

void configure_logging(const std::string& level) {
    auto logger = spdlog::get("tabsearch");
    if (!logger) {
        logger = std::make_shared<spdlog::logger>("tabsearch", std::make_shared<spdlog::sinks::stderr_sink_mt>());
        spdlog::register_logger(logger);
    }
    spdlog::set_default_logger(logger);
    auto parsed = spdlog::level::from_str(level);
    if (parsed == spdlog::level::off && level != "off") throw ConfigError("unknown log level '" + level + "'");
    spdlog::set_level(parsed);
}

void add_provider_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--mode", o.mode, "Provider mode: offline | remote (default offline)");
    cmd->add_option("--concurrency", o.concurrency, "Max concurrent provider calls (default 8)");
}

void add_online_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--k", o.k, "Pseudoqueries retrieved per subquery (default 10)");
    cmd->add_option("--pool", o.pool, "Candidates passed to the reranker (default 20)");
    cmd->add_option("--max-subqueries", o.max_subqueries, "Upper bound on subqueries (default 5)");
    cmd->add_flag("--no-query-opt", o.no_query_opt, "Skip expansion and decomposition; retrieve with the raw query");
    cmd->add_flag("--no-rerank", o.no_rerank, "Return candidates in retrieval order");
    cmd->add_option("--seed", o.seed, "Random seed (default 42)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dataset search over tabular collections: profile tables, index generated pseudoqueries, query "
                 "and evaluate."};
    app.name(args.empty() ? "tabsearch" : fs::path(args[0]).filename().string());
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    std::string log_level = "info";
    app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--log-level", log_level, "trace | debug | info | warn | error | off (default info)");

    Overrides o;

    auto* profile = app.add_subcommand("profile", "Print the statistical profile of every table in a corpus");
    std::optional<std::string> profile_json;
    profile->add_option("--corpus", o.corpus, "Corpus directory");
    profile->add_option("--manifest", o.manifest, "Manifest file (<id>\\t<relative-path>[\\t<display-name>])");
    profile->add_option("--json", profile_json, "Also write one JSON record per column to this file");

    auto* index_cmd = app.add_subcommand("index", "Build a pseudoquery index from a corpus");
    std::string index_out;
    std::optional<std::string> report_path;
    bool allow_partial = false;
    index_cmd->add_option("--corpus", o.corpus, "Corpus directory");
    index_cmd->add_option("--manifest", o.manifest, "Manifest file");
    index_cmd->add_option("--out", index_out, "Index file to write")->required();
    index_cmd->add_option("--backend", o.backend, "flat | hnsw (default hnsw)");
    index_cmd->add_option("--M", o.M, "HNSW links per node (default 16)");
    index_cmd->add_option("--ef-construction", o.ef_construction, "HNSW build beam width (default 200)");
    index_cmd->add_option("--ef-search", o.ef_search, "HNSW query beam width (default 128)");
    index_cmd->add_option("--pseudoqueries", o.pseudoqueries, "Pseudoqueries generated per dataset (default 10)");
    index_cmd->add_option("--dimension", o.dimension, "Embedding dimension (default 256)");
    index_cmd->add_option("--seed", o.seed, "Random seed (default 42)");
    index_cmd->add_flag("--allow-partial", allow_partial, "Write the index even when some datasets fail");
    index_cmd->add_option("--report", report_path, "Write the build report as JSON");
    add_provider_flags(index_cmd, o);

    auto* query_cmd = app.add_subcommand("query", "Search an index with one natural-language query");
    std::string query_index;
    std::string query_text;
    std::string query_id = "q1";
    std::string tag = "tabsearch";
    bool trec = false;
    query_cmd->add_option("--index", query_index, "Index file")->required();
    query_cmd->add_option("query", query_text, "Query text")->required();
    query_cmd->add_option("--query-id", query_id, "Query id used in TREC output (default q1)");
    query_cmd->add_flag("--trec", trec, "Emit TREC run lines");
    query_cmd->add_option("--tag", tag, "Run tag for TREC output (default tabsearch)");
    add_online_flags(query_cmd, o);
    add_provider_flags(query_cmd, o);

    auto* eval_cmd = app.add_subcommand("eval", "Run a query set and score it against relevance judgments");
    EvalFlags ef;
    eval_cmd->add_option("--index", ef.index, "Index file")->required();
    eval_cmd->add_option("--queries", ef.queries, "Queries file (<query_id>\\t<query text>)")->required();
    eval_cmd->add_option("--qrels", ef.qrels, "Qrels file (<query_id> 0 <dataset_id> <grade>)")->required();
    eval_cmd->add_option("--run-out", ef.run_out, "Write the TREC run of the full pipeline");
    eval_cmd->add_option("--tag", ef.tag, "Run tag (default tabsearch)");
    eval_cmd->add_flag("--ablate-query-opt", ef.ablate, "Also evaluate without query optimization");
    eval_cmd->add_flag("--bootstrap", ef.bootstrap, "Report percentile bootstrap confidence intervals");
    eval_cmd->add_option("--resamples", ef.resamples, "Bootstrap resamples (default 10000)");
    eval_cmd->add_option("--confidence", ef.confidence, "Bootstrap confidence level (default 0.95)")
        ->check(CLI::Range(0.5, 0.999));
    eval_cmd->add_flag("--per-query", ef.per_query, "Print per-query metrics");
    add_online_flags(eval_cmd, o);
    add_provider_flags(eval_cmd, o);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        fmt::print(err, "error: {}\n", e.what());
        fmt::print(err, "run with --help for usage\n");
        return kUsage;
    }

    try {
        configure_logging(log_level);
        auto c = resolve(config_path, o);
        if (*profile) return cmd_profile(c, profile_json, out);
        if (*index_cmd) return cmd_index(c, index_out, report_path, allow_partial, out, err);
        if (*query_cmd) return cmd_query(c, query_index, query_text, query_id, trec, tag, out, err);
        if (*eval_cmd) {
            if (ef.resamples == 0) throw ConfigError("--resamples must be positive");
            return cmd_eval(c, ef, out, err);
        }
    } catch (const ConfigError& e) {
        fmt::print(err, "configuration error: {}\n", e.what());
        return kUsage;
    } catch (const ProviderUnavailable& e) {
        fmt::print(err, "provider error: {}\n", e.what());
        return kProviderError;
    } catch (const std::exception& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kDataError;
    }
    return kUsage;
}

}  // namespace tabsearch::cli
