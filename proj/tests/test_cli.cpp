#include <doctest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "support.hpp"
#include "tabsearch/cli.hpp"
#include "tabsearch/config.hpp"
#include "tabsearch/error.hpp"

using namespace tabsearch;
using testsupport::TempDir;
using testsupport::write_file;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "tabsearch");
    args.insert(args.begin() + 1, {"--log-level", "warn"});
    std::ostringstream out, err;
    int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("config defaults, overlay and validation") {
    config::PipelineConfig c;
    CHECK(c.pseudoqueries_per_dataset == 10);
    CHECK(c.query.k == 10);
    CHECK(c.query.pool_size == 20);
    CHECK(c.query.max_subqueries == 5);
    CHECK(c.hnsw.M == 16);
    CHECK(c.provider.concurrency == 8);

    auto j = nlohmann::json::parse(R"({"pseudoqueries_per_dataset": 4, "index": {"backend": "flat"}, "query": {"k": 3}})");
    auto applied = config::apply_json(c, j);
    CHECK(applied.pseudoqueries_per_dataset == 4);
    CHECK(applied.backend == index::Backend::flat);
    CHECK(applied.query.k == 3);

    CHECK_THROWS_AS(config::apply_json(c, nlohmann::json::parse(R"({"bogus": 1})")), ConfigError);
    CHECK_THROWS_AS(config::apply_json(c, nlohmann::json::parse(R"({"query": {"kk": 1}})")), ConfigError);
    CHECK_THROWS_AS(config::apply_json(c, nlohmann::json::parse(R"({"seed": "x"})")), ConfigError);
    c.pseudoqueries_per_dataset = 0;
    CHECK_THROWS_AS(config::validate(c), ConfigError);

    auto dumped = config::to_json(config::PipelineConfig{});
    CHECK_FALSE(dumped["provider"].contains("api_key"));
    CHECK_NOTHROW(config::apply_json(config::PipelineConfig{}, dumped));
}

TEST_CASE("help and usage errors") {
    auto help = run({"--help"});
    CHECK(help.code == 0);
    for (const char* word : {"profile", "index", "query", "eval"}) CHECK(help.out.find(word) != std::string::npos);
    auto sub = run({"index", "--help"});
    for (const char* flag : {"--backend", "--M", "--ef-construction", "--ef-search", "--pseudoqueries",
                             "--dimension", "--allow-partial", "--mode", "--concurrency"}) {
        CHECK(sub.out.find(flag) != std::string::npos);
    }
    CHECK(run({}).code == 1);
    CHECK(run({"index"}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
}

TEST_CASE("profile, index, query and eval") {
    TempDir dir;
    auto corpus = dir / "corpus";
    auto planted = testsupport::write_planted_corpus(corpus, 3, 21);
    write_file(corpus / "broken.csv", std::string("\x00\xff\x00", 3));

    auto profile = run({"profile", "--corpus", corpus.string(), "--json", (dir / "p.jsonl").string()});
    CHECK(profile.code == 0);
    CHECK(profile.out.find("Data is of type integer") != std::string::npos);
    auto jsonl = testsupport::read_file(dir / "p.jsonl");
    CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 9);

    auto idx = (dir / "out/index.bin").string();
    auto built = run({"index", "--corpus", corpus.string(), "--out", idx, "--report", (dir / "r.json").string()});
    REQUIRE(built.code == 0);
    CHECK(built.out.find("records: 30") != std::string::npos);
    CHECK(built.out.find("SKIPPED") != std::string::npos);
    auto report = nlohmann::json::parse(testsupport::read_file(dir / "r.json"));
    CHECK(report["datasets"].size() == 3);
    CHECK(report["skipped_files"].size() == 1);
    CHECK(report["embedding_calls"].get<int>() > 0);

    auto warm = run({"index", "--corpus", corpus.string(), "--out", idx, "--report", (dir / "r2.json").string()});
    REQUIRE(warm.code == 0);
    auto warm_report = nlohmann::json::parse(testsupport::read_file(dir / "r2.json"));
    CHECK(warm_report["embedding_calls"].get<int>() == 0);
    CHECK(warm_report["sha256"] == report["sha256"]);

    auto q = run({"query", "--index", idx, planted[1].token});
    CHECK(q.code == 0);
    CHECK(q.out.find("   1  " + planted[1].id) != std::string::npos);

    auto plain1 = run({"query", "--index", idx, "--no-query-opt", "--no-rerank", planted[0].token});
    auto plain2 = run({"query", "--index", idx, "--no-query-opt", "--no-rerank", planted[0].token});
    CHECK(plain1.out == plain2.out);

    auto trec = run({"query", "--index", idx, "--trec", "--k", "1", "--pool", "1", "--query-id", "x", planted[2].token});
    CHECK(trec.out == "x Q0 " + planted[2].id + " 1 1 tabsearch\n");

    auto missing = run({"query", "--index", (dir / "nope.bin").string(), "anything"});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("does not exist") != std::string::npos);

    std::string queries, qrels;
    for (std::size_t i = 0; i < planted.size(); ++i) {
        queries += fmt::format("p{}\t{}\n", i, planted[i].token);
        qrels += fmt::format("p{} 0 {} 1\n", i, planted[i].id);
    }
    write_file(dir / "queries.tsv", queries);
    write_file(dir / "qrels.txt", qrels);
    auto ev = run({"eval", "--index", idx, "--queries", (dir / "queries.tsv").string(), "--qrels",
                   (dir / "qrels.txt").string(), "--ablate-query-opt", "--bootstrap", "--resamples", "200",
                   "--run-out", (dir / "run.txt").string()});
    REQUIRE(ev.code == 0);
    CHECK(ev.out.find("no-query-opt") != std::string::npos);
    CHECK(ev.out.find("identical candidate pools: 3/3") != std::string::npos);
    CHECK(ev.out.find("Recall@1             1.0000         1.0000") != std::string::npos);
    CHECK(testsupport::read_file(dir / "run.txt").find("p0 Q0 " + planted[0].id + " 1 ") == 0);

    write_file(dir / "empty.tsv", "");
    auto empty = run({"eval", "--index", idx, "--queries", (dir / "empty.tsv").string(), "--qrels",
                      (dir / "qrels.txt").string()});
    CHECK(empty.code == 2);

    write_file(dir / "other.txt", "zz 0 nothing 1\n");
    auto unmatched = run({"eval", "--index", idx, "--queries", (dir / "queries.tsv").string(), "--qrels",
                          (dir / "other.txt").string()});
    CHECK(unmatched.code == 2);
    CHECK(unmatched.err.find("diagnostic") != std::string::npos);

    auto wrong_dim = run({"index", "--corpus", corpus.string(), "--out", idx, "--dimension", "3"});
    CHECK(wrong_dim.code == 1);

    write_file(dir / "bad.json", R"({"unknown_key": true})");
    CHECK(run({"--config", (dir / "bad.json").string(), "profile", "--corpus", corpus.string()}).code == 1);

    auto remote = run({"index", "--corpus", corpus.string(), "--out", (dir / "r.bin").string(), "--mode", "remote"});
    CHECK(remote.code == 1);
}
