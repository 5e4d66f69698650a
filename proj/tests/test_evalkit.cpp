#include <doctest.h>

#include <random>
#include <sstream>

#include "support.hpp"
#include "tabsearch/error.hpp"
#include "tabsearch/evalkit.hpp"

using namespace tabsearch;
using namespace tabsearch::eval;

namespace {

std::vector<std::string> ranks(std::initializer_list<const char*> ids) { return {ids.begin(), ids.end()}; }

}  // namespace

TEST_CASE("recall examples") {
    CHECK(*recall_at_k(ranks({"d1", "x"}), {"d1"}, 10) == 1.0);
    CHECK(*recall_at_k(ranks({"d1", "a", "d3", "b"}), {"d1", "d2", "d3", "d4"}, 10) == 0.5);
    std::vector<std::string> long_list;
    for (int i = 0; i < 10; ++i) long_list.push_back("n" + std::to_string(i));
    long_list.push_back("d1");
    CHECK(*recall_at_k(long_list, {"d1"}, 10) == 0.0);
    CHECK_FALSE(recall_at_k(long_list, {}, 10));
    CHECK_THROWS_AS(recall_at_k(long_list, {"d1"}, 0), InvalidInput);
}

TEST_CASE("average precision examples") {
    CHECK(*average_precision(ranks({"a", "b"}), {"a", "b"}) == 1.0);
    CHECK(*average_precision(ranks({"d1", "d2"}), {"d2"}) == 0.5);
    auto ap = average_precision(ranks({"r1", "x", "r2", "y", "r3", "z", "u", "v", "w", "t"}), {"r1", "r2", "r3"});
    CHECK(*ap == doctest::Approx(0.7556).epsilon(1e-4));
    CHECK(*ap == doctest::Approx((1.0 + 2.0 / 3.0 + 3.0 / 5.0) / 3.0));
}

TEST_CASE("ndcg examples") {
    std::map<std::string, int> grades{{"d_low", 0}, {"d_high", 2}};
    CHECK(*ndcg_at_k(ranks({"d_low", "d_high"}), grades, 2) == doctest::Approx(0.6309).epsilon(1e-4));
    CHECK(*ndcg_at_k(ranks({"d_high", "d_low"}), grades, 2) == 1.0);
    std::map<std::string, int> g3{{"a", 3}, {"b", 2}, {"c", 1}};
    CHECK(*ndcg_at_k(ranks({"a", "b", "c"}), g3, 10) == 1.0);
    CHECK(*ndcg_at_k(ranks({"x", "a"}), {{"a", 1}}, 1) == 0.0);
    CHECK_FALSE(ndcg_at_k(ranks({"a"}), {{"a", 0}}, 10));
}

TEST_CASE("metrics agree with naive implementations") {
    std::mt19937_64 rng(5);
    for (int instance = 0; instance < 300; ++instance) {
        const auto pool = 5 + rng() % 30;
        std::vector<std::string> ranking;
        for (std::size_t i = 0; i < pool; ++i) ranking.push_back("d" + std::to_string(i));
        std::shuffle(ranking.begin(), ranking.end(), rng);
        ranking.resize(1 + rng() % pool);
        std::map<std::string, int> grades;
        for (std::size_t i = 0; i < pool; ++i) {
            if (rng() % 3 == 0) grades["d" + std::to_string(i)] = static_cast<int>(rng() % 4);
        }
        auto relevant = relevant_set(grades);
        if (relevant.empty()) continue;
        const auto k = 1 + rng() % 15;
        CHECK(*recall_at_k(ranking, relevant, k) == doctest::Approx(testsupport::naive_recall(ranking, relevant, k)).epsilon(1e-12));
        CHECK(*precision_at_k(ranking, relevant, k) == doctest::Approx(testsupport::naive_precision(ranking, relevant, k)).epsilon(1e-12));
        CHECK(*average_precision(ranking, relevant) == doctest::Approx(testsupport::naive_ap(ranking, relevant)).epsilon(1e-12));
        CHECK(*ndcg_at_k(ranking, grades, k) == doctest::Approx(testsupport::naive_ndcg(ranking, grades, k)).epsilon(1e-12));
    }
}

TEST_CASE("recall is monotone in k") {
    auto r = ranks({"a", "x", "b", "y", "c"});
    std::set<std::string> rel{"a", "b", "c", "z"};
    double last = 0;
    for (std::size_t k = 1; k <= 6; ++k) {
        double v = *recall_at_k(r, rel, k);
        CHECK(v >= last);
        last = v;
    }
}

TEST_CASE("trec file formats") {
    std::istringstream q("q1 0 ds42 2\nq1 0 ds7 0\n\nq2 0 a 1\n");
    auto qrels = read_qrels(q);
    CHECK(qrels["q1"]["ds42"] == 2);
    CHECK(qrels["q1"]["ds7"] == 0);

    std::istringstream bad("q1 0 ds42\n");
    CHECK_THROWS_AS(read_qrels(bad), FormatError);
    std::istringstream dup("q1 0 a 1\nq1 0 a 2\n");
    try {
        read_qrels(dup);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.line() == 2);
    }

    Run run{{"q1", {{"b", 3.0}, {"a", 2.5}, {"c", 1.0}}}, {"q2", {{"z", 1.0}}}};
    std::ostringstream out;
    write_run(out, run, "tag");
    CHECK(out.str().rfind("q1 Q0 b 1 3 tag\n", 0) == 0);
    std::istringstream in(out.str());
    auto back = read_run(in);
    REQUIRE(back["q1"].size() == 3);
    CHECK(back["q1"][0].dataset_id == "b");
    CHECK(back["q1"][2].dataset_id == "c");
    CHECK(back["q1"][1].score == 2.5);

    std::istringstream shuffled("q1 Q0 c 3 1 t\nq1 Q0 a 1 3 t\nq1 Q0 b 2 2 t\n");
    auto sorted = read_run(shuffled);
    CHECK(sorted["q1"][0].dataset_id == "a");

    std::istringstream dup_run("q1 Q0 a 1 1 t\nq1 Q0 b 2 1 t\nq1 Q0 a 3 1 t\n");
    try {
        read_run(dup_run);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("evaluate skips unscorable queries with diagnostics") {
    Qrels qrels{{"q1", {{"a", 1}}}, {"q2", {{"b", 0}}}, {"q3", {{"c", 2}}}};
    Run run{{"q1", {{"a", 1}}}, {"q2", {{"b", 1}}}, {"q9", {{"x", 1}}}};
    auto report = evaluate(run, qrels);
    CHECK(report.evaluated == 2);
    CHECK(report.per_query.count("q2") == 0);
    CHECK(report.diagnostics.size() == 3);
    CHECK(report.means.at("MAP") == 0.5);
    CHECK(report.means.at("Recall@1") == 0.5);
    CHECK(report.means.at("P@10") == doctest::Approx(0.05));
}

TEST_CASE("bootstrap") {
    std::vector<double> constant(10, 0.5);
    auto ci = bootstrap_ci(constant);
    CHECK(ci.low == 0.5);
    CHECK(ci.high == 0.5);
    CHECK(ci.mean == 0.5);

    std::vector<double> varied{0.1, 0.9, 0.4, 0.3, 0.8, 0.2};
    auto a = bootstrap_ci(varied, 0.95, 2000, 7), b = bootstrap_ci(varied, 0.95, 2000, 7);
    CHECK(a.low == b.low);
    CHECK(a.high == b.high);
    CHECK(a.low <= a.mean);
    CHECK(a.mean <= a.high);

    CHECK_THROWS_AS(bootstrap_ci(std::vector<double>{1.0}), InsufficientData);

    std::mt19937_64 rng(17);
    int covered = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> draws(100);
        for (auto& d : draws) d = static_cast<double>(rng() % 2);
        auto c = bootstrap_ci(draws, 0.95, 1000, 1000 + trial);
        covered += c.low <= 0.5 && 0.5 <= c.high;
    }
    CHECK(covered >= 90);
}
