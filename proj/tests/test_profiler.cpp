#include <doctest.h>

#include <nlohmann/json.hpp>

#include "tabsearch/corpus.hpp"
#include "tabsearch/error.hpp"
#include "tabsearch/profiler.hpp"

using namespace tabsearch;
using namespace tabsearch::profiler;

namespace {

corpus::Column column_of(std::string name, std::vector<std::string> cells) {
    corpus::Column c{std::move(name), {}};
    for (auto& s : cells) {
        if (corpus::is_missing_token(s, {})) {
            c.raw_values.emplace_back(std::nullopt);
        } else {
            c.raw_values.emplace_back(std::move(s));
        }
    }
    return c;
}

// 768 integers: 0, 64..197 and 199 once each, then 47 x 118 and 585 x 119.
// 136 distinct values, sum 92847, mean 92847 / 768 = 120.89453125.
corpus::Column glucose_like() {
    std::vector<std::string> cells{"0", "199"};
    for (int v = 64; v <= 197; ++v) cells.push_back(std::to_string(v));
    cells.insert(cells.end(), 47, "118");
    cells.insert(cells.end(), 585, "119");
    return column_of("Glucose", cells);
}

}  // namespace

TEST_CASE("detect_type") {
    CHECK(detect_type(column_of("c", {"1", "2", "3"})).type == DataType::integer);
    CHECK(detect_type(column_of("c", {"1.5", "2", "x"})).type == DataType::real);
    CHECK(detect_type(column_of("c", {"true", "false", "1"})).type == DataType::boolean);
    CHECK(detect_type(column_of("c", {"2020-01-01", "2020-01-02", "x"})).type == DataType::datetime);
    CHECK(detect_type(column_of("c", {"a", "b", "a"})).type == DataType::categorical);
    auto all_missing = detect_type(column_of("c", {"", "NA"}));
    CHECK(all_missing.type == DataType::text);
    CHECK(all_missing.degenerate);

    std::vector<std::string> words;
    for (int i = 0; i < 30; ++i) words.push_back("w" + std::to_string(i));
    CHECK(detect_type(column_of("c", words)).type == DataType::text);
    CHECK(detect_type(glucose_like()).type == DataType::integer);
}

TEST_CASE("profile_column numeric statistics") {
    auto constant = profile_column(column_of("c", {"5", "5", "5"}));
    CHECK(constant.unique_count == 1);
    REQUIRE(constant.numeric);
    CHECK(constant.numeric->min == 5);
    CHECK(constant.numeric->max == 5);
    CHECK(constant.numeric->mean == 5);
    CHECK(constant.numeric->median == 5);

    auto even = profile_column(column_of("c", {"4", "1", "3", "2"}));
    CHECK(even.numeric->mean == 2.5);
    CHECK(even.numeric->median == 2.5);

    auto with_missing = profile_column(column_of("c", {"1", "", "3", "NA"}));
    CHECK(with_missing.missing.count == 2);
    CHECK(with_missing.missing.fraction == 0.5);
    CHECK(with_missing.unique_count == 2);
}

TEST_CASE("compute_coverage") {
    std::vector<double> uniform;
    for (int i = 0; i <= 100; ++i) uniform.push_back(i);
    auto c = compute_coverage(uniform);
    CHECK(c.low == 0);
    CHECK(c.high == 99);
    std::vector<double> one{7};
    CHECK(compute_coverage(one).high == 7);
    CHECK_THROWS_AS(compute_coverage(std::vector<double>{}), NoNumericValues);
}

TEST_CASE("exact_sum is order independent") {
    std::vector<double> v{1e16, 1.0, -1e16, 1.0};
    CHECK(exact_sum(v) == 2.0);
    std::vector<double> tenths(10, 0.1);
    CHECK(exact_sum(tenths) == 1.0);
}

TEST_CASE("glucose rendering") {
    auto p = profile_column(glucose_like());
    CHECK(p.unique_count == 136);
    CHECK(p.numeric->mean == 120.89453125);
    auto text = render_column(p);
    const std::string head =
        "**Glucose**: Data is of type integer. There are 136 unique values. This column is numeric. "
        "Mean: 120.89453125, Max: 199, Min: 0. Coverage spans from 0 to ";
    CHECK(text.substr(0, head.size()) == head);
    CHECK(text.substr(text.size() - 3) == ".0.");
}

TEST_CASE("categorical rendering and missing sentence") {
    auto p = profile_column(column_of("col", {"a", "b"}));
    CHECK(render_column(p) == "**col**: Data is of type categorical. There are 2 unique values. Top values: a, b.");
    auto m = profile_column(column_of("m", {"a", "", "a", "b"}));
    CHECK(render_column(m) ==
          "**m**: Data is of type categorical. There are 2 unique values. Missing: 1 (25.00%). Top values: a, b.");
}

TEST_CASE("profile_dataset") {
    auto t = corpus::parse_table("a,b,c\n1,x,\n2,y,\n", "t", "t", "t.csv");
    auto p = profile_dataset(t);
    REQUIRE(p.column_profiles.size() == 3);
    CHECK(p.column_profiles[0].name == "a");
    CHECK(p.column_profiles[2].degenerate);
    CHECK_FALSE(p.column_profiles[2].numeric);
    CHECK(p.rendered_text == profile_dataset(t).rendered_text);
    CHECK(p.rendered_text.find("**c**: Data is of type text. There are 0 unique values.") != std::string::npos);

    corpus::DatasetTable empty;
    CHECK_THROWS_AS(profile_dataset(empty), EmptyTable);
}

TEST_CASE("json round trip re-renders identically") {
    auto t = corpus::parse_table("n,r,s\n1,0.5,x\n2,,y\n3,1.25,x\n", "t", "t", "t.csv");
    auto p = profile_dataset(t);
    auto back = profile_from_json(to_json(p));
    CHECK(back.rendered_text == p.rendered_text);
    CHECK(back.column_profiles[1].missing.count == 1);
}
