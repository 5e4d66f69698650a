#include <doctest.h>

#include <ctime>
#include <sstream>

#include "support.hpp"
#include "tabsearch/corpus.hpp"
#include "tabsearch/error.hpp"

using namespace tabsearch;
using namespace tabsearch::corpus;
using testsupport::TempDir;
using testsupport::write_file;

namespace {

std::int64_t utc(int y, int mo, int d, int h = 0, int mi = 0, int s = 0) {
    std::tm tm{};
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = s;
    return static_cast<std::int64_t>(timegm(&tm));
}

}  // namespace

TEST_CASE("parse_cell tags") {
    CHECK(std::get<std::int64_t>(parse_cell("42")) == 42);
    CHECK(std::get<std::int64_t>(parse_cell(" -7 ")) == -7);
    CHECK(std::get<double>(parse_cell("1.5")) == 1.5);
    CHECK(std::get<double>(parse_cell("2e3")) == 2000.0);
    CHECK(std::get<bool>(parse_cell("TRUE")));
    CHECK_FALSE(std::get<bool>(parse_cell("false")));
    CHECK(kind_of(parse_cell("hello")) == CellKind::text);
    CHECK(kind_of(parse_cell("inf")) == CellKind::text);
    CHECK(kind_of(parse_cell("99999999999999999999")) == CellKind::real);
    for (const char* m : {"", "NA", "n/a", "NaN", "NULL", "None", "  "}) {
        CHECK(kind_of(parse_cell(m)) == CellKind::missing);
    }
    ParseOptions custom{{"-"}};
    CHECK(kind_of(parse_cell("-", custom)) == CellKind::missing);
    CHECK(kind_of(parse_cell("NA", custom)) == CellKind::text);
}

TEST_CASE("datetime layouts against timegm") {
    struct Case {
        const char* text;
        std::int64_t expected;
    };
    const Case cases[] = {
        {"2021-05-01", utc(2021, 5, 1)},
        {"2021-05-01T13:45", utc(2021, 5, 1, 13, 45)},
        {"2021-05-01T13:45:30", utc(2021, 5, 1, 13, 45, 30)},
        {"2021-05-01T13:45:30.250", utc(2021, 5, 1, 13, 45, 30)},
        {"2021-05-01T13:45:30Z", utc(2021, 5, 1, 13, 45, 30)},
        {"2021-05-01T13:45:30+02:00", utc(2021, 5, 1, 11, 45, 30)},
        {"2021-05-01 08:00", utc(2021, 5, 1, 8)},
        {"2021-05-01 08:00:05", utc(2021, 5, 1, 8, 0, 5)},
        {"2021-05", utc(2021, 5, 1)},
        {"2021/05/01", utc(2021, 5, 1)},
        {"2021/05/01 23:59:59", utc(2021, 5, 1, 23, 59, 59)},
        {"2021.05.01", utc(2021, 5, 1)},
        {"05/01/2021", utc(2021, 5, 1)},
        {"05/01/2021 10:30", utc(2021, 5, 1, 10, 30)},
        {"05/01/2021 07:15 PM", utc(2021, 5, 1, 19, 15)},
        {"25/12/2020", utc(2020, 12, 25)},
        {"25.12.2020", utc(2020, 12, 25)},
        {"25-12-2020", utc(2020, 12, 25)},
        {"1 Mar 2000", utc(2000, 3, 1)},
        {"Feb 29, 2024", utc(2024, 2, 29)},
    };
    for (const auto& c : cases) {
        CAPTURE(c.text);
        auto v = parse_cell(c.text);
        REQUIRE(kind_of(v) == CellKind::datetime);
        CHECK(std::get<DateTime>(v).epoch_seconds == c.expected);
    }
    CHECK(std::get<DateTime>(parse_cell("2021-05-01T13:45:30.250")).fraction == doctest::Approx(0.25));
    CHECK(kind_of(parse_cell("2021-02-30")) == CellKind::text);
    CHECK(kind_of(parse_cell("Feb 29, 2023")) == CellKind::text);
}

TEST_CASE("delimiter sniffing and records") {
    CHECK(sniff_delimiter("a,b,c\n1,2,3\n") == ',');
    CHECK(sniff_delimiter("a\tb\n1\t2\n") == '\t');
    CHECK(sniff_delimiter("a;b;c\n1,5;2;3\n") == ';');
    auto records = split_records("a,\"b,c\"\r\n1,\"x\"\"y\"\n\n2,\"multi\nline\"\n", ',');
    REQUIRE(records.size() == 3);
    CHECK(records[0][1] == "b,c");
    CHECK(records[1][1] == "x\"y");
    CHECK(records[2][1] == "multi\nline");
}

TEST_CASE("parse_table sanitizes headers and pads ragged rows") {
    auto t = parse_table("\xEF\xBB\xBFname,,name, x \n1,2,3,4\n5\n6,7,8,9,10\n", "id", "n", "p");
    REQUIRE(t.columns.size() == 4);
    CHECK(t.columns[0].name == "name");
    CHECK(t.columns[1].name == "column_2");
    CHECK(t.columns[2].name == "name_2");
    CHECK(t.columns[3].name == "x");
    CHECK(t.row_count == 3);
    CHECK(t.ragged_rows == 2);
    for (const auto& c : t.columns) CHECK(c.raw_values.size() == t.row_count);
    CHECK_FALSE(t.columns[1].raw_values[1].has_value());
    CHECK(t.columns[0].raw_values[2] == "6");

    CHECK_THROWS_AS(parse_table(std::string("a,b\n\0\x01", 6), "id", "n", "p"), InvalidInput);
    CHECK_THROWS_AS(parse_table("", "id", "n", "p"), InvalidInput);
}

TEST_CASE("load_collection: ids, diagnostics, order independence") {
    TempDir dir;
    write_file(dir / "b.csv", "x,y\n1,2\n");
    write_file(dir / "a.csv", "x,y\n3,4\n");
    write_file(dir / "sub/c.tsv", "p\tq\n5\t6\n");
    auto c = load_collection(dir.path());
    REQUIRE(c.size() == 3);
    CHECK(c.tables[0].id == "a.csv");
    CHECK(c.tables[1].id == "b.csv");
    CHECK(c.tables[2].id == "sub/c.tsv");
    CHECK(c.tables[2].columns[1].name == "q");
    CHECK(c.find("b.csv")->name == "b");
    CHECK(c.diagnostics.empty());

    write_file(dir / "blob.bin", std::string("\x00\x01\x02\xff", 4));
    auto with_binary = load_collection(dir.path());
    CHECK(with_binary.size() == 3);
    CHECK(with_binary.diagnostics.size() == 1);

    TempDir empty;
    CHECK_THROWS_AS(load_collection(empty.path()), EmptyCollection);
}

TEST_CASE("manifest assigns ids and names") {
    TempDir dir;
    write_file(dir / "data/one.csv", "a\n1\n");
    write_file(dir / "data/two.csv", "b\n2\n");
    write_file(dir / "manifest.tsv", "# id\tpath\tname\nds-2\tdata/two.csv\tSecond\nds-1\tdata/one.csv\n");
    auto c = load_collection(dir.path(), dir / "manifest.tsv");
    REQUIRE(c.size() == 2);
    CHECK(c.tables[0].id == "ds-1");
    CHECK(c.tables[0].name == "one");
    CHECK(c.tables[1].name == "Second");

    write_file(dir / "dup.tsv", "x\tdata/one.csv\nx\tdata/two.csv\n");
    CHECK_THROWS_AS(read_manifest(dir / "dup.tsv"), FormatError);
}

TEST_CASE("write then reload is cell-equal") {
    auto t = parse_table("name,note,v\n\"Smith, J\",\" padded \",1\nO'Neil,\"say \"\"hi\"\"\",\nx,NA,3\n", "id", "n", "p");
    std::ostringstream out;
    write_table(t, out);
    auto again = parse_table(out.str(), "id", "n", "p");
    REQUIRE(again.columns.size() == t.columns.size());
    for (std::size_t j = 0; j < t.columns.size(); ++j) CHECK(again.columns[j] == t.columns[j]);

    auto single = parse_table("only\n1\n\n", "id", "n", "p");
    single.columns[0].raw_values.push_back(std::nullopt);
    single.row_count = 2;
    std::ostringstream s;
    write_table(single, s);
    auto single_again = parse_table(s.str(), "id", "n", "p");
    CHECK(single_again.row_count == 2);
    CHECK(single_again.columns[0] == single.columns[0]);
}
