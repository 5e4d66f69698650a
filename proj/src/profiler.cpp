#include "tabsearch/profiler.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tabsearch/error.hpp"
#include "tabsearch/text_util.hpp"

namespace tabsearch::profiler {

namespace {

constexpr std::size_t kExemplarCount = 5;
constexpr std::size_t kExemplarMaxBytes = 64;
constexpr std::size_t kCategoricalMinUnique = 20;

std::string clip_utf8(std::string_view s, std::size_t max_bytes) {
    if (s.size() <= max_bytes) return std::string(s);
    std::size_t cut = max_bytes;
    while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
    return std::string(s.substr(0, cut)) + "...";
}

}  // namespace

std::string_view to_string(DataType type) {
    switch (type) {
        case DataType::integer: return "integer";
        case DataType::real: return "real";
        case DataType::boolean: return "boolean";
        case DataType::datetime: return "datetime";
        case DataType::categorical: return "categorical";
        case DataType::text: return "text";
    }
    return "text";
}

std::optional<DataType> data_type_from_string(std::string_view name) {
    for (auto t : {DataType::integer, DataType::real, DataType::boolean, DataType::datetime,
                   DataType::categorical, DataType::text}) {
        if (to_string(t) == name) return t;
    }
    return std::nullopt;
}

namespace {

struct Votes {
    std::size_t integer = 0, real = 0, boolean = 0, datetime = 0, text = 0;
    std::size_t total() const { return integer + real + boolean + datetime + text; }
};

DataType vote_winner(const Votes& v) {
    // Candidates in precedence order; strict > keeps the earlier one on ties.
    std::size_t numeric = v.integer + v.real;
    DataType best = v.real > 0 ? DataType::real : DataType::integer;
    std::size_t best_count = numeric;
    if (v.boolean > best_count) best = DataType::boolean, best_count = v.boolean;
    if (v.datetime > best_count) best = DataType::datetime, best_count = v.datetime;
    if (v.text > best_count) best = DataType::text, best_count = v.text;
    return best;
}

}  // namespace

TypeDetection detect_type(const corpus::Column& column, const corpus::ParseOptions& options) {
    Votes votes;
    std::unordered_set<std::string_view> distinct;
    for (const auto& cell : column.raw_values) {
        if (!cell) continue;
        auto value = corpus::parse_cell(*cell, options);
        switch (corpus::kind_of(value)) {
            case corpus::CellKind::missing: continue;
            case corpus::CellKind::integer: ++votes.integer; break;
            case corpus::CellKind::real: ++votes.real; break;
            case corpus::CellKind::boolean: ++votes.boolean; break;
            case corpus::CellKind::datetime: ++votes.datetime; break;
            case corpus::CellKind::text: ++votes.text; break;
        }
        distinct.insert(text::trim(*cell));
    }
    if (votes.total() == 0) return {DataType::text, true};
    auto type = vote_winner(votes);
    if (type == DataType::text) {
        auto threshold = std::max<std::size_t>(kCategoricalMinUnique, column.raw_values.size() / 20);
        if (distinct.size() <= threshold) type = DataType::categorical;
    }
    return {type, false};
}

double exact_sum(std::span<const double> values) {
    // Shewchuk's non-overlapping partials with a final correctly rounded fold.
    std::vector<double> partials;
    for (double x : values) {
        std::size_t i = 0;
        for (double y : partials) {
            if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
            double hi = x + y;
            double lo = y - (hi - x);
            if (lo != 0.0) partials[i++] = lo;
            x = hi;
        }
        partials.resize(i);
        partials.push_back(x);
    }
    if (partials.empty()) return 0.0;
    auto n = partials.size();
    double hi = partials[--n];
    double lo = 0.0;
    while (n > 0) {
        double x = hi;
        double y = partials[--n];
        hi = x + y;
        double yr = hi - x;
        lo = y - yr;
        if (lo != 0.0) break;
    }
    // Half-way case: the discarded tail decides the rounding direction.
    if (n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0))) {
        double y = lo * 2.0;
        double x = hi + y;
        double yr = x - hi;
        if (y == yr) hi = x;
    }
    return hi;
}

Coverage compute_coverage(std::span<const double> values) {
    if (values.empty()) throw NoNumericValues("coverage of an empty value set");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    const auto rank = (99 * n + 99) / 100;  // ceil(0.99 n), 1-based
    return {sorted.front(), sorted[rank - 1]};
}

ColumnProfile profile_column(const corpus::Column& column, const corpus::ParseOptions& options) {
    ColumnProfile profile;
    profile.name = column.name;
    auto detection = detect_type(column, options);
    profile.type = detection.type;
    profile.degenerate = detection.degenerate;

    const auto rows = column.raw_values.size();
    std::unordered_map<std::string_view, std::size_t> frequency;
    std::vector<double> numbers;
    const bool numeric = is_numeric(profile.type) && !profile.degenerate;
    if (numeric) numbers.reserve(rows);

    for (const auto& cell : column.raw_values) {
        if (!cell) {
            ++profile.missing.count;
            continue;
        }
        auto value = corpus::parse_cell(*cell, options);
        if (std::holds_alternative<corpus::Missing>(value)) {
            ++profile.missing.count;
            continue;
        }
        ++frequency[text::trim(*cell)];
        if (!numeric) continue;
        if (auto i = std::get_if<std::int64_t>(&value)) {
            numbers.push_back(static_cast<double>(*i));
        } else if (auto r = std::get_if<double>(&value)) {
            numbers.push_back(*r);
        }
    }
    profile.missing.fraction = rows ? static_cast<double>(profile.missing.count) / static_cast<double>(rows) : 0.0;
    profile.unique_count = frequency.size();

    std::vector<std::pair<std::string_view, std::size_t>> ranked(frequency.begin(), frequency.end());
    auto top = std::min(kExemplarCount, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(top), ranked.end(),
                      [](const auto& a, const auto& b) {
                          return a.second != b.second ? a.second > b.second : a.first < b.first;
                      });
    for (std::size_t i = 0; i < top; ++i) profile.exemplar_values.push_back(clip_utf8(ranked[i].first, kExemplarMaxBytes));

    if (numeric) {
        if (numbers.empty()) {
            profile.degenerate = true;
        } else {
            std::sort(numbers.begin(), numbers.end());
            const auto n = numbers.size();
            NumericStats stats;
            stats.min = numbers.front();
            stats.max = numbers.back();
            stats.mean = exact_sum(numbers) / static_cast<double>(n);
            stats.median = n % 2 ? numbers[n / 2] : (numbers[n / 2 - 1] + numbers[n / 2]) / 2.0;
            profile.numeric = stats;
            profile.coverage = compute_coverage(numbers);
        }
    }
    return profile;
}

DatasetProfile profile_dataset(const corpus::DatasetTable& table, const corpus::ParseOptions& options) {
    if (table.columns.empty()) throw EmptyTable("table '" + table.id + "' has no columns");
    DatasetProfile profile;
    profile.dataset_id = table.id;
    profile.row_count = table.row_count;
    profile.column_profiles.reserve(table.columns.size());
    for (const auto& column : table.columns) profile.column_profiles.push_back(profile_column(column, options));
    profile.rendered_text = render_profile(profile);
    return profile;
}

std::string format_number(double value, bool integral) {
    if (integral && std::isfinite(value) && value == std::trunc(value) && std::fabs(value) < 9.2e18) {
        return fmt::format("{}", static_cast<std::int64_t>(value));
    }
    auto s = fmt::format("{}", value);
    if (std::isfinite(value) && s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
}

std::string render_column(const ColumnProfile& c) {
    std::string out = fmt::format("**{}**: Data is of type {}. There are {} unique values.", c.name,
                                  to_string(c.type), c.unique_count);
    if (c.missing.count > 0) {
        out += fmt::format(" Missing: {} ({:.2f}%).", c.missing.count, c.missing.fraction * 100.0);
    }
    if (c.numeric) {
        const bool integral = c.type == DataType::integer;
        out += fmt::format(" This column is numeric. Mean: {}, Max: {}, Min: {}.", format_number(c.numeric->mean, false),
                           format_number(c.numeric->max, integral), format_number(c.numeric->min, integral));
        if (c.coverage) {
            out += fmt::format(" Coverage spans from {} to {}.", format_number(c.coverage->low, integral),
                               format_number(c.coverage->high, false));
        }
    } else if (!c.exemplar_values.empty()) {
        out += fmt::format(" Top values: {}.", fmt::join(c.exemplar_values, ", "));
    }
    return out;
}

std::string render_profile(const DatasetProfile& profile) {
    std::string out;
    for (const auto& c : profile.column_profiles) {
        if (!out.empty()) out.push_back('\n');
        out += render_column(c);
    }
    return out;
}

nlohmann::json to_json(const ColumnProfile& c) {
    nlohmann::json j;
    j["name"] = c.name;
    j["type"] = std::string(to_string(c.type));
    j["unique_count"] = c.unique_count;
    j["missing_count"] = c.missing.count;
    j["missing_fraction"] = c.missing.fraction;
    j["coverage"] = c.coverage ? nlohmann::json{{"low", c.coverage->low}, {"high", c.coverage->high}} : nlohmann::json();
    j["numeric"] = c.numeric ? nlohmann::json{{"min", c.numeric->min},
                                              {"max", c.numeric->max},
                                              {"mean", c.numeric->mean},
                                              {"median", c.numeric->median}}
                             : nlohmann::json();
    j["top_values"] = c.exemplar_values;
    j["degenerate"] = c.degenerate;
    return j;
}

ColumnProfile column_from_json(const nlohmann::json& j) {
    ColumnProfile c;
    c.name = j.at("name").get<std::string>();
    auto type = data_type_from_string(j.at("type").get<std::string>());
    if (!type) throw InvalidInput("unknown column type in profile record");
    c.type = *type;
    c.unique_count = j.at("unique_count").get<std::size_t>();
    c.missing.count = j.at("missing_count").get<std::size_t>();
    c.missing.fraction = j.at("missing_fraction").get<double>();
    if (const auto& cov = j.at("coverage"); !cov.is_null()) {
        c.coverage = Coverage{cov.at("low").get<double>(), cov.at("high").get<double>()};
    }
    if (const auto& num = j.at("numeric"); !num.is_null()) {
        c.numeric = NumericStats{num.at("min").get<double>(), num.at("max").get<double>(),
                                 num.at("mean").get<double>(), num.at("median").get<double>()};
    }
    c.exemplar_values = j.at("top_values").get<std::vector<std::string>>();
    c.degenerate = j.at("degenerate").get<bool>();
    return c;
}

nlohmann::json to_json(const DatasetProfile& p) {
    nlohmann::json columns = nlohmann::json::array();
    for (const auto& c : p.column_profiles) columns.push_back(to_json(c));
    return {{"dataset_id", p.dataset_id}, {"row_count", p.row_count}, {"columns", std::move(columns)},
            {"rendered_text", p.rendered_text}};
}

DatasetProfile profile_from_json(const nlohmann::json& j) {
    DatasetProfile p;
    p.dataset_id = j.at("dataset_id").get<std::string>();
    p.row_count = j.at("row_count").get<std::size_t>();
    for (const auto& c : j.at("columns")) p.column_profiles.push_back(column_from_json(c));
    p.rendered_text = j.contains("rendered_text") ? j.at("rendered_text").get<std::string>() : render_profile(p);
    return p;
}

}  // namespace tabsearch::profiler
