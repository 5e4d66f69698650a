#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tabsearch/corpus.hpp"

namespace tabsearch::profiler {

enum class DataType { integer, real, boolean, datetime, categorical, text };

std::string_view to_string(DataType type);
std::optional<DataType> data_type_from_string(std::string_view name);

struct MissingInfo {
    std::size_t count = 0;
    double fraction = 0.0;
};

struct Coverage {
    double low = 0.0;
    double high = 0.0;
};

struct NumericStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double median = 0.0;
};

struct ColumnProfile {
    std::string name;
    DataType type = DataType::text;
    std::size_t unique_count = 0;
    MissingInfo missing;
    std::optional<Coverage> coverage;  // present iff numeric
    std::optional<NumericStats> numeric;
    std::vector<std::string> exemplar_values;  // most frequent first, ties lexicographic
    bool degenerate = false;                   // no usable values
};

struct DatasetProfile {
    std::string dataset_id;
    std::size_t row_count = 0;
    std::vector<ColumnProfile> column_profiles;
    std::string rendered_text;
};

inline bool is_numeric(DataType t) { return t == DataType::integer || t == DataType::real; }

struct TypeDetection {
    DataType type = DataType::text;
    bool degenerate = false;
};

/// Majority vote over the parse tags of non-missing cells. Integer and real
/// votes pool into one numeric bucket; the bucket is real if any real cell voted.
TypeDetection detect_type(const corpus::Column& column, const corpus::ParseOptions& options = {});

ColumnProfile profile_column(const corpus::Column& column, const corpus::ParseOptions& options = {});

/// [minimum, 99th percentile by nearest rank]. Throws NoNumericValues on empty input.
Coverage compute_coverage(std::span<const double> values);

/// Correctly rounded floating-point sum, independent of summation order.
double exact_sum(std::span<const double> values);

/// Throws EmptyTable for a table without columns.
DatasetProfile profile_dataset(const corpus::DatasetTable& table, const corpus::ParseOptions& options = {});

std::string render_column(const ColumnProfile& column);
std::string render_profile(const DatasetProfile& profile);

/// Shortest round-trip decimal text; integral values of integer columns drop the fraction.
std::string format_number(double value, bool integral);

nlohmann::json to_json(const ColumnProfile& column);
ColumnProfile column_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DatasetProfile& profile);
DatasetProfile profile_from_json(const nlohmann::json& j);

}  // namespace tabsearch::profiler
