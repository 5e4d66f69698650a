#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tabsearch::corpus {

struct Missing {
    bool operator==(const Missing&) const = default;
};

/// Calendar timestamp normalized to UTC seconds since the Unix epoch.
struct DateTime {
    std::int64_t epoch_seconds = 0;
    double fraction = 0.0;
    bool operator==(const DateTime&) const = default;
};

using CellValue = std::variant<Missing, std::int64_t, double, bool, DateTime, std::string>;

enum class CellKind { missing, integer, real, boolean, datetime, text };

CellKind kind_of(const CellValue& value);
std::string_view to_string(CellKind kind);

std::vector<std::string> default_missing_tokens();

struct ParseOptions {
    std::vector<std::string> missing_tokens = default_missing_tokens();
};

/// Tags one cell. Total: anything not recognised as a more specific kind is text.
/// Missing tokens are matched case-insensitively after trimming whitespace.
CellValue parse_cell(std::string_view text, const ParseOptions& options = {});

bool is_missing_token(std::string_view text, const ParseOptions& options);

/// Datetime layouts recognised by parse_cell, in the order they are tried.
const std::vector<std::string_view>& datetime_formats();

std::optional<DateTime> parse_datetime(std::string_view text);

struct Column {
    std::string name;
    std::vector<std::optional<std::string>> raw_values;  // nullopt = missing

    bool operator==(const Column&) const = default;
};

struct DatasetTable {
    std::string id;
    std::string name;
    std::vector<Column> columns;
    std::size_t row_count = 0;
    std::string source_path;
    char delimiter = ',';
    std::size_t ragged_rows = 0;  // rows padded or truncated to header width

    const Column* find_column(std::string_view column_name) const;
};

struct Diagnostic {
    std::string path;
    std::string message;
};

struct Collection {
    std::vector<DatasetTable> tables;  // sorted by id
    std::vector<Diagnostic> diagnostics;

    const DatasetTable* find(std::string_view id) const;
    std::size_t size() const noexcept { return tables.size(); }
};

struct LoadOptions {
    ParseOptions parse;
    std::size_t sniff_lines = 50;
    std::size_t threads = 0;  // 0 = hardware concurrency
};

struct ManifestEntry {
    std::string id;
    std::string relative_path;
    std::string display_name;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Picks comma, tab or semicolon by field-count consistency over the first lines.
char sniff_delimiter(std::string_view text, std::size_t max_lines = 50);

/// Splits delimiter-separated text into records, honouring double quotes.
std::vector<std::vector<std::string>> split_records(std::string_view text, char delimiter);

/// Parses one file's contents. Throws InvalidInput for binary data or a missing header.
DatasetTable parse_table(std::string_view contents, std::string id, std::string name,
                         std::string source_path, const LoadOptions& options = {});

DatasetTable load_table(const std::filesystem::path& file, std::string id, std::string name,
                        const LoadOptions& options = {});

/// Loads every delimiter-separated file below root. Unreadable files become
/// diagnostics. Throws EmptyCollection when the directory holds no files.
Collection load_collection(const std::filesystem::path& root,
                           const std::optional<std::filesystem::path>& manifest = std::nullopt,
                           const LoadOptions& options = {});

void write_table(const DatasetTable& table, std::ostream& out, char delimiter = ',');

}  // namespace tabsearch::corpus
