#include "tabsearch/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "tabsearch/error.hpp"
#include "tabsearch/text_util.hpp"

namespace tabsearch::corpus {

namespace fs = std::filesystem;

CellKind kind_of(const CellValue& value) {
    return static_cast<CellKind>(value.index());
}

std::string_view to_string(CellKind kind) {
    switch (kind) {
        case CellKind::missing: return "missing";
        case CellKind::integer: return "integer";
        case CellKind::real: return "real";
        case CellKind::boolean: return "boolean";
        case CellKind::datetime: return "datetime";
        case CellKind::text: return "text";
    }
    return "text";
}

std::vector<std::string> default_missing_tokens() {
    return {"", "NA", "N/A", "NaN", "null", "None"};
}

bool is_missing_token(std::string_view text, const ParseOptions& options) {
    auto t = text::trim(text);
    for (const auto& token : options.missing_tokens) {
        if (text::iequals(t, token)) return true;
    }
    return false;
}

namespace {

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::optional<std::int64_t> parse_integer(std::string_view s) {
    std::string_view digits = s;
    if (!digits.empty() && (digits.front() == '+' || digits.front() == '-')) digits.remove_prefix(1);
    if (!all_digits(digits)) return std::nullopt;
    std::int64_t value = 0;
    auto first = s.data();
    if (s.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

std::optional<double> parse_real(std::string_view s) {
    std::string_view body = s;
    if (!body.empty() && (body.front() == '+' || body.front() == '-')) body.remove_prefix(1);
    if (body.empty()) return std::nullopt;
    // from_chars would accept "inf"/"nan"; only plain decimal notation is numeric here.
    if (!(std::isdigit(static_cast<unsigned char>(body.front())) || body.front() == '.')) return std::nullopt;
    bool has_digit = std::any_of(body.begin(), body.end(), [](char c) { return c >= '0' && c <= '9'; });
    if (!has_digit) return std::nullopt;
    double value = 0.0;
    auto first = s.data();
    if (s.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

constexpr std::string_view kMonthNames[] = {"january", "february", "march",     "april",
                                            "may",     "june",     "july",      "august",
                                            "september", "october", "november", "december"};

int days_in_month(int year, int month) {
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    return month == 2 && leap ? 29 : kDays[month - 1];
}

// Days since 1970-01-01 in the proleptic Gregorian calendar.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct DateFields {
    int year = 1970, month = 1, day = 1, hour = 0, minute = 0, second = 0;
    double fraction = 0.0;
    int offset_minutes = 0;
    bool pm = false, has_meridiem = false;
};

bool read_number(std::string_view s, std::size_t& pos, std::size_t min_digits, std::size_t max_digits,
                 int& out) {
    std::size_t start = pos;
    while (pos < s.size() && pos - start < max_digits && s[pos] >= '0' && s[pos] <= '9') ++pos;
    if (pos - start < min_digits) return false;
    out = 0;
    for (std::size_t i = start; i < pos; ++i) out = out * 10 + (s[i] - '0');
    return true;
}

bool match_format(std::string_view fmt, std::string_view s, DateFields& f) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < fmt.size(); ++i) {
        if (fmt[i] != '%') {
            if (pos >= s.size() || s[pos] != fmt[i]) return false;
            ++pos;
            continue;
        }
        char spec = fmt[++i];
        switch (spec) {
            case 'Y':
                if (!read_number(s, pos, 4, 4, f.year)) return false;
                break;
            case 'm':
                if (!read_number(s, pos, 1, 2, f.month)) return false;
                break;
            case 'd':
                if (!read_number(s, pos, 1, 2, f.day)) return false;
                break;
            case 'H':
            case 'I':
                if (!read_number(s, pos, 1, 2, f.hour)) return false;
                break;
            case 'M':
                if (!read_number(s, pos, 2, 2, f.minute)) return false;
                break;
            case 'S':
                if (!read_number(s, pos, 2, 2, f.second)) return false;
                break;
            case 'f': {
                std::size_t start = pos;
                while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
                if (pos == start) return false;
                double scale = 0.1;
                f.fraction = 0.0;
                for (std::size_t k = start; k < pos; ++k, scale /= 10) f.fraction += (s[k] - '0') * scale;
                break;
            }
            case 'b': {
                std::size_t start = pos;
                while (pos < s.size() && std::isalpha(static_cast<unsigned char>(s[pos]))) ++pos;
                auto word = text::to_lower(s.substr(start, pos - start));
                f.month = 0;
                for (int mth = 0; mth < 12; ++mth) {
                    if (word == kMonthNames[mth] || (word.size() == 3 && kMonthNames[mth].substr(0, 3) == word) ||
                        (word == "sept" && mth == 8)) {
                        f.month = mth + 1;
                    }
                }
                if (f.month == 0) return false;
                break;
            }
            case 'p': {
                if (pos + 2 > s.size()) return false;
                auto word = s.substr(pos, 2);
                if (text::iequals(word, "AM")) {
                    f.pm = false;
                } else if (text::iequals(word, "PM")) {
                    f.pm = true;
                } else {
                    return false;
                }
                f.has_meridiem = true;
                pos += 2;
                break;
            }
            case 'z': {
                if (pos < s.size() && s[pos] == 'Z') {
                    ++pos;
                    f.offset_minutes = 0;
                    break;
                }
                if (pos >= s.size() || (s[pos] != '+' && s[pos] != '-')) return false;
                int sign = s[pos] == '-' ? -1 : 1;
                ++pos;
                int hh = 0, mm = 0;
                if (!read_number(s, pos, 2, 2, hh)) return false;
                if (pos < s.size() && s[pos] == ':') ++pos;
                if (!read_number(s, pos, 2, 2, mm)) return false;
                if (hh > 23 || mm > 59) return false;
                f.offset_minutes = sign * (hh * 60 + mm);
                break;
            }
            default:
                return false;
        }
    }
    return pos == s.size();
}

bool valid(DateFields& f) {
    if (f.has_meridiem) {
        if (f.hour < 1 || f.hour > 12) return false;
        f.hour = f.hour % 12 + (f.pm ? 12 : 0);
    }
    return f.month >= 1 && f.month <= 12 && f.day >= 1 && f.day <= days_in_month(f.year, f.month) &&
           f.hour <= 23 && f.minute <= 59 && f.second <= 60;
}

}  // namespace

const std::vector<std::string_view>& datetime_formats() {
    static const std::vector<std::string_view> kFormats = {
        "%Y-%m-%d",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M:%S.%f",
        "%Y-%m-%dT%H:%M:%S%z",
        "%Y-%m-%dT%H:%M:%S.%f%z",
        "%Y-%m-%d %H:%M",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M:%S.%f",
        "%Y-%m",
        "%Y/%m/%d",
        "%Y/%m/%d %H:%M:%S",
        "%Y.%m.%d",
        "%m/%d/%Y",
        "%m/%d/%Y %H:%M",
        "%m/%d/%Y %H:%M:%S",
        "%m/%d/%Y %I:%M %p",
        "%d/%m/%Y",  // reached only when the month-first reading is invalid
        "%d.%m.%Y",
        "%d-%m-%Y",
        "%d %b %Y",
        "%b %d, %Y",
        "%d-%b-%Y",
        "%b %d %Y",
    };
    return kFormats;
}

std::optional<DateTime> parse_datetime(std::string_view input) {
    auto s = text::trim(input);
    if (s.size() < 6 || s.size() > 40) return std::nullopt;
    for (auto fmt : datetime_formats()) {
        DateFields f;
        if (!match_format(fmt, s, f) || !valid(f)) continue;
        std::int64_t days = days_from_civil(f.year, static_cast<unsigned>(f.month), static_cast<unsigned>(f.day));
        std::int64_t secs = days * 86400 + f.hour * 3600 + f.minute * 60 + f.second - f.offset_minutes * 60;
        return DateTime{secs, f.fraction};
    }
    return std::nullopt;
}

CellValue parse_cell(std::string_view raw, const ParseOptions& options) {
    if (is_missing_token(raw, options)) return Missing{};
    auto s = text::trim(raw);
    if (auto i = parse_integer(s)) return *i;
    if (auto r = parse_real(s)) return *r;
    if (text::iequals(s, "true")) return true;
    if (text::iequals(s, "false")) return false;
    if (auto dt = parse_datetime(s)) return *dt;
    return std::string(s);
}

const Column* DatasetTable::find_column(std::string_view column_name) const {
    for (const auto& c : columns) {
        if (c.name == column_name) return &c;
    }
    return nullptr;
}

const DatasetTable* Collection::find(std::string_view id) const {
    auto it = std::lower_bound(tables.begin(), tables.end(), id,
                               [](const DatasetTable& t, std::string_view key) { return t.id < key; });
    return it != tables.end() && it->id == id ? &*it : nullptr;
}

std::vector<std::vector<std::string>> split_records(std::string_view text, char delimiter) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_quoted = false;
    bool record_has_content = false;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_quoted = false;
    };
    auto end_record = [&] {
        end_field();
        if (record_has_content) records.push_back(std::move(record));
        record.clear();
        record_has_content = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && field.empty() && !field_quoted) {
            in_quotes = true;
            field_quoted = true;
            record_has_content = true;
        } else if (c == delimiter) {
            end_field();
            record_has_content = true;
        } else if (c == '\n') {
            end_record();
        } else if (c == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') continue;
            end_record();
        } else {
            field.push_back(c);
            record_has_content = true;
        }
    }
    if (record_has_content || !field.empty()) end_record();
    return records;
}

char sniff_delimiter(std::string_view text, std::size_t max_lines) {
    // Only the head of the file matters; cut at a line boundary.
    std::size_t cut = 0;
    std::size_t lines = 0;
    while (cut < text.size() && lines <= max_lines) {
        auto nl = text.find('\n', cut);
        if (nl == std::string_view::npos) {
            cut = text.size();
            break;
        }
        cut = nl + 1;
        ++lines;
    }
    auto head = text.substr(0, cut);

    char best = ',';
    std::size_t best_score = 0;
    for (char delim : {',', '\t', ';'}) {
        auto records = split_records(head, delim);
        if (records.size() > max_lines) records.resize(max_lines);
        if (records.empty() || records.front().size() < 2) continue;
        auto width = records.front().size();
        auto score = static_cast<std::size_t>(std::count_if(
            records.begin(), records.end(), [&](const auto& r) { return r.size() == width; }));
        if (score > best_score) {
            best_score = score;
            best = delim;
        }
    }
    return best;
}

namespace {

bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        auto c = static_cast<unsigned char>(s[i]);
        std::size_t n = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
        if (n == 0) return false;
        if (i + n > s.size()) return s.size() >= 65536;  // probe cut mid-sequence
        for (std::size_t k = 1; k < n; ++k) {
            if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
        }
        i += n;
    }
    return true;
}

std::vector<std::string> sanitize_header(const std::vector<std::string>& raw) {
    std::vector<std::string> names;
    names.reserve(raw.size());
    for (std::size_t j = 0; j < raw.size(); ++j) {
        auto name = text::normalize_whitespace(raw[j]);
        if (name.empty()) name = "column_" + std::to_string(j + 1);
        names.push_back(std::move(name));
    }
    std::set<std::string> taken(names.begin(), names.end());
    std::set<std::string> seen;
    for (auto& name : names) {
        if (seen.insert(name).second) continue;
        for (int suffix = 2;; ++suffix) {
            auto candidate = name + "_" + std::to_string(suffix);
            if (!taken.count(candidate)) {
                name = candidate;
                break;
            }
        }
        taken.insert(name);
        seen.insert(name);
    }
    return names;
}

}  // namespace

DatasetTable parse_table(std::string_view contents, std::string id, std::string name,
                         std::string source_path, const LoadOptions& options) {
    auto probe = contents.substr(0, 65536);
    if (probe.find('\0') != std::string_view::npos) throw InvalidInput("binary content (NUL bytes)");
    if (!valid_utf8(probe)) throw InvalidInput("content is not valid UTF-8 text");
    if (contents.substr(0, 3) == "\xEF\xBB\xBF") contents.remove_prefix(3);

    DatasetTable table;
    table.id = std::move(id);
    table.name = std::move(name);
    table.source_path = std::move(source_path);
    table.delimiter = sniff_delimiter(contents, options.sniff_lines);

    auto records = split_records(contents, table.delimiter);
    if (records.empty()) throw InvalidInput("no header row");
    const auto& header = records.front();
    if (header.size() == 1 && text::trim(header.front()).empty()) throw InvalidInput("header has zero columns");

    auto names = sanitize_header(header);
    const auto width = names.size();
    table.columns.resize(width);
    for (std::size_t j = 0; j < width; ++j) {
        table.columns[j].name = names[j];
        table.columns[j].raw_values.reserve(records.size() - 1);
    }
    for (std::size_t r = 1; r < records.size(); ++r) {
        auto& record = records[r];
        if (record.size() != width) ++table.ragged_rows;
        for (std::size_t j = 0; j < width; ++j) {
            auto& cells = table.columns[j].raw_values;
            if (j >= record.size() || is_missing_token(record[j], options.parse)) {
                cells.emplace_back(std::nullopt);
            } else {
                cells.emplace_back(std::move(record[j]));
            }
        }
    }
    table.row_count = records.size() - 1;
    return table;
}

DatasetTable load_table(const fs::path& file, std::string id, std::string name, const LoadOptions& options) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InvalidInput("cannot open file");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_table(buffer.str(), std::move(id), std::move(name), file.string(), options);
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open manifest " + path.string());
    std::vector<ManifestEntry> entries;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty() || line.front() == '#') continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            auto tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (fields.size() < 2 || fields.size() > 3) {
            throw FormatError(path.string(), line_no, "expected <id>\\t<relative-path>\\t<display-name>");
        }
        ManifestEntry e{std::string(text::trim(fields[0])), std::string(text::trim(fields[1])),
                        fields.size() == 3 ? std::string(text::trim(fields[2])) : std::string{}};
        if (e.id.empty() || e.relative_path.empty()) throw FormatError(path.string(), line_no, "empty id or path");
        if (!ids.insert(e.id).second) throw FormatError(path.string(), line_no, "duplicate id '" + e.id + "'");
        if (e.display_name.empty()) e.display_name = fs::path(e.relative_path).stem().string();
        entries.push_back(std::move(e));
    }
    return entries;
}

Collection load_collection(const fs::path& root, const std::optional<fs::path>& manifest,
                           const LoadOptions& options) {
    if (!fs::is_directory(root)) throw InvalidInput("not a directory: " + root.string());

    std::vector<ManifestEntry> jobs;
    if (manifest) {
        jobs = read_manifest(*manifest);
    } else {
        for (const auto& entry : fs::recursive_directory_iterator(root)) {
            if (!entry.is_regular_file()) continue;
            auto rel = fs::relative(entry.path(), root);
            bool hidden = false;
            for (const auto& part : rel) hidden = hidden || part.string().starts_with(".");
            if (hidden) continue;
            jobs.push_back({rel.generic_string(), rel.generic_string(), entry.path().stem().string()});
        }
        std::sort(jobs.begin(), jobs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    }
    if (jobs.empty()) throw EmptyCollection("no files found under " + root.string());

    std::vector<std::optional<DatasetTable>> loaded(jobs.size());
    std::vector<std::string> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (auto i = next++; i < jobs.size(); i = next++) {
            try {
                loaded[i] = load_table(root / jobs[i].relative_path, jobs[i].id, jobs[i].display_name, options);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    std::size_t threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, jobs.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
        worker();
    }

    Collection collection;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (loaded[i]) {
            if (loaded[i]->ragged_rows > 0) {
                collection.diagnostics.push_back(
                    {jobs[i].relative_path,
                     std::to_string(loaded[i]->ragged_rows) + " rows padded or truncated to header width"});
            }
            collection.tables.push_back(std::move(*loaded[i]));
        } else {
            spdlog::warn("skipping {}: {}", jobs[i].relative_path, errors[i]);
            collection.diagnostics.push_back({jobs[i].relative_path, "skipped: " + errors[i]});
        }
    }
    std::sort(collection.tables.begin(), collection.tables.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    return collection;
}

namespace {

void write_field(std::ostream& out, std::string_view value, char delimiter) {
    bool needs_quotes = value.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string_view::npos ||
                        (!value.empty() && (text::is_space(value.front()) || text::is_space(value.back())));
    if (!needs_quotes) {
        out << value;
        return;
    }
    out << '"';
    for (char c : value) {
        if (c == '"') out << '"';
        out << c;
    }
    out << '"';
}

}  // namespace

void write_table(const DatasetTable& table, std::ostream& out, char delimiter) {
    const bool single = table.columns.size() == 1;
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
        if (j) out << delimiter;
        write_field(out, table.columns[j].name, delimiter);
    }
    out << '\n';
    for (std::size_t r = 0; r < table.row_count; ++r) {
        for (std::size_t j = 0; j < table.columns.size(); ++j) {
            if (j) out << delimiter;
            const auto& cell = table.columns[j].raw_values[r];
            if (cell) {
                write_field(out, *cell, delimiter);
            } else if (single) {
                out << "\"\"";  // keeps the row from reading back as a blank line
            }
        }
        out << '\n';
    }
}

}  // namespace tabsearch::corpus
