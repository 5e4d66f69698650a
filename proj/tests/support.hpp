#pragma once

// Fixtures and naive reference implementations shared by the unit tests and
// the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

namespace testsupport {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& tag = "tabsearch") {
        std::random_device rd;
        path_ = fs::temp_directory_path() / fmt::format("{}-{:016x}", tag, (std::uint64_t(rd()) << 32) ^ rd());
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline void write_file(const fs::path& path, const std::string& contents) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << contents;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// ---------------------------------------------------------------------------
// Planted corpus: every table carries a made-up token in all of its column
// names, so every offline pseudoquery of that table mentions the token.

struct PlantedTable {
    std::string id;     // relative path, as assigned by load_collection
    std::string token;  // unique made-up word
};

inline std::vector<std::string> planted_tokens(std::size_t count, std::uint64_t seed) {
    static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
                                   "br", "dr", "gl", "kr", "pl", "st", "tr", "zw", "sn", "fl"};
    static const char* vowels[] = {"a", "e", "i", "o", "u", "y"};
    static const char* codas[] = {"x", "q", "rk", "mph", "lv", "zz", "nt", "sk", "j", "wn"};
    std::mt19937_64 rng(seed);
    std::set<std::string> seen;
    std::vector<std::string> out;
    while (out.size() < count) {
        std::string token;
        for (int s = 0; s < 3; ++s) {
            token += onsets[rng() % std::size(onsets)];
            token += vowels[rng() % std::size(vowels)];
        }
        token += codas[rng() % std::size(codas)];
        if (seen.insert(token).second) out.push_back(token);
    }
    return out;
}

inline std::vector<PlantedTable> write_planted_corpus(const fs::path& root, std::size_t count, std::uint64_t seed) {
    auto tokens = planted_tokens(count, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<PlantedTable> tables;
    static const char* sites[] = {"north", "south", "east", "west", "central"};
    for (std::size_t i = 0; i < count; ++i) {
        const auto& tok = tokens[i];
        std::string csv = fmt::format("{0}_level,{0}_site,{0}_score\n", tok);
        const auto rows = 20 + rng() % 20;
        for (std::size_t r = 0; r < rows; ++r) {
            csv += fmt::format("{},{},{}\n", rng() % 500, sites[rng() % std::size(sites)],
                               static_cast<double>(rng() % 4000) / 8.0);
        }
        auto name = fmt::format("t{:02}_{}.csv", i, tok);
        write_file(root / name, csv);
        tables.push_back({name, tok});
    }
    return tables;
}

inline std::string paraphrase_query(const std::string& token) {
    return fmt::format("{} level site measurements", token);
}

// ---------------------------------------------------------------------------
// Naive metric oracles.

inline double naive_recall(const std::vector<std::string>& ranking, const std::set<std::string>& relevant,
                           std::size_t k) {
    std::size_t hit = 0;
    for (const auto& r : relevant) {
        auto it = std::find(ranking.begin(), ranking.end(), r);
        if (it != ranking.end() && static_cast<std::size_t>(it - ranking.begin()) < k) ++hit;
    }
    return double(hit) / double(relevant.size());
}

inline double naive_precision(const std::vector<std::string>& ranking, const std::set<std::string>& relevant,
                              std::size_t k) {
    double hit = 0;
    for (std::size_t i = 0; i < k && i < ranking.size(); ++i) {
        if (relevant.find(ranking[i]) != relevant.end()) hit += 1;
    }
    return hit / double(k);
}

inline double naive_ap(const std::vector<std::string>& ranking, const std::set<std::string>& relevant) {
    // Mean over relevant items of precision at that item's rank (0 when unretrieved).
    double total = 0;
    for (const auto& r : relevant) {
        auto it = std::find(ranking.begin(), ranking.end(), r);
        if (it == ranking.end()) continue;
        auto rank = static_cast<std::size_t>(it - ranking.begin()) + 1;
        total += naive_precision(ranking, relevant, rank);
    }
    return total / double(relevant.size());
}

inline double naive_ndcg(const std::vector<std::string>& ranking, const std::map<std::string, int>& grades,
                         std::size_t k) {
    auto grade_of = [&](const std::string& d) {
        auto it = grades.find(d);
        return it == grades.end() ? 0 : it->second;
    };
    double dcg = 0;
    for (std::size_t r = 1; r <= k && r <= ranking.size(); ++r) dcg += grade_of(ranking[r - 1]) / std::log2(r + 1.0);
    std::vector<int> ideal;
    for (const auto& [d, g] : grades) ideal.push_back(g);
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0;
    for (std::size_t r = 1; r <= k && r <= ideal.size(); ++r) idcg += ideal[r - 1] / std::log2(r + 1.0);
    return dcg / idcg;
}

}  // namespace testsupport
