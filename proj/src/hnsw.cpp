#include "tabsearch/hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "tabsearch/error.hpp"

namespace tabsearch::index {

double squared_l2(std::span<const double> query, std::span<const float> point) {
    double sum = 0.0;
    for (std::size_t i = 0; i < point.size(); ++i) {
        double d = query[i] - static_cast<double>(point[i]);
        sum += d * d;
    }
    return sum;
}

double squared_l2(std::span<const float> a, std::span<const float> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sum += d * d;
    }
    return sum;
}

namespace {

// Per-thread visit marks; bumping the epoch clears them in O(1).
struct VisitMarks {
    std::vector<std::uint32_t> marks;
    std::uint32_t epoch = 0;

    void reset(std::size_t n) {
        if (marks.size() < n) marks.resize(n, 0);
        if (++epoch == 0) {
            std::fill(marks.begin(), marks.end(), 0);
            epoch = 1;
        }
    }
    bool visit(std::uint32_t id) {
        if (marks[id] == epoch) return false;
        marks[id] = epoch;
        return true;
    }
};

thread_local VisitMarks tls_marks;

}  // namespace

HnswGraph::HnswGraph(std::size_t dimension, HnswParams params)
    : dimension_(dimension),
      params_(params),
      level_mult_(1.0 / std::log(static_cast<double>(std::max<std::size_t>(2, params.M)))),
      rng_(params.seed) {
    if (params_.M < 2) throw InvalidInput("HNSW M must be at least 2");
    if (params_.ef_construction < 1 || params_.ef_search < 1) throw InvalidInput("HNSW ef values must be positive");
}

int HnswGraph::draw_level() {
    double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    if (u <= 0.0) u = 0x1.0p-53;
    return static_cast<int>(std::floor(-std::log(u) * level_mult_));
}

template <typename Query>
std::vector<HnswGraph::Hit> HnswGraph::search_layer(std::span<const float> matrix, Query query, std::uint32_t entry,
                                                    std::size_t ef, int level) const {
    auto& marks = tls_marks;
    marks.reset(levels_.size());

    auto worse_first = [](const Hit& a, const Hit& b) { return a < b; };  // max-heap on (distance, id)
    auto better_first = [](const Hit& a, const Hit& b) { return b < a; };  // min-heap
    std::priority_queue<Hit, std::vector<Hit>, decltype(worse_first)> results(worse_first);
    std::priority_queue<Hit, std::vector<Hit>, decltype(better_first)> frontier(better_first);

    Hit start{squared_l2(query, row(matrix, entry)), entry};
    marks.visit(entry);
    results.push(start);
    frontier.push(start);

    while (!frontier.empty()) {
        Hit current = frontier.top();
        if (results.size() >= ef && results.top() < current) break;
        frontier.pop();
        const auto& neighbours = links_[current.id][static_cast<std::size_t>(level)];
        for (auto n : neighbours) {
            if (!marks.visit(n)) continue;
            Hit candidate{squared_l2(query, row(matrix, n)), n};
            if (results.size() < ef || candidate < results.top()) {
                frontier.push(candidate);
                results.push(candidate);
                if (results.size() > ef) results.pop();
            }
        }
    }
    std::vector<Hit> out;
    out.reserve(results.size());
    while (!results.empty()) {
        out.push_back(results.top());
        results.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<HnswGraph::Hit> HnswGraph::select_neighbors(std::span<const float> matrix, std::vector<Hit> candidates,
                                                        std::size_t max_count) const {
    std::sort(candidates.begin(), candidates.end());
    if (candidates.size() <= max_count) return candidates;
    // Keep a candidate only if it is closer to the base than to every kept neighbour.
    std::vector<Hit> selected;
    selected.reserve(max_count);
    for (const auto& c : candidates) {
        if (selected.size() >= max_count) break;
        bool diverse = true;
        for (const auto& s : selected) {
            if (squared_l2(row(matrix, c.id), row(matrix, s.id)) < c.squared_distance) {
                diverse = false;
                break;
            }
        }
        if (diverse) selected.push_back(c);
    }
    return selected;
}

void HnswGraph::insert(std::span<const float> matrix, std::uint32_t id) {
    if (id != levels_.size()) throw InvalidInput("HNSW rows must be inserted in order");
    const int level = draw_level();
    levels_.push_back(level);
    links_.emplace_back(static_cast<std::size_t>(level) + 1);

    if (entry_point_ < 0) {
        entry_point_ = id;
        max_level_ = level;
        return;
    }

    auto query = row(matrix, id);
    auto current = static_cast<std::uint32_t>(entry_point_);
    double current_distance = squared_l2(query, row(matrix, current));
    for (int l = max_level_; l > level; --l) {
        bool moved = true;
        while (moved) {
            moved = false;
            for (auto n : links_[current][static_cast<std::size_t>(l)]) {
                double d = squared_l2(query, row(matrix, n));
                if (d < current_distance || (d == current_distance && n < current)) {
                    current = n;
                    current_distance = d;
                    moved = true;
                }
            }
        }
    }

    for (int l = std::min(level, max_level_); l >= 0; --l) {
        auto found = search_layer(matrix, query, current, params_.ef_construction, l);
        auto chosen = select_neighbors(matrix, found, params_.M);
        auto& own = links_[id][static_cast<std::size_t>(l)];
        for (const auto& c : chosen) own.push_back(c.id);

        const auto cap = max_links(l);
        for (const auto& c : chosen) {
            auto& theirs = links_[c.id][static_cast<std::size_t>(l)];
            theirs.push_back(id);
            if (theirs.size() <= cap) continue;
            std::vector<Hit> pool;
            pool.reserve(theirs.size());
            for (auto n : theirs) pool.push_back({squared_l2(row(matrix, c.id), row(matrix, n)), n});
            auto kept = select_neighbors(matrix, std::move(pool), cap);
            theirs.clear();
            for (const auto& k : kept) theirs.push_back(k.id);
        }
        current = found.front().id;
    }

    if (level > max_level_) {
        entry_point_ = id;
        max_level_ = level;
    }
}

std::vector<HnswGraph::Hit> HnswGraph::search(std::span<const float> matrix, std::span<const double> query,
                                              std::size_t k, std::size_t ef) const {
    if (entry_point_ < 0 || k == 0) return {};
    auto current = static_cast<std::uint32_t>(entry_point_);
    double current_distance = squared_l2(query, row(matrix, current));
    for (int l = max_level_; l > 0; --l) {
        bool moved = true;
        while (moved) {
            moved = false;
            for (auto n : links_[current][static_cast<std::size_t>(l)]) {
                double d = squared_l2(query, row(matrix, n));
                if (d < current_distance || (d == current_distance && n < current)) {
                    current = n;
                    current_distance = d;
                    moved = true;
                }
            }
        }
    }
    auto hits = search_layer(matrix, query, current, std::max(ef, k), 0);
    if (hits.size() > k) hits.resize(k);
    return hits;
}

void HnswGraph::restore(std::int64_t entry_point, int max_level, std::vector<int> levels,
                        std::vector<std::vector<std::vector<std::uint32_t>>> links) {
    if (levels.size() != links.size()) throw ChecksumError("HNSW graph block is inconsistent");
    for (std::size_t i = 0; i < links.size(); ++i) {
        if (links[i].size() != static_cast<std::size_t>(levels[i]) + 1) throw ChecksumError("HNSW level mismatch");
        for (const auto& layer : links[i]) {
            for (auto n : layer) {
                if (n >= links.size()) throw ChecksumError("HNSW link out of range");
            }
        }
    }
    if (entry_point >= static_cast<std::int64_t>(links.size())) throw ChecksumError("HNSW entry point out of range");
    entry_point_ = entry_point;
    max_level_ = max_level;
    levels_ = std::move(levels);
    links_ = std::move(links);
}

}  // namespace tabsearch::index
