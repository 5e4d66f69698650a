#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace tabsearch::index {

struct HnswParams {
    std::size_t M = 16;
    std::size_t ef_construction = 200;
    std::size_t ef_search = 128;
    std::uint64_t seed = 42;
};

/// Squared Euclidean distance accumulated in double.
double squared_l2(std::span<const double> query, std::span<const float> point);
double squared_l2(std::span<const float> a, std::span<const float> b);

/// Hierarchical navigable small-world graph over rows of an external
/// row-major float matrix. Node ids are row indices. Not thread-safe for
/// insertion; searches on a finished graph may run concurrently.
class HnswGraph {
public:
    struct Hit {
        double squared_distance;
        std::uint32_t id;
        bool operator<(const Hit& o) const {
            return squared_distance != o.squared_distance ? squared_distance < o.squared_distance : id < o.id;
        }
    };

    HnswGraph(std::size_t dimension, HnswParams params);

    /// Links row `id` (which must equal size()) using the matrix rows [0, id].
    void insert(std::span<const float> matrix, std::uint32_t id);

    /// Up to k nearest rows, ascending by (distance, id).
    std::vector<Hit> search(std::span<const float> matrix, std::span<const double> query, std::size_t k,
                            std::size_t ef) const;

    std::size_t size() const noexcept { return levels_.size(); }
    const HnswParams& params() const noexcept { return params_; }

    // Serialization access.
    std::int64_t entry_point() const noexcept { return entry_point_; }
    int max_level() const noexcept { return max_level_; }
    const std::vector<int>& levels() const noexcept { return levels_; }
    const std::vector<std::vector<std::vector<std::uint32_t>>>& links() const noexcept { return links_; }
    void restore(std::int64_t entry_point, int max_level, std::vector<int> levels,
                 std::vector<std::vector<std::vector<std::uint32_t>>> links);

private:
    std::span<const float> row(std::span<const float> matrix, std::uint32_t id) const {
        return matrix.subspan(static_cast<std::size_t>(id) * dimension_, dimension_);
    }
    int draw_level();
    template <typename Query>
    std::vector<Hit> search_layer(std::span<const float> matrix, Query query, std::uint32_t entry, std::size_t ef,
                                  int level) const;
    std::vector<Hit> select_neighbors(std::span<const float> matrix, std::vector<Hit> candidates,
                                      std::size_t max_links) const;
    std::size_t max_links(int level) const { return level == 0 ? 2 * params_.M : params_.M; }

    std::size_t dimension_;
    HnswParams params_;
    double level_mult_;
    std::mt19937_64 rng_;
    std::int64_t entry_point_ = -1;
    int max_level_ = -1;
    std::vector<int> levels_;
    std::vector<std::vector<std::vector<std::uint32_t>>> links_;  // node -> level -> neighbours
};

}  // namespace tabsearch::index
