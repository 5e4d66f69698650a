#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabsearch/hnsw.hpp"
#include "tabsearch/profiler.hpp"

namespace tabsearch::index {

using PseudoqueryId = std::uint64_t;

enum class Backend { flat, hnsw };

std::string_view to_string(Backend backend);
std::optional<Backend> backend_from_string(std::string_view name);

inline constexpr std::uint32_t kFormatVersion = 1;

struct PseudoqueryRecord {
    PseudoqueryId id = 0;
    std::string text;
    std::string dataset_id;
};

struct Neighbor {
    PseudoqueryId id = 0;
    double distance = 0.0;  // L2, not squared
};

struct IndexManifest {
    std::size_t dimension = 0;
    std::string metric = "l2";
    Backend backend = Backend::hnsw;
    HnswParams hnsw;
    std::size_t record_count = 0;
    std::uint32_t version = kFormatVersion;
    std::string embedder;  // provider id that produced the vectors
};

/// Pseudoquery embeddings plus per-dataset profiles. Single writer until
/// seal(); afterwards immutable and safe for concurrent search.
class VectorIndex {
public:
    VectorIndex(std::size_t dimension, Backend backend, HnswParams params = {}, std::string embedder = {});

    /// Profiles are stored once per dataset and shared by its records.
    void add_profile(profiler::DatasetProfile profile);

    /// Throws DimensionError on a size mismatch and SealedIndex after seal().
    PseudoqueryId insert(std::string text, std::string dataset_id, std::span<const double> vector);

    void seal() noexcept { sealed_ = true; }
    bool sealed() const noexcept { return sealed_; }

    /// Up to k records ascending by (distance, id). Throws EmptyIndex.
    std::vector<Neighbor> search(std::span<const double> query, std::size_t k) const;
    std::vector<Neighbor> search(std::span<const double> query, std::size_t k, std::size_t ef_search) const;
    /// Exhaustive scan regardless of backend.
    std::vector<Neighbor> exact_search(std::span<const double> query, std::size_t k) const;

    const PseudoqueryRecord& record(PseudoqueryId id) const;
    std::span<const float> vector(PseudoqueryId id) const;
    const profiler::DatasetProfile* profile(std::string_view dataset_id) const;
    const std::map<std::string, profiler::DatasetProfile, std::less<>>& profiles() const noexcept { return profiles_; }

    std::size_t size() const noexcept { return records_.size(); }
    std::size_t dimension() const noexcept { return dimension_; }
    Backend backend() const noexcept { return backend_; }
    IndexManifest manifest() const;

    void save(const std::filesystem::path& path) const;
    /// Throws IncompatibleIndex on a version mismatch and ChecksumError on corruption or truncation.
    static VectorIndex load(const std::filesystem::path& path);

private:
    std::size_t dimension_;
    Backend backend_;
    HnswParams params_;
    std::string embedder_;
    bool sealed_ = false;
    std::vector<PseudoqueryRecord> records_;
    std::vector<float> matrix_;  // row-major, one row per record
    std::map<std::string, profiler::DatasetProfile, std::less<>> profiles_;
    std::unique_ptr<HnswGraph> graph_;
};

}  // namespace tabsearch::index
