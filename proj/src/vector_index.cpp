#include "tabsearch/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <queue>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tabsearch/error.hpp"
#include "tabsearch/hashing.hpp"

namespace tabsearch::index {

std::string_view to_string(Backend backend) {
    return backend == Backend::flat ? "flat" : "hnsw";
}

std::optional<Backend> backend_from_string(std::string_view name) {
    if (name == "flat") return Backend::flat;
    if (name == "hnsw") return Backend::hnsw;
    return std::nullopt;
}

VectorIndex::VectorIndex(std::size_t dimension, Backend backend, HnswParams params, std::string embedder)
    : dimension_(dimension), backend_(backend), params_(params), embedder_(std::move(embedder)) {
    if (dimension_ == 0) throw DimensionError("index dimension must be positive");
    if (backend_ == Backend::hnsw) graph_ = std::make_unique<HnswGraph>(dimension_, params_);
}

void VectorIndex::add_profile(profiler::DatasetProfile profile) {
    if (sealed_) throw SealedIndex("index is sealed");
    auto id = profile.dataset_id;
    profiles_.insert_or_assign(std::move(id), std::move(profile));
}

PseudoqueryId VectorIndex::insert(std::string text, std::string dataset_id, std::span<const double> vector) {
    if (sealed_) throw SealedIndex("index is sealed");
    if (vector.size() != dimension_) {
        throw DimensionError(fmt::format("vector has dimension {}, index expects {}", vector.size(), dimension_));
    }
    if (!std::all_of(vector.begin(), vector.end(), [](double x) { return std::isfinite(x); })) {
        throw InvalidInput("vector contains non-finite values");
    }
    if (records_.size() >= std::numeric_limits<std::uint32_t>::max()) throw InvalidInput("index is full");
    const auto id = static_cast<PseudoqueryId>(records_.size());
    records_.push_back({id, std::move(text), std::move(dataset_id)});
    for (double x : vector) matrix_.push_back(static_cast<float>(x));
    if (graph_) graph_->insert(matrix_, static_cast<std::uint32_t>(id));
    return id;
}

std::vector<Neighbor> VectorIndex::exact_search(std::span<const double> query, std::size_t k) const {
    if (records_.empty()) throw EmptyIndex("index holds no records");
    if (query.size() != dimension_) throw DimensionError("query dimension does not match index");
    if (k == 0) throw InvalidInput("k must be at least 1");
    const auto n = records_.size();
    k = std::min(k, n);
    using Hit = HnswGraph::Hit;
    std::priority_queue<Hit> heap;  // worst kept on top
    std::span<const float> matrix(matrix_);
    for (std::size_t i = 0; i < n; ++i) {
        Hit h{squared_l2(query, matrix.subspan(i * dimension_, dimension_)), static_cast<std::uint32_t>(i)};
        if (heap.size() < k) {
            heap.push(h);
        } else if (h < heap.top()) {
            heap.pop();
            heap.push(h);
        }
    }
    std::vector<Neighbor> out(heap.size());
    for (auto i = out.size(); i-- > 0;) {
        out[i] = {heap.top().id, std::sqrt(heap.top().squared_distance)};
        heap.pop();
    }
    return out;
}

std::vector<Neighbor> VectorIndex::search(std::span<const double> query, std::size_t k) const {
    return search(query, k, params_.ef_search);
}

std::vector<Neighbor> VectorIndex::search(std::span<const double> query, std::size_t k, std::size_t ef_search) const {
    if (backend_ == Backend::flat) return exact_search(query, k);
    if (records_.empty()) throw EmptyIndex("index holds no records");
    if (query.size() != dimension_) throw DimensionError("query dimension does not match index");
    if (k == 0) throw InvalidInput("k must be at least 1");
    auto hits = graph_->search(matrix_, query, k, ef_search);
    std::vector<Neighbor> out;
    out.reserve(hits.size());
    for (const auto& h : hits) out.push_back({h.id, std::sqrt(h.squared_distance)});
    return out;
}

const PseudoqueryRecord& VectorIndex::record(PseudoqueryId id) const {
    if (id >= records_.size()) throw InvalidInput(fmt::format("no pseudoquery with id {}", id));
    return records_[id];
}

std::span<const float> VectorIndex::vector(PseudoqueryId id) const {
    if (id >= records_.size()) throw InvalidInput(fmt::format("no pseudoquery with id {}", id));
    return std::span<const float>(matrix_).subspan(id * dimension_, dimension_);
}

const profiler::DatasetProfile* VectorIndex::profile(std::string_view dataset_id) const {
    auto it = profiles_.find(dataset_id);
    return it == profiles_.end() ? nullptr : &it->second;
}

IndexManifest VectorIndex::manifest() const {
    IndexManifest m;
    m.dimension = dimension_;
    m.backend = backend_;
    m.hnsw = params_;
    m.record_count = records_.size();
    m.embedder = embedder_;
    return m;
}

// ---------------------------------------------------------------------------
// Persistence: magic, version, then checksummed blocks (tag, length, payload, crc32).

namespace {

constexpr char kMagic[8] = {'T', 'A', 'B', 'S', 'I', 'D', 'X', '\0'};

enum BlockTag : std::uint32_t {
    kEnd = 0,
    kManifest = 1,
    kProfiles = 2,
    kRecords = 3,
    kVectors = 4,
    kGraph = 5,
};

class ByteWriter {
public:
    template <typename T>
    void put(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        auto p = reinterpret_cast<const char*>(&value);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }
    void put_bytes(const void* data, std::size_t n) {
        auto p = static_cast<const char*>(data);
        bytes_.insert(bytes_.end(), p, p + n);
    }
    void put_string(std::string_view s) {
        put(static_cast<std::uint32_t>(s.size()));
        put_bytes(s.data(), s.size());
    }
    std::string& bytes() { return bytes_; }

private:
    std::string bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view data) : data_(data) {}
    template <typename T>
    T get() {
        T value;
        std::memcpy(&value, take(sizeof(T)).data(), sizeof(T));
        return value;
    }
    std::string_view take(std::size_t n) {
        if (n > data_.size() - pos_) throw ChecksumError("index file is truncated");
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::string get_string() { return std::string(take(get<std::uint32_t>())); }
    bool done() const { return pos_ == data_.size(); }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::string_view s) {
    return hashing::crc32({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

void write_block(std::ostream& out, std::uint32_t tag, std::string_view payload) {
    ByteWriter w;
    w.put(tag);
    w.put(static_cast<std::uint64_t>(payload.size()));
    w.put_bytes(payload.data(), payload.size());
    w.put(crc_of(payload));
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
}

}  // namespace

void VectorIndex::save(const std::filesystem::path& path) const {
    nlohmann::json manifest_json = {{"dimension", dimension_},
                                    {"metric", "l2"},
                                    {"backend", std::string(to_string(backend_))},
                                    {"hnsw",
                                     {{"M", params_.M},
                                      {"ef_construction", params_.ef_construction},
                                      {"ef_search", params_.ef_search},
                                      {"seed", params_.seed}}},
                                    {"record_count", records_.size()},
                                    {"version", kFormatVersion},
                                    {"embedder", embedder_},
                                    {"sealed", sealed_}};

    nlohmann::json profiles_json = nlohmann::json::array();
    for (const auto& [id, p] : profiles_) profiles_json.push_back(profiler::to_json(p));

    ByteWriter records;
    records.put(static_cast<std::uint64_t>(records_.size()));
    for (const auto& r : records_) {
        records.put_string(r.text);
        records.put_string(r.dataset_id);
    }

    std::string_view vectors(reinterpret_cast<const char*>(matrix_.data()), matrix_.size() * sizeof(float));

    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write index file " + tmp.string());
        out.write(kMagic, sizeof(kMagic));
        ByteWriter version;
        version.put(kFormatVersion);
        out.write(version.bytes().data(), static_cast<std::streamsize>(version.bytes().size()));
        write_block(out, kManifest, manifest_json.dump());
        write_block(out, kProfiles, profiles_json.dump());
        write_block(out, kRecords, records.bytes());
        write_block(out, kVectors, vectors);
        if (graph_) {
            ByteWriter g;
            g.put(graph_->entry_point());
            g.put(static_cast<std::int32_t>(graph_->max_level()));
            g.put(static_cast<std::uint64_t>(graph_->size()));
            for (std::size_t i = 0; i < graph_->size(); ++i) {
                const auto& layers = graph_->links()[i];
                g.put(static_cast<std::int32_t>(graph_->levels()[i]));
                for (const auto& layer : layers) {
                    g.put(static_cast<std::uint32_t>(layer.size()));
                    g.put_bytes(layer.data(), layer.size() * sizeof(std::uint32_t));
                }
            }
            write_block(out, kGraph, g.bytes());
        }
        write_block(out, kEnd, {});
        if (!out) throw Error("failed writing index file " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open index file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string data = buffer.str();

    ByteReader reader(data);
    if (data.size() < sizeof(kMagic) || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
        throw IncompatibleIndex(path.string() + " is not an index file");
    }
    reader.take(sizeof(kMagic));
    auto version = reader.get<std::uint32_t>();
    if (version != kFormatVersion) {
        throw IncompatibleIndex(fmt::format("index format version {} is not supported (expected {})", version,
                                            kFormatVersion));
    }

    std::map<std::uint32_t, std::string_view> blocks;
    while (true) {
        auto tag = reader.get<std::uint32_t>();
        auto length = reader.get<std::uint64_t>();
        auto payload = reader.take(length);
        auto crc = reader.get<std::uint32_t>();
        if (crc != crc_of(payload)) throw ChecksumError(fmt::format("checksum mismatch in block {}", tag));
        if (tag == kEnd) break;
        blocks[tag] = payload;
    }
    if (!reader.done()) throw ChecksumError("trailing bytes after end block");
    for (auto tag : {kManifest, kProfiles, kRecords, kVectors}) {
        if (!blocks.count(tag)) throw ChecksumError(fmt::format("index file lacks block {}", tag));
    }

    auto manifest = nlohmann::json::parse(blocks[kManifest]);
    auto backend = backend_from_string(manifest.at("backend").get<std::string>());
    if (!backend || manifest.at("metric") != "l2") throw IncompatibleIndex("unsupported backend or metric");
    HnswParams params;
    params.M = manifest.at("hnsw").at("M").get<std::size_t>();
    params.ef_construction = manifest.at("hnsw").at("ef_construction").get<std::size_t>();
    params.ef_search = manifest.at("hnsw").at("ef_search").get<std::size_t>();
    params.seed = manifest.at("hnsw").at("seed").get<std::uint64_t>();
    const auto dimension = manifest.at("dimension").get<std::size_t>();
    VectorIndex index(dimension, Backend::flat, params, manifest.at("embedder").get<std::string>());
    index.backend_ = *backend;

    for (const auto& p : nlohmann::json::parse(blocks[kProfiles])) index.add_profile(profiler::profile_from_json(p));

    ByteReader records(blocks[kRecords]);
    const auto count = records.get<std::uint64_t>();
    if (count != manifest.at("record_count").get<std::uint64_t>()) throw ChecksumError("record count mismatch");
    index.records_.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        auto text = records.get_string();
        auto dataset = records.get_string();
        index.records_.push_back({i, std::move(text), std::move(dataset)});
    }

    auto vectors = blocks[kVectors];
    if (vectors.size() != count * dimension * sizeof(float)) throw ChecksumError("vector block size mismatch");
    index.matrix_.resize(count * dimension);
    std::memcpy(index.matrix_.data(), vectors.data(), vectors.size());

    if (index.backend_ == Backend::hnsw) {
        if (!blocks.count(kGraph)) throw ChecksumError("HNSW index lacks its graph block");
        ByteReader g(blocks[kGraph]);
        auto entry = g.get<std::int64_t>();
        auto max_level = g.get<std::int32_t>();
        auto nodes = g.get<std::uint64_t>();
        if (nodes != count) throw ChecksumError("graph node count mismatch");
        std::vector<int> levels(nodes);
        std::vector<std::vector<std::vector<std::uint32_t>>> links(nodes);
        for (std::uint64_t i = 0; i < nodes; ++i) {
            levels[i] = g.get<std::int32_t>();
            if (levels[i] < 0 || levels[i] > 64) throw ChecksumError("graph level out of range");
            links[i].resize(static_cast<std::size_t>(levels[i]) + 1);
            for (auto& layer : links[i]) {
                auto n = g.get<std::uint32_t>();
                auto raw = g.take(std::size_t{n} * sizeof(std::uint32_t));
                layer.resize(n);
                std::memcpy(layer.data(), raw.data(), raw.size());
            }
        }
        index.graph_ = std::make_unique<HnswGraph>(dimension, params);
        index.graph_->restore(entry, max_level, std::move(levels), std::move(links));
    }
    index.sealed_ = manifest.value("sealed", true);
    return index;
}

}  // namespace tabsearch::index
