#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tabsearch::providers {

enum class GenerationRole { pseudoquery_gen, query_expand, query_decompose, rerank };

std::string_view to_string(GenerationRole role);

struct GenerationRequest {
    GenerationRole role = GenerationRole::pseudoquery_gen;
    std::string prompt;
    int max_output_tokens = 1024;
    double temperature = 0.0;
};

struct GenerationResult {
    std::string text;
    bool truncated = false;
    std::size_t prompt_tokens = 0;
    std::size_t output_tokens = 0;
};

struct EmbeddingVector {
    std::vector<double> values;
    std::size_t dimension() const noexcept { return values.size(); }
};

double l2_norm(const EmbeddingVector& v);
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class TextGenerator {
public:
    virtual ~TextGenerator() = default;
    virtual std::string id() const = 0;
    /// Throws ProviderUnavailable when the backend cannot answer.
    virtual GenerationResult generate(const GenerationRequest& request) = 0;
};

class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual std::string id() const = 0;
    virtual std::size_t dimension() const = 0;
    /// One vector per text, in order. Throws InvalidInput for an empty list or text.
    virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
};

void validate_request(const GenerationRequest& request);
void validate_texts(std::span<const std::string> texts);

/// Signed feature hashing of character trigrams, scaled to unit length.
class OfflineEmbedder final : public TextEmbedder {
public:
    explicit OfflineEmbedder(std::size_t dimension = 256);
    std::string id() const override;
    std::size_t dimension() const override { return dimension_; }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
    EmbeddingVector embed_one(std::string_view text) const;

private:
    std::size_t dimension_;
};

/// Lower-cased, whitespace-collapsed, space-padded character trigrams of text.
std::vector<std::string> character_trigrams(std::string_view text);

/// Template-driven generator. Output is a pure function of the request.
class OfflineGenerator final : public TextGenerator {
public:
    std::string id() const override { return "offline-template"; }
    GenerationResult generate(const GenerationRequest& request) override;
};

/// Splits a request on coordinating clauses (" and ", ";"); never empty.
std::vector<std::string> split_clauses(std::string_view query);

/// Bounds the number of concurrent calls into a provider.
class ConcurrencyLimiter {
public:
    explicit ConcurrencyLimiter(std::size_t limit);
    void acquire();
    void release();

    class Slot {
    public:
        explicit Slot(ConcurrencyLimiter& limiter) : limiter_(limiter) { limiter_.acquire(); }
        ~Slot() { limiter_.release(); }
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;

    private:
        ConcurrencyLimiter& limiter_;
    };

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t available_;
};

struct RemoteSettings {
    std::string generation_url;  // e.g. http://localhost:8080/v1/generate
    std::string embedding_url;   // e.g. http://localhost:8080/v1/embed
    std::string api_key;
    std::string generation_model = "gpt-5-mini";
    std::string embedding_model = "text-embedding-3-small";
    std::size_t embedding_dimension = 1536;
    std::size_t max_in_flight = 8;
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
    std::chrono::seconds timeout{120};
    std::size_t embedding_batch = 64;
};

/// POSTs JSON to an HTTP endpoint with bounded retries. 5xx, 429 and
/// transport failures are retried with exponential backoff; other statuses fail at once.
class HttpJsonClient {
public:
    explicit HttpJsonClient(const RemoteSettings& settings);
    std::string post(const std::string& url, const std::string& body);

private:
    RemoteSettings settings_;
    ConcurrencyLimiter limiter_;
};

class RemoteGenerator final : public TextGenerator {
public:
    explicit RemoteGenerator(RemoteSettings settings);
    std::string id() const override;
    GenerationResult generate(const GenerationRequest& request) override;

private:
    RemoteSettings settings_;
    HttpJsonClient client_;
};

class RemoteEmbedder final : public TextEmbedder {
public:
    explicit RemoteEmbedder(RemoteSettings settings);
    std::string id() const override;
    std::size_t dimension() const override { return settings_.embedding_dimension; }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

private:
    RemoteSettings settings_;
    HttpJsonClient client_;
};

/// Append-only store of float32 embeddings keyed by (provider id, sha256(text)).
/// Reads run concurrently; writes are serialized.
class EmbeddingCache {
public:
    EmbeddingCache() = default;  // memory only
    explicit EmbeddingCache(std::filesystem::path path);

    std::optional<EmbeddingVector> lookup(std::string_view provider_id, std::string_view text) const;
    void store(std::string_view provider_id, std::string_view text, const EmbeddingVector& vector);
    std::size_t size() const;
    std::size_t skipped_lines() const noexcept { return skipped_lines_; }

    static std::string encode_record(std::string_view provider_id, std::string_view text_hash,
                                     const EmbeddingVector& vector);

private:
    std::optional<std::filesystem::path> path_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, std::vector<float>> entries_;
    std::size_t skipped_lines_ = 0;
};

/// Serves embeddings from a cache and forwards only misses to the wrapped
/// provider. Vectors always pass through float32 so cold and warm runs agree.
class CachingEmbedder final : public TextEmbedder {
public:
    CachingEmbedder(TextEmbedder& inner, EmbeddingCache& cache) : inner_(inner), cache_(cache) {}
    std::string id() const override { return inner_.id(); }
    std::size_t dimension() const override { return inner_.dimension(); }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

private:
    TextEmbedder& inner_;
    EmbeddingCache& cache_;
};

struct CallStats {
    std::atomic<std::size_t> calls{0};
    std::atomic<std::size_t> failures{0};
    std::atomic<std::size_t> items{0};
    std::atomic<std::size_t> prompt_tokens{0};
    std::atomic<std::size_t> output_tokens{0};
    std::atomic<std::int64_t> total_micros{0};
};

/// Logs every call (role, token counts, latency) and keeps running totals.
class InstrumentedGenerator final : public TextGenerator {
public:
    explicit InstrumentedGenerator(TextGenerator& inner) : inner_(inner) {}
    std::string id() const override { return inner_.id(); }
    GenerationResult generate(const GenerationRequest& request) override;
    const CallStats& stats() const noexcept { return stats_; }

private:
    TextGenerator& inner_;
    CallStats stats_;
};

class InstrumentedEmbedder final : public TextEmbedder {
public:
    explicit InstrumentedEmbedder(TextEmbedder& inner) : inner_(inner) {}
    std::string id() const override { return inner_.id(); }
    std::size_t dimension() const override { return inner_.dimension(); }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
    const CallStats& stats() const noexcept { return stats_; }

private:
    TextEmbedder& inner_;
    CallStats stats_;
};

}  // namespace tabsearch::providers
