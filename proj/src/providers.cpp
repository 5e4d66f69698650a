#include "tabsearch/providers.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <httplib.h>

#include "tabsearch/error.hpp"
#include "tabsearch/hashing.hpp"
#include "tabsearch/prompts.hpp"
#include "tabsearch/text_util.hpp"

namespace tabsearch::providers {

static_assert(std::endian::native == std::endian::little, "cache and index formats assume little-endian hosts");

std::string_view to_string(GenerationRole role) {
    switch (role) {
        case GenerationRole::pseudoquery_gen: return "pseudoquery_gen";
        case GenerationRole::query_expand: return "query_expand";
        case GenerationRole::query_decompose: return "query_decompose";
        case GenerationRole::rerank: return "rerank";
    }
    return "unknown";
}

double l2_norm(const EmbeddingVector& v) {
    double sum = 0.0;
    for (double x : v.values) sum += x * x;
    return std::sqrt(sum);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) throw DimensionError("cosine of vectors with different dimensions");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
    double denom = l2_norm(a) * l2_norm(b);
    return denom > 0.0 ? dot / denom : 0.0;
}

void validate_request(const GenerationRequest& request) {
    if (text::trim(request.prompt).empty()) throw InvalidInput("generation prompt is empty");
    if (!(request.temperature >= 0.0)) throw InvalidInput("temperature must be >= 0");
    if (request.max_output_tokens <= 0) throw InvalidInput("max_output_tokens must be positive");
}

void validate_texts(std::span<const std::string> texts) {
    if (texts.empty()) throw InvalidInput("embed() needs at least one text");
    for (const auto& t : texts) {
        if (text::trim(t).empty()) throw InvalidInput("cannot embed an empty text");
    }
}

// ---------------------------------------------------------------------------
// Offline embedder

std::vector<std::string> character_trigrams(std::string_view input) {
    auto normalized = text::to_lower(text::normalize_whitespace(input));
    std::vector<std::string> grams;
    if (normalized.empty()) return grams;
    auto padded = " " + normalized + " ";
    grams.reserve(padded.size() - 2);
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) grams.push_back(padded.substr(i, 3));
    return grams;
}

OfflineEmbedder::OfflineEmbedder(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw InvalidInput("embedding dimension must be positive");
}

std::string OfflineEmbedder::id() const {
    return fmt::format("offline-trigram-{}", dimension_);
}

EmbeddingVector OfflineEmbedder::embed_one(std::string_view text) const {
    auto grams = character_trigrams(text);
    if (grams.empty()) throw InvalidInput("cannot embed an empty text");
    EmbeddingVector v;
    v.values.assign(dimension_, 0.0);
    for (const auto& g : grams) {
        auto h = hashing::fnv1a64(g);
        double sign = ((h >> 40) & 1U) ? -1.0 : 1.0;
        v.values[h % dimension_] += sign;
    }
    double norm = l2_norm(v);
    if (norm == 0.0) {
        // every trigram cancelled out; fall back to a single deterministic axis
        v.values[hashing::fnv1a64(text::normalize_whitespace(text)) % dimension_] = 1.0;
        return v;
    }
    for (double& x : v.values) x /= norm;
    return v;
}

std::vector<EmbeddingVector> OfflineEmbedder::embed(std::span<const std::string> texts) {
    validate_texts(texts);
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
}

// ---------------------------------------------------------------------------
// Offline generator

std::vector<std::string> split_clauses(std::string_view query) {
    auto q = text::normalize_whitespace(query);
    std::vector<std::string> parts;
    std::string current;
    std::size_t i = 0;
    auto flush = [&] {
        auto t = text::normalize_whitespace(current);
        if (!t.empty()) parts.push_back(std::move(t));
        current.clear();
    };
    while (i < q.size()) {
        if (q[i] == ';') {
            flush();
            ++i;
        } else if (q[i] == ' ' && text::starts_with_ci(std::string_view(q).substr(i), " and ")) {
            flush();
            i += 5;
        } else {
            current.push_back(q[i++]);
        }
    }
    flush();
    if (parts.empty()) parts.push_back(q);
    return parts;
}

namespace {

struct ProfileLine {
    std::string name;
    bool numeric = false;
    std::string min, max;
    std::vector<std::string> top_values;
};

std::string between(std::string_view s, std::string_view open, std::string_view close) {
    auto a = s.find(open);
    if (a == std::string_view::npos) return {};
    a += open.size();
    auto b = s.find(close, a);
    if (b == std::string_view::npos) return {};
    return std::string(s.substr(a, b - a));
}

std::vector<ProfileLine> parse_profile_lines(std::string_view prompt) {
    std::vector<ProfileLine> columns;
    bool in_profile = false;
    for (const auto& line : text::split_lines(prompt)) {
        if (line == prompts::kProfileMarker) {
            in_profile = true;
            continue;
        }
        if (!in_profile || !line.starts_with("**")) continue;
        auto end = line.find("**:", 2);
        if (end == std::string::npos) continue;
        ProfileLine col;
        col.name = line.substr(2, end - 2);
        for (char& c : col.name) {
            if (c == '_') c = ' ';
        }
        col.numeric = line.find("This column is numeric.") != std::string::npos;
        if (col.numeric) {
            col.max = between(line, "Max: ", ",");
            // Min is followed by ". " but may itself contain a decimal point.
            auto min_start = line.find("Min: ");
            if (min_start != std::string::npos) {
                auto rest = std::string_view(line).substr(min_start + 5);
                auto stop = rest.find(". ");
                col.min = std::string(stop == std::string_view::npos ? rest.substr(0, rest.size() - 1) : rest.substr(0, stop));
            }
        } else {
            auto top = line.find("Top values: ");
            if (top != std::string::npos) {
                auto rest = std::string_view(line).substr(top + 12);
                if (!rest.empty() && rest.back() == '.') rest.remove_suffix(1);
                std::size_t start = 0;
                while (start <= rest.size()) {
                    auto comma = rest.find(", ", start);
                    auto item = rest.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
                    if (!item.empty()) col.top_values.emplace_back(item);
                    if (comma == std::string_view::npos) break;
                    start = comma + 2;
                }
            }
        }
        columns.push_back(std::move(col));
    }
    return columns;
}

std::vector<std::string> template_pseudoqueries(const std::vector<ProfileLine>& cols, std::size_t count) {
    std::vector<std::string> out;
    if (cols.empty()) {
        for (std::size_t t = 0; t < count; ++t) out.push_back("Search for a tabular dataset");
        return out;
    }
    const auto m = cols.size();
    for (std::size_t t = 0; t < count; ++t) {
        const auto& a = cols[t % m];
        const auto& b = cols[(t % m + 1 + t / m) % m];
        static constexpr std::array<std::string_view, 4> leads = {
            "Search for a dataset about ", "Find a table with ", "Looking for data on ", "Dataset containing "};
        std::string q = std::string(leads[t / m % leads.size()]) + a.name;
        if (m > 1 && &a != &b) q += " and " + b.name;
        if (a.numeric) {
            q += fmt::format(" with values from {} to {}", a.min, a.max);
        } else if (m > 1 && &a != &b && b.numeric) {
            q += fmt::format(" with {} values from {} to {}", b.name, b.min, b.max);
        } else if (!a.top_values.empty()) {
            q += " such as " + a.top_values[t / m % a.top_values.size()];
        }
        out.push_back(std::move(q));
    }
    return out;
}

std::string rerank_answer(std::string_view prompt) {
    struct Item {
        std::string id;
        std::string body;
    };
    std::vector<Item> items;
    for (const auto& line : text::split_lines(prompt)) {
        if (line.starts_with(prompts::kIdMarker)) {
            items.push_back({line.substr(prompts::kIdMarker.size()), {}});
        } else if (!items.empty() && !line.starts_with(prompts::kCandidateMarker)) {
            items.back().body += line;
            items.back().body.push_back(' ');
        }
    }
    auto query_words = text::words(prompts::field_after(prompt, prompts::kQueryMarker).value_or(""));
    std::sort(query_words.begin(), query_words.end());
    query_words.erase(std::unique(query_words.begin(), query_words.end()), query_words.end());

    std::vector<std::pair<std::size_t, std::size_t>> scored;  // (overlap, listed position)
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto body = text::words(items[i].id + " " + items[i].body);
        std::sort(body.begin(), body.end());
        std::size_t overlap = 0;
        for (const auto& w : query_words) overlap += std::binary_search(body.begin(), body.end(), w);
        scored.emplace_back(overlap, i);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    nlohmann::json ids = nlohmann::json::array();
    for (const auto& [overlap, i] : scored) ids.push_back(items[i].id);
    return ids.dump();
}

}  // namespace

GenerationResult OfflineGenerator::generate(const GenerationRequest& request) {
    validate_request(request);
    GenerationResult result;
    const auto& prompt = request.prompt;
    switch (request.role) {
        case GenerationRole::pseudoquery_gen: {
            std::size_t count = 10;
            if (auto n = prompts::field_after(prompt, prompts::kCountMarker)) {
                count = std::strtoul(n->c_str(), nullptr, 10);
            }
            result.text = nlohmann::json(template_pseudoqueries(parse_profile_lines(prompt), count)).dump();
            break;
        }
        case GenerationRole::query_expand: {
            auto q = prompts::field_after(prompt, prompts::kQueryMarker).value_or("");
            result.text = fmt::format(
                "The request \"{}\" asks for tabular datasets about {}. Useful tables would hold measurements, "
                "records and attributes describing {}.",
                q, q, q);
            break;
        }
        case GenerationRole::query_decompose: {
            auto q = prompts::field_after(prompt, prompts::kQueryMarker).value_or("");
            result.text = nlohmann::json(split_clauses(q)).dump();
            break;
        }
        case GenerationRole::rerank:
            result.text = rerank_answer(prompt);
            break;
    }
    result.prompt_tokens = text::word_count(prompt);
    result.output_tokens = text::word_count(result.text);
    if (result.output_tokens > static_cast<std::size_t>(request.max_output_tokens)) {
        result.text = text::truncate_words(result.text, static_cast<std::size_t>(request.max_output_tokens));
        result.output_tokens = static_cast<std::size_t>(request.max_output_tokens);
        result.truncated = true;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Remote providers

ConcurrencyLimiter::ConcurrencyLimiter(std::size_t limit) : available_(std::max<std::size_t>(1, limit)) {}

void ConcurrencyLimiter::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return available_ > 0; });
    --available_;
}

void ConcurrencyLimiter::release() {
    {
        std::lock_guard lock(mutex_);
        ++available_;
    }
    cv_.notify_one();
}

namespace {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint URL needs a scheme: '" + url + "'");
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpJsonClient::HttpJsonClient(const RemoteSettings& settings)
    : settings_(settings), limiter_(settings.max_in_flight) {}

std::string HttpJsonClient::post(const std::string& url, const std::string& body) {
    if (url.empty()) throw ConfigError("remote provider endpoint is not configured");
    auto target = split_url(url);
    ConcurrencyLimiter::Slot slot(limiter_);

    httplib::Headers headers;
    if (!settings_.api_key.empty()) headers.emplace("Authorization", "Bearer " + settings_.api_key);

    std::string last_error;
    auto backoff = settings_.initial_backoff;
    const int attempts = std::max(1, settings_.max_attempts);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        httplib::Client client(target.origin);
        client.set_connection_timeout(settings_.timeout);
        client.set_read_timeout(settings_.timeout);
        client.set_write_timeout(settings_.timeout);
        auto res = client.Post(target.path, headers, body, "application/json");
        if (res && res->status >= 200 && res->status < 300) return res->body;
        if (res) {
            last_error = fmt::format("HTTP {}", res->status);
            bool transient = res->status >= 500 || res->status == 429 || res->status == 408;
            if (!transient) throw ProviderUnavailable(fmt::format("{} from {}: {}", last_error, url, res->body));
        } else {
            last_error = httplib::to_string(res.error());
        }
        spdlog::warn("provider call to {} failed (attempt {}/{}): {}", url, attempt, attempts, last_error);
        if (attempt < attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw ProviderUnavailable(fmt::format("{} unavailable after {} attempts: {}", url, attempts, last_error));
}

RemoteGenerator::RemoteGenerator(RemoteSettings settings) : settings_(std::move(settings)), client_(settings_) {}

std::string RemoteGenerator::id() const {
    return "remote:" + settings_.generation_model;
}

GenerationResult RemoteGenerator::generate(const GenerationRequest& request) {
    validate_request(request);
    nlohmann::json body = {{"model", settings_.generation_model},
                           {"role", std::string(to_string(request.role))},
                           {"prompt", request.prompt},
                           {"max_output_tokens", request.max_output_tokens},
                           {"temperature", request.temperature}};
    auto response = nlohmann::json::parse(client_.post(settings_.generation_url, body.dump()), nullptr, false);
    if (response.is_discarded() || !response.contains("text") || !response["text"].is_string()) {
        throw ProviderUnavailable("generation endpoint returned a malformed response");
    }
    GenerationResult result;
    result.text = response["text"].get<std::string>();
    result.truncated = response.value("truncated", false);
    if (response.contains("usage") && response["usage"].is_object()) {
        result.prompt_tokens = response["usage"].value("prompt_tokens", std::size_t{0});
        result.output_tokens = response["usage"].value("output_tokens", std::size_t{0});
    } else {
        result.prompt_tokens = text::word_count(request.prompt);
        result.output_tokens = text::word_count(result.text);
    }
    if (result.truncated) spdlog::warn("{} output was truncated", to_string(request.role));
    return result;
}

RemoteEmbedder::RemoteEmbedder(RemoteSettings settings) : settings_(std::move(settings)), client_(settings_) {}

std::string RemoteEmbedder::id() const {
    return fmt::format("remote:{}:{}", settings_.embedding_model, settings_.embedding_dimension);
}

std::vector<EmbeddingVector> RemoteEmbedder::embed(std::span<const std::string> texts) {
    validate_texts(texts);
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    const auto batch = std::max<std::size_t>(1, settings_.embedding_batch);
    for (std::size_t start = 0; start < texts.size(); start += batch) {
        auto chunk = texts.subspan(start, std::min(batch, texts.size() - start));
        nlohmann::json body = {{"model", settings_.embedding_model},
                               {"input", std::vector<std::string>(chunk.begin(), chunk.end())}};
        auto response = nlohmann::json::parse(client_.post(settings_.embedding_url, body.dump()), nullptr, false);
        if (response.is_discarded() || !response.contains("embeddings") || !response["embeddings"].is_array() ||
            response["embeddings"].size() != chunk.size()) {
            throw ProviderUnavailable("embedding endpoint returned a malformed response");
        }
        for (const auto& row : response["embeddings"]) {
            EmbeddingVector v;
            v.values = row.get<std::vector<double>>();
            if (v.dimension() != settings_.embedding_dimension) {
                throw DimensionError(fmt::format("embedding endpoint returned dimension {}, expected {}",
                                                 v.dimension(), settings_.embedding_dimension));
            }
            if (!std::all_of(v.values.begin(), v.values.end(), [](double x) { return std::isfinite(x); })) {
                throw ProviderUnavailable("embedding endpoint returned non-finite values");
            }
            out.push_back(std::move(v));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Embedding cache

namespace {

std::string cache_key(std::string_view provider_id, std::string_view text_hash) {
    std::string key(provider_id);
    key.push_back('\t');
    key.append(text_hash);
    return key;
}

std::vector<float> to_float(const EmbeddingVector& v) {
    std::vector<float> out(v.values.size());
    std::transform(v.values.begin(), v.values.end(), out.begin(), [](double x) { return static_cast<float>(x); });
    return out;
}

EmbeddingVector from_float(const std::vector<float>& v) {
    return EmbeddingVector{std::vector<double>(v.begin(), v.end())};
}

}  // namespace

EmbeddingCache::EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(*path_);
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string_view> fields;
        std::string_view rest = line;
        for (int i = 0; i < 3; ++i) {
            auto tab = rest.find('\t');
            if (tab == std::string_view::npos) break;
            fields.push_back(rest.substr(0, tab));
            rest.remove_prefix(tab + 1);
        }
        fields.push_back(rest);
        try {
            if (fields.size() != 4) throw InvalidInput("field count");
            auto dim = std::stoul(std::string(fields[2]));
            auto bytes = hashing::base64_decode(fields[3]);
            if (bytes.size() != dim * sizeof(float)) throw InvalidInput("vector length");
            std::vector<float> values(dim);
            std::memcpy(values.data(), bytes.data(), bytes.size());
            entries_.insert_or_assign(cache_key(fields[0], fields[1]), std::move(values));
        } catch (const std::exception&) {
            ++skipped_lines_;  // a torn final append is expected after a crash
        }
    }
    if (skipped_lines_) spdlog::warn("embedding cache {}: skipped {} malformed lines", path_->string(), skipped_lines_);
}

std::string EmbeddingCache::encode_record(std::string_view provider_id, std::string_view text_hash,
                                          const EmbeddingVector& vector) {
    auto values = to_float(vector);
    std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(values.data()),
                                        values.size() * sizeof(float));
    return fmt::format("{}\t{}\t{}\t{}", provider_id, text_hash, values.size(), hashing::base64_encode(bytes));
}

std::optional<EmbeddingVector> EmbeddingCache::lookup(std::string_view provider_id, std::string_view text) const {
    auto key = cache_key(provider_id, hashing::sha256_hex(text));
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return from_float(it->second);
}

void EmbeddingCache::store(std::string_view provider_id, std::string_view text, const EmbeddingVector& vector) {
    auto hash = hashing::sha256_hex(text);
    auto key = cache_key(provider_id, hash);
    std::unique_lock lock(mutex_);
    if (entries_.count(key)) return;
    if (path_) {
        std::ofstream out(*path_, std::ios::app);
        if (!out) throw Error("cannot append to embedding cache " + path_->string());
        out << encode_record(provider_id, hash, vector) << '\n';
    }
    entries_.emplace(std::move(key), to_float(vector));
}

std::size_t EmbeddingCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

std::vector<EmbeddingVector> CachingEmbedder::embed(std::span<const std::string> texts) {
    validate_texts(texts);
    const auto provider = inner_.id();
    std::vector<std::optional<EmbeddingVector>> found(texts.size());
    std::vector<std::string> misses;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        found[i] = cache_.lookup(provider, texts[i]);
        if (!found[i] && std::find(misses.begin(), misses.end(), texts[i]) == misses.end()) {
            misses.push_back(texts[i]);
        }
    }
    if (!misses.empty()) {
        auto computed = inner_.embed(misses);
        for (std::size_t m = 0; m < misses.size(); ++m) cache_.store(provider, misses[m], computed[m]);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (!found[i]) found[i] = cache_.lookup(provider, texts[i]);
        }
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (auto& v : found) out.push_back(std::move(*v));
    return out;
}

// ---------------------------------------------------------------------------
// Instrumentation

GenerationResult InstrumentedGenerator::generate(const GenerationRequest& request) {
    auto start = std::chrono::steady_clock::now();
    ++stats_.calls;
    try {
        auto result = inner_.generate(request);
        auto micros = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start);
        stats_.prompt_tokens += result.prompt_tokens;
        stats_.output_tokens += result.output_tokens;
        stats_.total_micros += micros.count();
        spdlog::info("provider_call kind=generate provider={} role={} prompt_tokens={} output_tokens={} "
                     "latency_ms={:.3f} truncated={}",
                     inner_.id(), to_string(request.role), result.prompt_tokens, result.output_tokens,
                     micros.count() / 1000.0, result.truncated);
        return result;
    } catch (const std::exception& e) {
        ++stats_.failures;
        spdlog::info("provider_call kind=generate provider={} role={} status=failed error=\"{}\"", inner_.id(),
                     to_string(request.role), e.what());
        throw;
    }
}

std::vector<EmbeddingVector> InstrumentedEmbedder::embed(std::span<const std::string> texts) {
    auto start = std::chrono::steady_clock::now();
    ++stats_.calls;
    try {
        auto result = inner_.embed(texts);
        auto micros = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start);
        std::size_t tokens = 0;
        for (const auto& t : texts) tokens += text::word_count(t);
        stats_.items += texts.size();
        stats_.prompt_tokens += tokens;
        stats_.total_micros += micros.count();
        spdlog::info("provider_call kind=embed provider={} texts={} input_tokens={} latency_ms={:.3f}", inner_.id(),
                     texts.size(), tokens, micros.count() / 1000.0);
        return result;
    } catch (const std::exception& e) {
        ++stats_.failures;
        spdlog::info("provider_call kind=embed provider={} status=failed error=\"{}\"", inner_.id(), e.what());
        throw;
    }
}

}  // namespace tabsearch::providers
