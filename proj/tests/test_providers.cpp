#include <doctest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "support.hpp"
#include "tabsearch/error.hpp"
#include "tabsearch/hashing.hpp"
#include "tabsearch/prompts.hpp"
#include "tabsearch/providers.hpp"

using namespace tabsearch;
using namespace tabsearch::providers;

namespace {

// Cosine of raw trigram count vectors, no hashing.
double trigram_cosine(const std::string& a, const std::string& b) {
    std::map<std::string, double> va, vb;
    for (auto& g : character_trigrams(a)) va[g] += 1;
    for (auto& g : character_trigrams(b)) vb[g] += 1;
    double dot = 0, na = 0, nb = 0;
    for (auto& [g, x] : va) {
        na += x * x;
        if (auto it = vb.find(g); it != vb.end()) dot += x * it->second;
    }
    for (auto& [g, y] : vb) nb += y * y;
    return dot / std::sqrt(na * nb);
}

class CountingEmbedder final : public TextEmbedder {
public:
    std::string id() const override { return inner.id(); }
    std::size_t dimension() const override { return inner.dimension(); }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
        ++calls;
        items += texts.size();
        return inner.embed(texts);
    }
    OfflineEmbedder inner{32};
    std::size_t calls = 0;
    std::size_t items = 0;
};

}  // namespace

TEST_CASE("hashing primitives") {
    CHECK(hashing::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    std::vector<std::uint8_t> bytes{'h', 'i', '!', 0, 255};
    auto enc = hashing::base64_encode(bytes);
    CHECK(enc == "aGkhAP8=");
    CHECK(hashing::base64_decode(enc) == bytes);
    CHECK_THROWS_AS(hashing::base64_decode("abc"), InvalidInput);
    const std::string s = "123456789";
    CHECK(hashing::crc32({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}) == 0xCBF43926u);
}

TEST_CASE("offline embedder") {
    OfflineEmbedder e;
    CHECK(e.dimension() == 256);
    std::vector<std::string> texts{"abc", "abc"};
    auto v = e.embed(texts);
    REQUIRE(v.size() == 2);
    CHECK(v[0].values == v[1].values);
    for (const char* t : {"a", "diabetes patient age", "  MIXED   case  ", "\xc3\xa9t\xc3\xa9"}) {
        CHECK(l2_norm(e.embed_one(t)) == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(e.embed_one("Hello  World").values == e.embed_one("hello world").values);
    CHECK_THROWS_AS(e.embed(std::vector<std::string>{}), InvalidInput);
    CHECK_THROWS_AS(e.embed(std::vector<std::string>{""}), InvalidInput);
}

TEST_CASE("trigram similarity ordering matches the unhashed oracle") {
    const std::string q = "diabetes patient age", near = "diabetes dataset age", far = "rainfall station";
    CHECK(trigram_cosine(q, near) > trigram_cosine(q, far));
    OfflineEmbedder e;
    CHECK(cosine(e.embed_one(q), e.embed_one(near)) > cosine(e.embed_one(q), e.embed_one(far)));
}

TEST_CASE("offline generator is a pure function of the prompt") {
    OfflineGenerator g;
    GenerationRequest r{GenerationRole::query_expand, prompts::expansion_prompt("diabetes datasets", 200)};
    auto a = g.generate(r), b = g.generate(r);
    CHECK(a.text == b.text);
    CHECK(a.text.find("diabetes") != std::string::npos);

    GenerationRequest d{GenerationRole::query_decompose, prompts::decomposition_prompt("rainfall and crop yield", "", 5)};
    auto list = prompts::parse_string_list(g.generate(d).text);
    REQUIRE(list);
    CHECK(list->size() == 2);

    GenerationRequest bad{GenerationRole::rerank, ""};
    CHECK_THROWS_AS(g.generate(bad), InvalidInput);
}

TEST_CASE("offline pseudoqueries cycle over columns") {
    std::string profile =
        "**age**: Data is of type integer. There are 3 unique values. This column is numeric. Mean: 2.0, Max: 3, "
        "Min: 1. Coverage spans from 1 to 3.0.\n"
        "**blood_pressure**: Data is of type integer. There are 2 unique values. This column is numeric. Mean: 70.0, "
        "Max: 80, Min: 60. Coverage spans from 60 to 80.0.\n"
        "**outcome**: Data is of type categorical. There are 2 unique values. Top values: yes, no.";
    OfflineGenerator g;
    GenerationRequest r{GenerationRole::pseudoquery_gen, prompts::pseudoquery_prompt(profile, 10)};
    auto list = prompts::parse_string_list(g.generate(r).text);
    REQUIRE(list);
    CHECK(list->size() == 10);
    CHECK(list->front().rfind("Search for a dataset about age and blood pressure", 0) == 0);
    std::set<std::string> distinct(list->begin(), list->end());
    CHECK(distinct.size() == 10);
}

TEST_CASE("output truncation is flagged") {
    OfflineGenerator g;
    GenerationRequest r{GenerationRole::query_expand, prompts::expansion_prompt("a b c d e f g h", 200), 4};
    auto out = g.generate(r);
    CHECK(out.truncated);
}

TEST_CASE("embedding cache round trip and warm hits") {
    testsupport::TempDir dir;
    auto path = dir / "cache.tsv";
    CountingEmbedder inner;
    std::vector<std::string> texts{"alpha", "beta", "alpha"};
    std::vector<EmbeddingVector> cold;
    {
        EmbeddingCache cache(path);
        CachingEmbedder caching(inner, cache);
        cold = caching.embed(texts);
        CHECK(inner.calls == 1);
        CHECK(inner.items == 2);
        CHECK(cache.size() == 2);
    }
    EmbeddingCache reopened(path);
    CHECK(reopened.size() == 2);
    CachingEmbedder warm(inner, reopened);
    auto again = warm.embed(texts);
    CHECK(inner.calls == 1);
    for (std::size_t i = 0; i < texts.size(); ++i) CHECK(again[i].values == cold[i].values);

    auto line = testsupport::read_file(path);
    auto tab1 = line.find('\t');
    CHECK(line.substr(0, tab1) == inner.id());
    CHECK(line.substr(tab1 + 1, 64) == hashing::sha256_hex("alpha"));

    testsupport::write_file(dir / "bad.tsv", line + "garbage line\nx\ty\t3\t!!!\n");
    EmbeddingCache damaged(dir / "bad.tsv");
    CHECK(damaged.size() == 2);
    CHECK(damaged.skipped_lines() == 2);
}

TEST_CASE("remote generator retries then gives up") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/gen", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 500;
        res.set_content("boom", "text/plain");
    });
    server.Post("/ok", [&](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        nlohmann::json out{{"text", "echo " + body["prompt"].get<std::string>()},
                           {"usage", {{"prompt_tokens", 3}, {"output_tokens", 2}}}};
        res.set_content(out.dump(), "application/json");
    });
    server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        nlohmann::json vectors = nlohmann::json::array();
        for (std::size_t i = 0; i < body["input"].size(); ++i) vectors.push_back({1.0, 0.0, double(i)});
        res.set_content(nlohmann::json{{"embeddings", vectors}}.dump(), "application/json");
    });
    server.Post("/auth", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 401;
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteSettings s;
    s.initial_backoff = std::chrono::milliseconds(5);
    s.generation_url = fmt::format("http://127.0.0.1:{}/gen", port);
    s.embedding_url = fmt::format("http://127.0.0.1:{}/embed", port);
    s.embedding_dimension = 3;

    GenerationRequest req{GenerationRole::rerank, "hello"};
    RemoteGenerator failing(s);
    CHECK_THROWS_AS(failing.generate(req), ProviderUnavailable);
    CHECK(hits.load() == 3);

    hits = 0;
    s.generation_url = fmt::format("http://127.0.0.1:{}/auth", port);
    RemoteGenerator unauthorized(s);
    CHECK_THROWS_AS(unauthorized.generate(req), ProviderUnavailable);
    CHECK(hits.load() == 1);

    s.generation_url = fmt::format("http://127.0.0.1:{}/ok", port);
    RemoteGenerator ok(s);
    auto out = ok.generate(req);
    CHECK(out.text == "echo hello");
    CHECK(out.prompt_tokens == 3);

    RemoteEmbedder emb(s);
    std::vector<std::string> texts{"a", "b"};
    auto v = emb.embed(texts);
    REQUIRE(v.size() == 2);
    CHECK(v[1].values[2] == 1.0);

    s.embedding_dimension = 4;
    RemoteEmbedder wrong_dim(s);
    CHECK_THROWS_AS(wrong_dim.embed(texts), DimensionError);

    server.stop();
    worker.join();
}

TEST_CASE("concurrency limiter bounds in-flight work") {
    ConcurrencyLimiter limiter(2);
    std::atomic<int> inside{0}, peak{0};
    std::vector<std::jthread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 50; ++i) {
                ConcurrencyLimiter::Slot slot(limiter);
                int now = ++inside;
                int seen = peak.load();
                while (now > seen && !peak.compare_exchange_weak(seen, now)) {
                }
                --inside;
            }
        });
    }
    threads.clear();
    CHECK(peak.load() <= 2);
}
