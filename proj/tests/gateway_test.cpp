#include <doctest.h>

#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>

#include "ciaf/error.hpp"
#include "ciaf/gateway.hpp"
#include "ciaf/mock_backend.hpp"
#include "ciaf/response_cache.hpp"
#include "test_support.hpp"

using namespace ciaf;
using namespace ciaf::testing;

namespace {

ChatRequest hello(double temperature = 0.0) {
    ChatRequest r;
    r.system_prompt = "sys";
    r.user_prompt = "Say hello";
    r.temperature = temperature;
    return r;
}

}  // namespace

TEST_CASE("mock chat answers from the first matching rule") {
    auto m = mock_gateway({{"hello", "OK"}, {"Say", "second"}});
    const auto r = m.gateway->chat(hello());
    CHECK(r.text == "OK");
    CHECK(r.model_id == "mock-chat");
    CHECK_FALSE(r.cached);
    CHECK(r.cache_key.size() == 64);
    REQUIRE(m.backend->call_count() == 1);
    CHECK(m.backend->calls()[0].rule_index == 0);
    CHECK(m.gateway->usage_totals().output == 1);
}

TEST_CASE("mock rules with extra substrings") {
    MockRule narrow{"hello", "narrow"};
    narrow.also = {"missing"};
    auto m = mock_gateway({narrow, {"hello", "wide"}});
    CHECK(m.gateway->chat(hello()).text == "wide");
}

TEST_CASE("no matching rule") {
    auto m = mock_gateway({{"goodbye", "x"}});
    CHECK_THROWS_AS(m.gateway->chat(hello()), NoRuleMatched);
    CHECK_THROWS_AS(mock_program({}), InvalidArgument);
}

TEST_CASE("request validation") {
    auto m = mock_gateway({{"hello", "OK"}});
    CHECK_THROWS_AS(m.gateway->chat(hello(2.5)), InvalidArgument);
    auto r = hello();
    r.max_output_tokens = 0;
    CHECK_THROWS_AS(m.gateway->chat(r), InvalidArgument);
}

TEST_CASE("temperature 0 responses are cached, also across restarts") {
    TempDir dir;
    auto m = mock_gateway({{"hello", "OK"}}, {}, dir.path());
    const auto first = m.gateway->chat(hello());
    const auto second = m.gateway->chat(hello());
    CHECK_FALSE(first.cached);
    CHECK(second.cached);
    CHECK(second.text == "OK");
    CHECK(m.backend->call_count() == 1);

    auto restarted = mock_gateway({{"hello", "DIFFERENT"}}, {}, dir.path());
    const auto third = restarted.gateway->chat(hello());
    CHECK(third.cached);
    CHECK(third.text == "OK");
    CHECK(restarted.backend->call_count() == 0);

    const auto file = dir.path() / first.cache_key.substr(0, 2) / (first.cache_key + ".json");
    CHECK(std::filesystem::exists(file));
}

TEST_CASE("sampled responses bypass the cache unless cache_all") {
    TempDir dir;
    auto m = mock_gateway({{"hello", "OK"}}, {}, dir.path());
    m.gateway->chat(hello(0.7));
    m.gateway->chat(hello(0.7));
    CHECK(m.backend->call_count() == 2);

    auto opts = quiet_options(dir.path() / "all");
    opts.cache_all = true;
    auto backend = mock_program({{"hello", "OK"}});
    Gateway g(backend, opts);
    g.chat(hello(0.7));
    CHECK(g.chat(hello(0.7)).cached);
    CHECK(backend->call_count() == 1);
}

TEST_CASE("cache key covers every request field") {
    auto m = mock_gateway({{"hello", "OK"}});
    const auto base = m.gateway->cache_key(hello());
    CHECK(m.gateway->cache_key(hello()) == base);

    auto r = hello();
    r.cache_namespace = "v2";
    CHECK(m.gateway->cache_key(r) != base);
    r = hello();
    r.max_output_tokens = 10;
    CHECK(m.gateway->cache_key(r) != base);
    r = hello();
    r.image = ImagePayload{{1, 2, 3}, "image/png"};
    CHECK(m.gateway->cache_key(r) != base);
    r = hello();
    r.model_id = "other";
    CHECK(m.gateway->cache_key(r) != base);
    // field boundaries matter
    ChatRequest a = hello(), b = hello();
    a.system_prompt = "ab";
    a.user_prompt = "c";
    b.system_prompt = "a";
    b.user_prompt = "bc";
    CHECK(m.gateway->cache_key(a) != m.gateway->cache_key(b));
}

TEST_CASE("transient failures are retried up to the limit") {
    std::vector<std::chrono::milliseconds> sleeps;
    auto opts = quiet_options();
    opts.retry.initial_backoff = std::chrono::milliseconds(1000);
    opts.retry.sleep = [&](std::chrono::milliseconds d) { sleeps.push_back(d); };

    SUBCASE("three failures exhaust two retries") {
        MockRule r{"hello", "OK", 3};
        auto backend = mock_program({r});
        Gateway g(backend, opts);
        CHECK_THROWS_AS(g.chat(hello()), TransportError);
        CHECK(backend->call_count() == 3);
        REQUIRE(sleeps.size() == 2);
        CHECK(sleeps[0].count() == 1000);
        CHECK(sleeps[1].count() == 2000);
    }
    SUBCASE("two failures then success") {
        MockRule r{"hello", "OK", 2, MockFailure::timeout};
        auto backend = mock_program({r});
        Gateway g(backend, opts);
        CHECK(g.chat(hello()).text == "OK");
        CHECK(backend->call_count() == 3);
    }
    SUBCASE("refusals are not retried") {
        MockRule r{"hello", "OK", -1, MockFailure::refusal};
        auto backend = mock_program({r});
        Gateway g(backend, opts);
        CHECK_THROWS_AS(g.chat(hello()), BackendRefusal);
        CHECK(backend->call_count() == 1);
        CHECK(sleeps.empty());
    }
}

TEST_CASE("embeddings") {
    MockEmbedding emb;
    emb.dim = 8;
    emb.seed = 3;
    emb.vectors["fixed"] = {1.0, 2.0};
    auto m = mock_gateway({{"x", "y"}}, emb);

    const auto v = m.gateway->embed({"alpha", "beta", "fixed"});
    REQUIRE(v.size() == 3);
    for (const auto& e : v) {
        CHECK(e.values.size() == 8);
        CHECK(e.model_id == "mock-embed");
    }
    CHECK(v[2].values[0] == 1.0);
    CHECK(v[2].values[1] == 2.0);
    CHECK(v[2].values[7] == 0.0);
    for (double x : v[0].values) {
        CHECK(x >= -1.0);
        CHECK(x < 1.0);
    }
    CHECK(v[0].values != v[1].values);

    // deterministic across calls and backend instances
    auto again = mock_gateway({{"x", "y"}}, emb);
    CHECK(again.gateway->embed({"alpha"})[0].values == v[0].values);

    CHECK_THROWS_AS(m.gateway->embed({}), EmptyInput);
    CHECK_THROWS_AS(m.gateway->embed({"ok", "  "}), EmptyInput);
}

TEST_CASE("in-flight limiter bounds concurrency") {
    auto opts = quiet_options();
    opts.max_in_flight = 2;
    auto backend = mock_program({{"hello", "OK"}});
    Gateway g(backend, opts);
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([&] {
            for (int k = 0; k < 20; ++k) g.chat(hello());
        });
    }
    for (auto& t : threads) t.join();
    CHECK(backend->call_count() == 160);
    CHECK(g.limiter().peak() <= 2);
    CHECK(g.limiter().peak() >= 1);
}

TEST_CASE("response cache round trip") {
    TempDir dir;
    ResponseCache cache(dir.path());
    CHECK_FALSE(cache.get("abcd").has_value());
    cache.put({"abcd", "m", "text", 3, 4, {}});
    const auto hit = cache.get("abcd");
    REQUIRE(hit.has_value());
    CHECK(hit->text == "text");
    CHECK(hit->output_tokens == 4);
    CHECK_FALSE(hit->timestamp.empty());
}

TEST_CASE("mock script loading") {
    TempDir dir;
    write_file(dir / "s.json", R"({"rules": [
        {"match": ["a", "b"], "reply": {"k": 1}},
        {"match": "a", "reply": "plain", "fail_times": 1, "failure": "timeout"}],
      "embedding": {"dim": 4, "seed": 1, "vectors": {"t": [1]}}})");
    auto backend = load_mock_script(dir / "s.json");
    Gateway g(backend, quiet_options());
    ChatRequest r;
    r.user_prompt = "a b";
    CHECK(nlohmann::json::parse(g.chat(r).text) == nlohmann::json{{"k", 1}});
    r.user_prompt = "a";
    CHECK(g.chat(r).text == "plain");
    CHECK(g.embed({"t"})[0].values == std::vector<double>{1, 0, 0, 0});

    write_file(dir / "bad.json", R"({"rules": [{"match": "a", "reply": "x", "failure": "boom"}]})");
    CHECK_THROWS_AS(load_mock_script(dir / "bad.json"), InvalidArgument);
}
