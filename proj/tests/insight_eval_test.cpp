#include <doctest.h>

#include <cmath>

#include "ciaf/error.hpp"
#include "ciaf/insight_eval.hpp"
#include "test_support.hpp"

using namespace ciaf;
using namespace ciaf::testing;
using nlohmann::json;

namespace {

const char* kExtractor = "Insight Perspective Extractor";
const char* kJudge = "Insight Quality judge";

const std::string kFive = "Cases rose. Deaths fell sharply. The rate is 4.5 per cent. Rich regions recovered first! "
                          "Policy mattered?";

json labels(std::vector<json> per_sentence) {
    json arr = json::array();
    for (std::size_t i = 0; i < per_sentence.size(); ++i) {
        arr.push_back({{"index", i + 1}, {"perspective", per_sentence[i]}});
    }
    return {{"sentences", arr}};
}

struct EvalHarness {
    explicit EvalHarness(std::initializer_list<MockRule> rules)
        : mock(mock_gateway(rules)), prompts(PromptSet::load(kPrompts, "eval")),
          evaluator(*mock.gateway, prompts) {}
    MockSetup mock;
    PromptSet prompts;
    InsightEvaluator evaluator;
};

}  // namespace

TEST_CASE("sentence splitting") {
    const auto s = split_sentences(kFive);
    REQUIRE(s.size() == 5);
    CHECK(s[2] == "The rate is 4.5 per cent.");
    CHECK(s[4] == "Policy mattered?");
    CHECK(split_sentences("He said \"stop.\" Then left").size() == 2);
    CHECK(split_sentences("   ").empty());
}

TEST_CASE("perspectives: three of five sentences labelled") {
    EvalHarness h({{kExtractor, labels({"trend", nullptr, "magnitude", "regional gap", "none"}).dump()}});
    const auto set = h.evaluator.extract_perspectives(kFive, "s1");
    REQUIRE(set.perspectives.size() == 3);
    CHECK(set.perspectives[0] == PerspectiveEntry{"Cases rose.", "trend"});
    CHECK(set.perspectives[2].sentence == "Rich regions recovered first!");
    CHECK(set.sample_id == "s1");

    const auto req = h.mock.backend->calls()[0].request;
    CHECK(req.temperature == 0.0);
    CHECK(req.user_prompt.find("3. The rate is 4.5 per cent.") != std::string::npos);
}

TEST_CASE("perspectives: repeated labels merge to the first sentence") {
    EvalHarness h({{kExtractor, labels({"Trend", "trend", "gap", "TREND ", "gap"}).dump()}});
    const auto set = h.evaluator.extract_perspectives(kFive);
    REQUIRE(set.perspectives.size() == 2);
    CHECK(set.perspectives[0].sentence == "Cases rose.");
    CHECK(set.perspectives[1].label == "gap");
}

TEST_CASE("perspectives: all non-insightful") {
    EvalHarness h({{kExtractor, labels({nullptr, nullptr, nullptr, nullptr, nullptr}).dump()}});
    const auto set = h.evaluator.extract_perspectives(kFive);
    CHECK(set.perspectives.empty());
    const auto d = h.evaluator.score_diversity(set);
    CHECK(d.rc == 0.0);
    CHECK(d.span == 0.0);
    CHECK(d.n_perspectives == 0);
}

TEST_CASE("perspectives: unusable replies") {
    EvalHarness h({{kExtractor, "These sentences are about trends."}});
    CHECK_THROWS_AS(h.evaluator.extract_perspectives(kFive), PerspectiveParseError);
    CHECK(h.mock.backend->call_count() == 2);
    CHECK_THROWS_AS(h.evaluator.extract_perspectives("  "), InvalidArgument);
}

TEST_CASE("out-of-range sentence indices are ignored") {
    const json reply = {{"sentences", {{{"index", 0}, {"perspective", "a"}}, {{"index", 9}, {"perspective", "b"}},
                                       {{"index", 2}, {"perspective", "c"}}}}};
    EvalHarness h({{kExtractor, reply.dump()}});
    const auto set = h.evaluator.extract_perspectives(kFive);
    REQUIRE(set.perspectives.size() == 1);
    CHECK(set.perspectives[0].label == "c");
}

TEST_CASE("judgment parsing") {
    auto q = parse_judgment(R"({"score": 5, "rationale": "Deep."})");
    CHECK(q.score == 5);
    CHECK(q.rationale == "Deep.");
    CHECK_FALSE(q.clamped);

    q = parse_judgment(R"({"score": 9, "rationale": "Off scale."})");
    CHECK(q.score == 5);
    CHECK(q.clamped);
    CHECK(q.rationale.find("clamped") != std::string::npos);

    CHECK(parse_judgment(R"({"score": 0})").score == 1);
    CHECK(parse_judgment("Score: 4. Rationale: good depth.").score == 4);
    CHECK(parse_judgment("I would rate this 2/5 overall.").score == 2);
    CHECK(parse_judgment(R"({"score": 3.6})").score == 4);
    CHECK_THROWS_AS(parse_judgment("A fine summary."), NoScoreFound);
}

TEST_CASE("quality scoring") {
    SUBCASE("scripted score") {
        EvalHarness h({{kJudge, R"({"score": 5, "rationale": "Deep."})"}});
        const auto q = h.evaluator.score_quality("Gen text.", "Ref text.", "s1");
        CHECK(q.score == 5);
        CHECK(q.judge_model_id == "mock-chat");
        CHECK(q.sample_id == "s1");
        const auto req = h.mock.backend->calls()[0].request;
        CHECK(req.temperature == 0.0);
        CHECK(req.user_prompt.find("Ref text.") != std::string::npos);
    }
    SUBCASE("no score after re-ask") {
        EvalHarness h({{kJudge, "Looks fine to me."}});
        CHECK_THROWS_AS(h.evaluator.score_quality("Gen.", "Ref."), NoScoreFound);
        CHECK(h.mock.backend->call_count() == 2);
    }
    SUBCASE("empty inputs") {
        EvalHarness h({{kJudge, "x"}});
        CHECK_THROWS_AS(h.evaluator.score_quality("", "Ref."), InvalidArgument);
        CHECK_THROWS_AS(h.evaluator.score_quality("Gen.", " "), InvalidArgument);
        CHECK(h.mock.backend->call_count() == 0);
    }
}

TEST_CASE("diversity embeds sentences, not labels") {
    MockEmbedding emb;
    emb.dim = 3;
    emb.vectors = {{"Cases rose.", {1, 0, 0}}, {"Deaths fell sharply.", {0, 1, 0}}};
    auto mock = mock_gateway({{kExtractor, "{}"}}, emb);
    const auto prompts = PromptSet::load(kPrompts, "eval");
    InsightEvaluator ev(*mock.gateway, prompts);
    PerspectiveSet set;
    set.perspectives = {{"Cases rose.", "trend"}, {"Deaths fell sharply.", "mortality"}};
    const auto d = ev.score_diversity(set);
    CHECK(d.rc == doctest::Approx(1.0));
    CHECK(d.span == doctest::Approx(1.0 - 0.5 / std::sqrt(0.5)));
    CHECK(d.n_perspectives == 2);
}

TEST_CASE("evaluate on a fixture narrative") {
    auto mock = scripted_gateway();
    const auto prompts = PromptSet::load(kPrompts, "eval");
    InsightEvaluator ev(*mock.gateway, prompts);
    ChartSummary s;
    s.sample_id = "owid-001";
    s.narrative = "Life expectancy rose steadily across the world since 1950. Africa started from a lower base but "
                  "has closed part of the gap with the global average. Gains slowed after 2000 as deaths from "
                  "infectious disease became less common. The chart covers the years 1950 to 2020.";
    const auto e = ev.evaluate(s, "Reference text.");
    CHECK(e.quality.score == 3);
    CHECK(e.diversity.n_perspectives == 3);
    CHECK(e.diversity.rc == doctest::Approx(1.0));
    CHECK(e.diversity.span == doctest::Approx(1.0 - 1.0 / std::sqrt(3.0)));
    CHECK_THROWS_AS(ev.evaluate(s, ""), InvalidArgument);
}

TEST_CASE("evaluation failures name the phase") {
    EvalHarness h({{kExtractor, labels({"a"}).dump()}, {kJudge, "no number here"}});
    ChartSummary s;
    s.sample_id = "x";
    s.narrative = "One sentence.";
    try {
        h.evaluator.evaluate(s, "Ref.");
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "quality");
        CHECK(e.inner_kind() == "NoScoreFound");
    }
}

TEST_CASE("aggregation") {
    SampleEvaluation a, b;
    a.quality.score = 3;
    a.diversity.rc = 1.0;
    b.quality.score = 5;
    b.diversity.span = 0.5;
    const auto r = aggregate({a, b}, "run");
    CHECK(r.mean_iq == 4.0);
    CHECK(r.mean_rc == 0.5);
    CHECK(r.mean_span == 0.25);
    CHECK(r.per_sample.size() == 2);
    CHECK_THROWS_AS(aggregate({}, "run"), EmptyRun);

    const auto back = sample_evaluation_from_json(to_json(a));
    CHECK(back.quality.score == 3);
    CHECK(back.diversity.rc == 1.0);
}
