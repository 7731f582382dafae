#include <doctest.h>

#include "ciaf/error.hpp"
#include "ciaf/structured.hpp"
#include "fuzz_support.hpp"

using namespace ciaf;
using namespace ciaf::testing;
using nlohmann::json;

namespace {

Shape perspectives_shape() {
    return Shape::object("Plan", {{"perspectives", Shape::array_of(Shape::string())}});
}

}  // namespace

TEST_CASE("fenced JSON after prose") {
    const auto j = parse_structured("Here you go:\n```json\n{\"perspectives\": [\"trend\", \"gap\"]}\n```\nThanks",
                                    perspectives_shape());
    CHECK(j["perspectives"] == json::array({"trend", "gap"}));
}

TEST_CASE("no structure") {
    CHECK_THROWS_AS(parse_structured("no structure here", perspectives_shape()), NoStructureFound);
    CHECK_THROWS_AS(parse_structured("", perspectives_shape()), NoStructureFound);
    CHECK_THROWS_AS(parse_structured("{ unbalanced", perspectives_shape()), NoStructureFound);
}

TEST_CASE("schema mismatch names the missing field") {
    try {
        parse_structured("{\"insights\": []}", perspectives_shape());
        FAIL("expected SchemaMismatch");
    } catch (const SchemaMismatch& e) {
        REQUIRE_FALSE(e.fields().empty());
        CHECK(e.fields()[0] == "perspectives");
    }
}

TEST_CASE("first conforming candidate wins") {
    const auto j = parse_structured("{\"other\": 1} then {\"perspectives\": [\"a\"]}", perspectives_shape());
    CHECK(j["perspectives"][0] == "a");
}

TEST_CASE("braces inside strings do not confuse the scanner") {
    const auto j = parse_structured(R"(x {"perspectives": ["a } b", "c \" {"]} y)", perspectives_shape());
    CHECK(j["perspectives"][1] == "c \" {");
}

TEST_CASE("violation paths") {
    const Shape s = Shape::object(
        "S", {{"insights", Shape::array_of(Shape::object("I", {{"text", Shape::string()}}))},
              {"n", Shape::integer(), false}});
    CHECK(schema_violations(json::parse(R"({"insights": [{"text": "a"}]})"), s).empty());
    auto v = schema_violations(json::parse(R"({"insights": [{"text": "a"}, {"text": 3}]})"), s);
    REQUIRE(v.size() == 1);
    CHECK(v[0] == "insights[1].text");
    v = schema_violations(json::parse(R"({"insights": [], "n": 1.5, "extra": true})"), s);
    CHECK(v.size() == 2);
    CHECK(schema_violations(json::parse(R"({"insights": null})"), s).size() == 1);
}

TEST_CASE("allow_extra and nullable") {
    const Shape s = Shape::object("S", {{"a", Shape::string().or_null()}}, true);
    CHECK(schema_violations(json::parse(R"({"a": null, "b": 1})"), s).empty());
}

TEST_CASE("top-level arrays") {
    const auto j = parse_structured("list: [1, 2, 3].", Shape::array_of(Shape::integer()));
    CHECK(j.size() == 3);
}

TEST_CASE("fuzzed values round-trip through chatter") {
    Fuzzer fz(42);
    const Shape shapes[] = {plan_like_shape(), insight_like_shape()};
    for (int i = 0; i < 200; ++i) {
        const auto& shape = shapes[i % 2];
        const auto v = fz.value(shape);
        const auto text = fz.wrap(v);
        INFO("input: " << text);
        CHECK(parse_structured(text, shape) == v);
    }
}

TEST_CASE("malformed inputs fail with a parse error only") {
    Fuzzer fz(7);
    const auto shape = plan_like_shape();
    for (int i = 0; i < 200; ++i) {
        std::string text = fz.wrap(fz.value(shape));
        switch (i % 4) {
            case 0: text = text.substr(0, text.find_last_of('}')); break;  // truncated
            case 1: text = "{\"domain\": 3, \"perspectives\": " + fz.text() + "}"; break;
            case 2: text = fz.text(); break;
            default: text = "{\"domain\": \"x\"}"; break;
        }
        INFO("input: " << text);
        bool rejected = false;
        try {
            parse_structured(text, shape);
        } catch (const NoStructureFound&) {
            rejected = true;
        } catch (const SchemaMismatch&) {
            rejected = true;
        }
        CHECK(rejected);
    }
}
