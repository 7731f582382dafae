#include <doctest.h>

#include "ciaf/error.hpp"
#include "ciaf/insight_eval.hpp"
#include "ciaf/pipeline.hpp"
#include "ciaf/prompts.hpp"
#include "test_support.hpp"

using namespace ciaf;
using namespace ciaf::testing;

TEST_CASE("placeholders render") {
    const auto t = PromptTemplate::parse("Hello {{ name }}, {{name}} again. {{! hidden }}bye");
    CHECK(t.render({{"name", "Ada"}}) == "Hello Ada, Ada again. bye");
    CHECK(t.placeholders() == std::vector<std::string>{"name"});
}

TEST_CASE("comment-only lines vanish") {
    const auto t = PromptTemplate::parse("{{! header }}\nline one\n  {{! note }}\nline two\n");
    CHECK(t.render({}) == "line one\nline two\n");
}

TEST_CASE("template errors") {
    CHECK_THROWS_AS(PromptTemplate::parse("{{open").render({}), TemplateError);
    CHECK_THROWS_AS(PromptTemplate::parse("{{}}"), TemplateError);
    CHECK_THROWS_AS(PromptTemplate::parse("{{x}}").render({}), TemplateError);
}

TEST_CASE("bundled prompt sets are complete") {
    const auto def = PromptSet::load(kPrompts, "default");
    CHECK(def.id() == "default");
    CHECK_NOTHROW(def.require(pipeline_templates(), pipeline_resources()));
    CHECK(def.resource("planner_examples").is_array());

    const auto eval = PromptSet::load(kPrompts, "eval");
    CHECK_NOTHROW(eval.require(eval_templates()));
}

TEST_CASE("prompt set loading") {
    TempDir dir;
    write_file(dir / "v1" / "a.system.txt", "sys {{x}}");
    write_file(dir / "v1" / "examples.json", "[1, 2]");
    const auto set = PromptSet::load(dir.path(), "v1");
    CHECK(set.has("a.system"));
    CHECK(set.has("examples"));
    CHECK(set.get("a.system").render({{"x", "1"}}) == "sys 1");
    CHECK(set.resource("examples").size() == 2);
    CHECK_THROWS_AS(set.get("missing"), TemplateError);
    CHECK_THROWS_AS(set.require({"a.system", "b.user"}), TemplateError);

    CHECK_THROWS_AS(PromptSet::load(dir.path(), "nope"), IoError);
    CHECK_THROWS_AS(PromptSet::load(dir.path(), "../v1"), InvalidArgument);
    write_file(dir / "bad" / "r.json", "{oops");
    CHECK_THROWS_AS(PromptSet::load(dir.path(), "bad"), TemplateError);
}
