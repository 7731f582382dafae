#include <doctest.h>

#include "ciaf/corpus.hpp"
#include "ciaf/digest.hpp"
#include "ciaf/error.hpp"
#include "test_support.hpp"

using namespace ciaf;
using namespace ciaf::testing;

namespace {

std::string record(const std::string& id, const std::string& image, const std::string& extra = {}) {
    return R"({"id": ")" + id + R"(", "image_path": ")" + image +
           R"(", "title": "T", "chart_type": "line", "domain_label": "health", "reference_summary": "Something rose.")" +
           extra + "}\n";
}

std::string img(const std::string& name) { return (kFixtures / "images" / name).string(); }

}  // namespace

TEST_CASE("fixture manifest loads three samples in order") {
    const auto m = load_manifest(kFixtures / "manifest.jsonl");
    REQUIRE(m.samples.size() == 3);
    CHECK(m.manifest_version == 1);
    CHECK(m.samples[0].id == "owid-001");
    CHECK(m.samples[1].chart_type == ChartType::bar);
    CHECK(m.samples[2].domain_label == "energy");
    CHECK(m.samples[0].source_url.has_value());
    CHECK_FALSE(m.samples[1].source_url.has_value());
    CHECK(m.samples[0].image_path.is_absolute());
    CHECK(m.find("owid-003") != nullptr);
    CHECK(m.find("nope") == nullptr);
}

TEST_CASE("manifest version header") {
    const auto m = load_manifest(kFixtures / "manifest_all.jsonl");
    CHECK(m.manifest_version == 2);
    CHECK(m.samples.size() == 5);
}

TEST_CASE("duplicate ids are rejected") {
    const auto text = record("owid-001", img("owid-001.png")) + record("owid-001", img("owid-002.png"));
    try {
        parse_manifest(text, kFixtures);
        FAIL("expected DuplicateId");
    } catch (const DuplicateId& e) {
        CHECK(e.id() == "owid-001");
    }
}

TEST_CASE("missing field reports its line") {
    std::string bad = R"({"id": "b", "image_path": ")" + img("owid-002.png") +
                      R"(", "chart_type": "bar", "domain_label": "x", "reference_summary": "A thing.")" + "}\n";
    const auto text = record("a", img("owid-001.png")) + "\n" + bad;
    try {
        parse_manifest(text, kFixtures);
        FAIL("expected MalformedRecord");
    } catch (const MalformedRecord& e) {
        CHECK(e.line_no() == 3);
        CHECK(e.reason().find("title") != std::string::npos);
    }
}

TEST_CASE("malformed records") {
    CHECK_THROWS_AS(parse_manifest("{not json\n", kFixtures), MalformedRecord);
    CHECK_THROWS_AS(parse_manifest("[1,2]\n", kFixtures), MalformedRecord);
    // chart_type outside the enumeration
    auto text = record("a", img("owid-001.png"));
    text.replace(text.find("\"line\""), 6, "\"pie\"");
    CHECK_THROWS_AS(parse_manifest(text, kFixtures), MalformedRecord);
    // reference without a sentence
    text = record("a", img("owid-001.png"));
    text.replace(text.find("Something rose."), 15, "no sentence");
    CHECK_THROWS_AS(parse_manifest(text, kFixtures), MalformedRecord);
}

TEST_CASE("unknown fields are tolerated") {
    const auto m = parse_manifest(record("a", img("owid-001.png"), R"(, "extra": 1)"), kFixtures);
    CHECK(m.samples.size() == 1);
}

TEST_CASE("missing image") {
    try {
        parse_manifest(record("a", "images/nowhere.png"), kFixtures);
        FAIL("expected MissingImage");
    } catch (const MissingImage& e) {
        CHECK(e.path().find("nowhere.png") != std::string::npos);
    }
}

TEST_CASE("unsupported image format") {
    TempDir dir;
    write_file(dir / "chart.gif", "GIF89a\x01\x00\x01\x00");
    CHECK_THROWS_AS(parse_manifest(record("a", "chart.gif"), dir.path()), UnsupportedImageFormat);
    write_file(dir / "trunc.png", "\x89PNG");
    CHECK_THROWS_AS(parse_manifest(record("a", "trunc.png"), dir.path()), UnsupportedImageFormat);
}

TEST_CASE("image probing reads dimensions") {
    const auto png = probe_image_file(kFixtures / "images" / "owid-001.png");
    CHECK(png.format == ImageFormat::png);
    CHECK(png.media_type() == "image/png");
    CHECK(png.width > 0);
    CHECK(png.height > 0);
    const auto jpg = probe_image_file(kFixtures / "images" / "owid-003.jpg");
    CHECK(jpg.format == ImageFormat::jpeg);
    CHECK(jpg.media_type() == "image/jpeg");
    CHECK(jpg.width > 0);
}

TEST_CASE("digests") {
    CHECK(sha256_hex(std::string_view{}) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex(std::string_view{"abc"}) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    TempDir dir;
    write_file(dir / "empty.bin", "");
    CHECK(sha256_file(dir / "empty.bin") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK_THROWS_AS(sha256_file(dir / "absent.bin"), MissingImage);

    const std::string s = "hello";
    const std::vector<std::uint8_t> bytes(s.begin(), s.end());
    CHECK(base64_encode(bytes) == "aGVsbG8=");
}

TEST_CASE("chart type names round-trip") {
    for (auto t : {ChartType::line, ChartType::bar, ChartType::area, ChartType::scatter, ChartType::map,
                   ChartType::other}) {
        CHECK(parse_chart_type(to_string(t)) == t);
    }
    CHECK_FALSE(parse_chart_type("pie").has_value());
}
