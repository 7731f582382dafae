#include "ciaf/corpus.hpp"

#include <array>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "ciaf/digest.hpp"
#include "ciaf/error.hpp"

namespace ciaf {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 6> kChartTypeNames = {"line", "bar", "area", "scatter", "map", "other"};

const std::set<std::string, std::less<>> kKnownFields = {
    "id", "image_path", "title", "chart_type", "domain_label", "reference_summary", "source_url"};

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
           (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

std::uint16_t read_be16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

ImageInfo probe_png(std::span<const std::uint8_t> b, const std::string& label) {
    // signature(8) + IHDR length(4) + "IHDR"(4) + width(4) + height(4)
    if (b.size() < 24) throw UnsupportedImageFormat(label, "truncated PNG header");
    if (b[12] != 'I' || b[13] != 'H' || b[14] != 'D' || b[15] != 'R') {
        throw UnsupportedImageFormat(label, "PNG without leading IHDR chunk");
    }
    ImageInfo info{ImageFormat::png, read_be32(b, 16), read_be32(b, 20)};
    if (info.width == 0 || info.height == 0) throw UnsupportedImageFormat(label, "PNG with zero dimension");
    return info;
}

bool is_sof_marker(std::uint8_t m) {
    return m >= 0xC0 && m <= 0xCF && m != 0xC4 && m != 0xC8 && m != 0xCC;
}

ImageInfo probe_jpeg(std::span<const std::uint8_t> b, const std::string& label) {
    std::size_t pos = 2;
    while (pos + 1 < b.size()) {
        if (b[pos] != 0xFF) throw UnsupportedImageFormat(label, "corrupt JPEG marker stream");
        std::uint8_t marker = b[pos + 1];
        if (marker == 0xFF) {  // fill byte
            ++pos;
            continue;
        }
        pos += 2;
        if (marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) continue;
        if (marker == 0xD9 || marker == 0xDA) break;
        if (pos + 2 > b.size()) break;
        const std::uint16_t seg_len = read_be16(b, pos);
        if (seg_len < 2) throw UnsupportedImageFormat(label, "corrupt JPEG segment length");
        if (is_sof_marker(marker)) {
            if (pos + 7 > b.size()) break;
            ImageInfo info{ImageFormat::jpeg, read_be16(b, pos + 5), read_be16(b, pos + 3)};
            if (info.width == 0 || info.height == 0) {
                throw UnsupportedImageFormat(label, "JPEG with zero dimension");
            }
            return info;
        }
        pos += seg_len;
    }
    throw UnsupportedImageFormat(label, "JPEG without frame header");
}

std::string require_string(const json& rec, const char* field, std::size_t line_no, bool allow_empty = false) {
    auto it = rec.find(field);
    if (it == rec.end() || it->is_null()) {
        throw MalformedRecord(line_no, std::string("missing field ") + field);
    }
    if (!it->is_string()) throw MalformedRecord(line_no, std::string("field ") + field + " must be a string");
    auto value = it->get<std::string>();
    if (!allow_empty && value.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw MalformedRecord(line_no, std::string("field ") + field + " is empty");
    }
    return value;
}

ChartSample parse_record(const json& rec, std::size_t line_no, const std::filesystem::path& base_dir) {
    ChartSample s;
    s.id = require_string(rec, "id", line_no);
    std::filesystem::path image = require_string(rec, "image_path", line_no);
    s.image_path = image.is_absolute() ? image : base_dir / image;
    s.title = require_string(rec, "title", line_no, true);

    const auto type_name = require_string(rec, "chart_type", line_no);
    auto type = parse_chart_type(type_name);
    if (!type) throw MalformedRecord(line_no, "unknown chart_type '" + type_name + "'");
    s.chart_type = *type;

    s.domain_label = require_string(rec, "domain_label", line_no);
    s.reference_summary = require_string(rec, "reference_summary", line_no);
    if (!has_sentence(s.reference_summary)) {
        throw MalformedRecord(line_no, "reference_summary has no complete sentence");
    }

    if (auto it = rec.find("source_url"); it != rec.end() && !it->is_null()) {
        if (!it->is_string()) throw MalformedRecord(line_no, "field source_url must be a string");
        s.source_url = it->get<std::string>();
    }

    for (const auto& [key, _] : rec.items()) {
        if (!kKnownFields.contains(key)) {
            spdlog::warn("manifest line {}: ignoring unknown field '{}'", line_no, key);
        }
    }
    return s;
}

}  // namespace

std::string_view to_string(ChartType type) { return kChartTypeNames[static_cast<std::size_t>(type)]; }

std::optional<ChartType> parse_chart_type(std::string_view text) {
    for (std::size_t i = 0; i < kChartTypeNames.size(); ++i) {
        if (kChartTypeNames[i] == text) return static_cast<ChartType>(i);
    }
    return std::nullopt;
}

std::string ImageInfo::media_type() const { return format == ImageFormat::png ? "image/png" : "image/jpeg"; }

ImageInfo probe_image(std::span<const std::uint8_t> bytes, const std::string& label) {
    static constexpr std::array<std::uint8_t, 8> kPngSig = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() >= kPngSig.size() && std::equal(kPngSig.begin(), kPngSig.end(), bytes.begin())) {
        return probe_png(bytes, label);
    }
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
        return probe_jpeg(bytes, label);
    }
    throw UnsupportedImageFormat(label, "not a PNG or JPEG");
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingImage(path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ImageInfo probe_image_file(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) throw MissingImage(path.string());
    // Headers of both formats sit near the start, but JPEG may carry large
    // EXIF/ICC segments before the frame header, so read the whole file.
    const auto bytes = read_file_bytes(path);
    return probe_image(bytes, path.string());
}

bool has_sentence(std::string_view text) { return text.find_first_of(".!?") != std::string_view::npos; }

const ChartSample* CorpusManifest::find(std::string_view id) const {
    for (const auto& s : samples) {
        if (s.id == id) return &s;
    }
    return nullptr;
}

CorpusManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
    CorpusManifest manifest;
    std::set<std::string, std::less<>> seen;
    std::istringstream lines{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    bool first_record = true;

    while (std::getline(lines, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;

        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw MalformedRecord(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!rec.is_object()) throw MalformedRecord(line_no, "record is not an object");

        if (first_record && rec.size() == 1 && rec.contains("manifest_version")) {
            first_record = false;
            const auto& v = rec["manifest_version"];
            if (!v.is_number_integer() || v.get<long long>() < 1) {
                throw MalformedRecord(line_no, "manifest_version must be an integer >= 1");
            }
            manifest.manifest_version = v.get<int>();
            continue;
        }
        first_record = false;

        auto sample = parse_record(rec, line_no, base_dir);
        if (seen.contains(sample.id)) throw DuplicateId(sample.id);
        seen.insert(sample.id);
        probe_image_file(sample.image_path);
        manifest.samples.push_back(std::move(sample));
    }
    return manifest;
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read manifest " + path.string());
    std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse_manifest(text, path.parent_path());
}

std::string image_digest(const ChartSample& sample) { return sha256_file(sample.image_path); }

json to_json(const ChartSample& s) {
    json j = {{"id", s.id},
              {"image_path", s.image_path.string()},
              {"title", s.title},
              {"chart_type", std::string(to_string(s.chart_type))},
              {"domain_label", s.domain_label},
              {"reference_summary", s.reference_summary}};
    j["source_url"] = s.source_url ? json(*s.source_url) : json(nullptr);
    return j;
}

}  // namespace ciaf
