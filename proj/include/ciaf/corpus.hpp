#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ciaf {

enum class ChartType { line, bar, area, scatter, map, other };

std::string_view to_string(ChartType type);
std::optional<ChartType> parse_chart_type(std::string_view text);

enum class ImageFormat { png, jpeg };

struct ImageInfo {
    ImageFormat format;
    std::uint32_t width = 0;
    std::uint32_t height = 0;

    std::string media_type() const;
};

/// Identifies a PNG or JPEG from its header and reads the pixel dimensions.
/// Only the header is inspected; the image is never fully decoded.
/// Throws UnsupportedImageFormat.
ImageInfo probe_image(std::span<const std::uint8_t> bytes, const std::string& label = "<memory>");
ImageInfo probe_image_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

struct ChartSample {
    std::string id;
    std::filesystem::path image_path;  // resolved against the manifest directory
    std::string title;
    ChartType chart_type = ChartType::other;
    std::string domain_label;
    std::string reference_summary;
    std::optional<std::string> source_url;

    bool operator==(const ChartSample&) const = default;
};

struct CorpusManifest {
    std::vector<ChartSample> samples;
    int manifest_version = 1;

    const ChartSample* find(std::string_view id) const;
    bool operator==(const CorpusManifest&) const = default;
};

/// Parses a line-delimited manifest, one JSON object per line. Blank lines are
/// skipped. An optional first record of the form {"manifest_version": N} sets
/// the version; it defaults to 1. Relative image paths resolve against the
/// manifest's own directory. Every sample is validated before returning.
///
/// Throws MalformedRecord, DuplicateId, MissingImage, UnsupportedImageFormat.
CorpusManifest load_manifest(const std::filesystem::path& path);

/// Same as load_manifest but from in-memory text.
CorpusManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir);

/// SHA-256 of the raw image bytes. Throws MissingImage.
std::string image_digest(const ChartSample& sample);

bool has_sentence(std::string_view text);

nlohmann::json to_json(const ChartSample& sample);

}  // namespace ciaf
