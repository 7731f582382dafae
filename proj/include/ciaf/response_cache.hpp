#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace ciaf {

struct CachedResponse {
    std::string key;
    std::string model_id;
    std::string text;
    long long input_tokens = 0;
    long long output_tokens = 0;
    std::string timestamp;
};

/// Content-addressed response store: one JSON file per cache key under
/// `<root>/<first two hex chars>/<key>.json`. Writes go through a temp file
/// and a rename, so readers never observe a half-written entry.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path root);

    std::optional<CachedResponse> get(const std::string& key) const;
    void put(const CachedResponse& entry) const;

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path entry_path(const std::string& key) const;

    std::filesystem::path root_;
};

std::string utc_timestamp();

}  // namespace ciaf
