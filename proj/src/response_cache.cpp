#include "ciaf/response_cache.hpp"

#include <atomic>
#include <ctime>
#include <fstream>
#include <iterator>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ciaf/error.hpp"

namespace ciaf {

using nlohmann::json;

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ResponseCache::ResponseCache(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
}

std::filesystem::path ResponseCache::entry_path(const std::string& key) const {
    if (key.size() < 2) throw InvalidArgument("cache key too short");
    return root_ / key.substr(0, 2) / (key + ".json");
}

std::optional<CachedResponse> ResponseCache::get(const std::string& key) const {
    const auto path = entry_path(key);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    try {
        const json j = json::parse(in);
        CachedResponse e;
        e.key = j.at("key").get<std::string>();
        if (e.key != key) {
            spdlog::warn("cache entry {} holds key {}; ignoring", path.string(), e.key);
            return std::nullopt;
        }
        e.model_id = j.at("model_id").get<std::string>();
        e.text = j.at("text").get<std::string>();
        e.input_tokens = j.value("input_tokens", 0LL);
        e.output_tokens = j.value("output_tokens", 0LL);
        e.timestamp = j.value("timestamp", std::string{});
        return e;
    } catch (const json::exception& ex) {
        spdlog::warn("unreadable cache entry {}: {}", path.string(), ex.what());
        return std::nullopt;
    }
}

void ResponseCache::put(const CachedResponse& entry) const {
    static std::atomic<unsigned long> counter{0};
    const auto path = entry_path(entry.key);
    std::filesystem::create_directories(path.parent_path());

    const json j = {{"key", entry.key},
                    {"request_digest", entry.key},
                    {"model_id", entry.model_id},
                    {"text", entry.text},
                    {"input_tokens", entry.input_tokens},
                    {"output_tokens", entry.output_tokens},
                    {"timestamp", entry.timestamp.empty() ? utc_timestamp() : entry.timestamp}};

    auto tmp = path;
    tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "." +
           std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write cache entry " + tmp.string());
        out << j.dump(2) << '\n';
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace ciaf
