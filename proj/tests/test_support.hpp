#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ciaf/gateway.hpp"
#include "ciaf/mock_backend.hpp"

namespace ciaf::testing {

inline const std::filesystem::path kFixtures = CIAF_FIXTURES_DIR;
inline const std::filesystem::path kPrompts = CIAF_PROMPTS_DIR;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("ciaf-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline GatewayOptions quiet_options(std::optional<std::filesystem::path> cache = std::nullopt) {
    GatewayOptions o;
    o.retry.initial_backoff = std::chrono::milliseconds(0);
    o.retry.sleep = [](std::chrono::milliseconds) {};
    o.cache_dir = std::move(cache);
    return o;
}

struct MockSetup {
    std::shared_ptr<MockBackend> backend;
    std::unique_ptr<Gateway> gateway;
};

inline MockSetup mock_gateway(std::vector<MockRule> rules, MockEmbedding emb = {},
                              std::optional<std::filesystem::path> cache = std::nullopt) {
    MockSetup s;
    s.backend = mock_program(std::move(rules), std::move(emb));
    s.gateway = std::make_unique<Gateway>(s.backend, quiet_options(std::move(cache)));
    return s;
}

inline MockSetup scripted_gateway(std::optional<std::filesystem::path> cache = std::nullopt) {
    MockSetup s;
    s.backend = load_mock_script(kFixtures / "mock_script.json");
    s.gateway = std::make_unique<Gateway>(s.backend, quiet_options(std::move(cache)));
    return s;
}

}  // namespace ciaf::testing
