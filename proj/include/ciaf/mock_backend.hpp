#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ciaf/gateway.hpp"

namespace ciaf {

enum class MockFailure { transient, timeout, refusal };

struct MockRule {
    std::string needle;  // matched against system_prompt + "\n" + user_prompt
    std::string reply;
    int fail_times = 0;  // the first N matches fail instead of replying; -1 fails forever
    MockFailure failure = MockFailure::transient;
    std::vector<std::string> also;  // further substrings that must all occur

    bool matches(const std::string& prompt) const;
};

struct MockEmbedding {
    std::size_t dim = 16;
    std::uint64_t seed = 0;
    // Exact-text overrides. Shorter vectors are zero-padded to `dim`.
    std::map<std::string, std::vector<double>> vectors;
};

struct MockCall {
    ChatRequest request;
    std::size_t rule_index = 0;
};

/// Deterministic scripted backend. chat() answers with the first rule whose
/// needle occurs in the prompt; embed() hashes each text into a seeded
/// pseudo-random vector unless an override exists.
class MockBackend : public Backend {
public:
    MockBackend(std::vector<MockRule> rules, MockEmbedding embedding = {});

    std::string id() const override { return "mock"; }
    ChatResponse chat(const ChatRequest& request) override;
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts,
                                       const std::string& model_id) override;

    std::vector<MockCall> calls() const;
    std::size_t call_count() const;
    void clear_calls();

    std::vector<double> vector_for(const std::string& text) const;

private:
    std::vector<MockRule> rules_;
    std::vector<int> hits_;
    MockEmbedding embedding_;
    mutable std::mutex mu_;
    std::vector<MockCall> calls_;
};

/// Throws InvalidArgument when `rules` is empty.
std::shared_ptr<MockBackend> mock_program(std::vector<MockRule> rules, MockEmbedding embedding = {});

/// Loads a mock script:
///   {"rules": [{"match": "..." | ["...", ...], "reply": "..." | {...}, "fail_times": 0,
///               "failure": "transient" | "timeout" | "refusal"}],
///    "embedding": {"dim": 16, "seed": 0, "vectors": {"text": [..]}}}
/// A list under "match" requires every substring. Object replies are
/// serialised to JSON text.
std::shared_ptr<MockBackend> load_mock_script(const std::filesystem::path& path);

}  // namespace ciaf
