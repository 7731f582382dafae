#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ciaf/response_cache.hpp"

namespace ciaf {

struct ImagePayload {
    std::vector<std::uint8_t> bytes;
    std::string media_type;  // "image/png" or "image/jpeg"
};

struct ChatRequest {
    std::string model_id;
    std::string system_prompt;
    std::string user_prompt;
    std::optional<ImagePayload> image;
    double temperature = 0.0;
    int max_output_tokens = 1024;
    std::optional<std::string> response_schema_hint;
    // Folded into the cache key only. Callers set it to the prompt set id so
    // two prompt versions never share cache entries.
    std::string cache_namespace;

    /// Throws InvalidArgument when temperature is outside [0,2] or
    /// max_output_tokens < 1.
    void validate() const;
};

struct TokenUsage {
    long long input = 0;
    long long output = 0;

    TokenUsage& operator+=(const TokenUsage& o) {
        input += o.input;
        output += o.output;
        return *this;
    }
};

struct ChatResponse {
    std::string text;
    std::string model_id;
    TokenUsage usage;
    bool cached = false;
    std::string cache_key;
};

struct EmbeddingVector {
    std::vector<double> values;
    std::string model_id;
};

/// A model endpoint. Implementations signal retryable failures (timeouts,
/// 5xx, dropped connections) with TransportError or Timeout, and permanent
/// ones with BackendRefusal.
class Backend {
public:
    virtual ~Backend() = default;

    virtual std::string id() const = 0;
    virtual ChatResponse chat(const ChatRequest& request) = 0;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts,
                                               const std::string& model_id) = 0;
};

struct RetryPolicy {
    int max_retries = 2;  // 3 attempts in total
    std::chrono::milliseconds initial_backoff{1000};
    double multiplier = 2.0;
    std::function<void(std::chrono::milliseconds)> sleep;  // defaults to std::this_thread::sleep_for
};

struct GatewayOptions {
    std::string chat_model = "mock-chat";
    std::string embed_model = "mock-embed";
    RetryPolicy retry;
    std::optional<std::filesystem::path> cache_dir;
    bool cache_all = false;  // also cache temperature > 0 requests (offline replay)
    int max_in_flight = 4;
};

/// Bounds the number of concurrent backend calls.
class InFlightLimiter {
public:
    explicit InFlightLimiter(int limit);

    void acquire();
    void release();
    int peak() const;

private:
    mutable std::mutex mu_;
    std::condition_variable cv_;
    int limit_;
    int active_ = 0;
    int peak_ = 0;
};

/// Shared access point for chat and embedding calls: caching, retries and
/// throttling sit here so backends stay thin. Safe to share across threads.
class Gateway {
public:
    Gateway(std::shared_ptr<Backend> backend, GatewayOptions options);

    ChatResponse chat(ChatRequest request);

    /// One vector per input, in input order. Throws EmptyInput for an empty
    /// list or a blank text.
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);

    std::string cache_key(const ChatRequest& request) const;

    const std::string& chat_model() const { return options_.chat_model; }
    const std::string& embed_model() const { return options_.embed_model; }
    std::string backend_id() const { return backend_->id(); }
    Backend& backend() { return *backend_; }
    const InFlightLimiter& limiter() const { return limiter_; }
    TokenUsage usage_totals() const;

private:
    template <typename Fn>
    auto with_retries(Fn&& call) -> decltype(call());

    std::shared_ptr<Backend> backend_;
    GatewayOptions options_;
    std::optional<ResponseCache> cache_;
    InFlightLimiter limiter_;

    mutable std::mutex mu_;
    TokenUsage totals_;
    std::map<std::string, std::size_t> embed_dims_;
};

}  // namespace ciaf
