#include "ciaf/gateway.hpp"

#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ciaf/digest.hpp"
#include "ciaf/error.hpp"

namespace ciaf {

void ChatRequest::validate() const {
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
        throw InvalidArgument("temperature must lie in [0,2], got " + std::to_string(temperature));
    }
    if (max_output_tokens < 1) throw InvalidArgument("max_output_tokens must be >= 1");
}

InFlightLimiter::InFlightLimiter(int limit) : limit_(limit) {
    if (limit < 1) throw InvalidArgument("in-flight limit must be >= 1");
}

void InFlightLimiter::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return active_ < limit_; });
    ++active_;
    peak_ = std::max(peak_, active_);
}

void InFlightLimiter::release() {
    {
        std::lock_guard lock(mu_);
        --active_;
    }
    cv_.notify_one();
}

int InFlightLimiter::peak() const {
    std::lock_guard lock(mu_);
    return peak_;
}

namespace {

struct Permit {
    explicit Permit(InFlightLimiter& l) : limiter(l) { limiter.acquire(); }
    ~Permit() { limiter.release(); }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    InFlightLimiter& limiter;
};

}  // namespace

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayOptions options)
    : backend_(std::move(backend)), options_(std::move(options)), limiter_(options_.max_in_flight) {
    if (!backend_) throw InvalidArgument("gateway needs a backend");
    if (options_.cache_dir) cache_.emplace(*options_.cache_dir);
    if (!options_.retry.sleep) {
        options_.retry.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
}

std::string Gateway::cache_key(const ChatRequest& r) const {
    const std::string image_digest = r.image ? sha256_hex(r.image->bytes) : std::string{};
    // The array form length-delimits every field, so no two distinct requests
    // serialise to the same string.
    const nlohmann::json fields = {backend_->id(),  r.model_id,    r.cache_namespace,    r.system_prompt,
                                   r.user_prompt,   image_digest,  r.temperature,        r.max_output_tokens};
    return sha256_hex(fields.dump());
}

template <typename Fn>
auto Gateway::with_retries(Fn&& call) -> decltype(call()) {
    auto backoff = options_.retry.initial_backoff;
    for (int attempt = 0;; ++attempt) {
        try {
            Permit permit(limiter_);
            return call();
        } catch (const TransportError& e) {
            if (attempt >= options_.retry.max_retries) throw;
            spdlog::warn("transient backend failure (attempt {}): {}", attempt + 1, e.what());
        } catch (const Timeout& e) {
            if (attempt >= options_.retry.max_retries) throw;
            spdlog::warn("backend timeout (attempt {}): {}", attempt + 1, e.what());
        }
        options_.retry.sleep(backoff);
        backoff = std::chrono::milliseconds(
            static_cast<long long>(static_cast<double>(backoff.count()) * options_.retry.multiplier));
    }
}

ChatResponse Gateway::chat(ChatRequest request) {
    if (request.model_id.empty()) request.model_id = options_.chat_model;
    request.validate();

    const std::string key = cache_key(request);
    const bool cacheable = cache_ && (request.temperature == 0.0 || options_.cache_all);

    if (cacheable) {
        if (auto hit = cache_->get(key)) {
            ChatResponse r{hit->text, hit->model_id, {hit->input_tokens, hit->output_tokens}, true, key};
            return r;
        }
    }

    ChatResponse response = with_retries([&] { return backend_->chat(request); });
    response.cached = false;
    response.cache_key = key;
    if (response.model_id.empty()) response.model_id = request.model_id;
    {
        std::lock_guard lock(mu_);
        totals_ += response.usage;
    }

    if (cacheable) {
        cache_->put({key, response.model_id, response.text, response.usage.input, response.usage.output, {}});
    }
    return response;
}

std::vector<EmbeddingVector> Gateway::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw EmptyInput("embed called with no texts");
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].find_first_not_of(" \t\r\n") == std::string::npos) {
            throw EmptyInput("text " + std::to_string(i) + " is blank");
        }
    }

    auto vectors = with_retries([&] { return backend_->embed(texts, options_.embed_model); });
    if (vectors.size() != texts.size()) {
        throw TransportError("backend returned " + std::to_string(vectors.size()) + " embeddings for " +
                             std::to_string(texts.size()) + " texts");
    }

    std::lock_guard lock(mu_);
    for (auto& v : vectors) {
        if (v.model_id.empty()) v.model_id = options_.embed_model;
        for (double x : v.values) {
            if (!std::isfinite(x)) throw TransportError("backend returned a non-finite embedding value");
        }
        auto [it, inserted] = embed_dims_.try_emplace(v.model_id, v.values.size());
        if (!inserted && it->second != v.values.size()) {
            throw DimensionMismatch("model " + v.model_id + " produced dimension " +
                                    std::to_string(v.values.size()) + " after " + std::to_string(it->second));
        }
    }
    return vectors;
}

TokenUsage Gateway::usage_totals() const {
    std::lock_guard lock(mu_);
    return totals_;
}

}  // namespace ciaf
