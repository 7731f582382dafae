#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "ciaf/gateway.hpp"

namespace ciaf {

struct RemoteConfig {
    std::string base_url;  // e.g. https://api.example.com/v1
    std::string api_key;
    std::chrono::seconds timeout{120};
};

/// Client for an OpenAI-style HTTP API (`POST {base}/chat/completions`,
/// `POST {base}/embeddings`). Images travel inline as base64 data URLs.
///
/// Status mapping: 408, 429 and 5xx become TransportError (retried by the
/// gateway), read timeouts become Timeout, any other non-2xx becomes
/// BackendRefusal.
class RemoteBackend : public Backend {
public:
    explicit RemoteBackend(RemoteConfig config);

    std::string id() const override;
    ChatResponse chat(const ChatRequest& request) override;
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts,
                                       const std::string& model_id) override;

    /// The JSON body sent for a chat request.
    static std::string chat_payload(const ChatRequest& request);

private:
    std::string post(const std::string& path, const std::string& body);

    RemoteConfig config_;
    std::string scheme_host_port_;
    std::string path_prefix_;
};

}  // namespace ciaf
