#include "ciaf/remote_backend.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ciaf/digest.hpp"
#include "ciaf/error.hpp"

namespace ciaf {

using nlohmann::json;

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
    const auto scheme_end = config_.base_url.find("://");
    if (scheme_end == std::string::npos) throw InvalidArgument("base URL needs a scheme: " + config_.base_url);
    const auto path_start = config_.base_url.find('/', scheme_end + 3);
    scheme_host_port_ = config_.base_url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string RemoteBackend::id() const { return "remote:" + config_.base_url; }

std::string RemoteBackend::chat_payload(const ChatRequest& r) {
    json user_content = json::array();
    user_content.push_back({{"type", "text"}, {"text", r.user_prompt}});
    if (r.image) {
        const std::string url = "data:" + r.image->media_type + ";base64," + base64_encode(r.image->bytes);
        user_content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
    }
    json messages = json::array();
    if (!r.system_prompt.empty()) messages.push_back({{"role", "system"}, {"content", r.system_prompt}});
    messages.push_back({{"role", "user"}, {"content", user_content}});
    return json{{"model", r.model_id},
                {"messages", messages},
                {"temperature", r.temperature},
                {"max_tokens", r.max_output_tokens},
                {"stream", false}}
        .dump();
}

std::string RemoteBackend::post(const std::string& path, const std::string& body) {
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto res = client.Post(path_prefix_ + path, headers, body, "application/json");
    if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::Read || err == httplib::Error::Write) {
            throw Timeout("request to " + path + " timed out or was cut off: " + httplib::to_string(err));
        }
        throw TransportError("request to " + path + " failed: " + httplib::to_string(err));
    }
    const int status = res->status;
    if (status >= 200 && status < 300) return res->body;
    const std::string detail = "HTTP " + std::to_string(status) + " from " + path + ": " + res->body.substr(0, 300);
    if (status == 408 || status == 429 || status >= 500) throw TransportError(detail);
    throw BackendRefusal(detail);
}

ChatResponse RemoteBackend::chat(const ChatRequest& request) {
    const auto body = post("/chat/completions", chat_payload(request));
    try {
        const json j = json::parse(body);
        ChatResponse r;
        const auto& content = j.at("choices").at(0).at("message").at("content");
        r.text = content.is_null() ? std::string{} : content.get<std::string>();
        r.model_id = j.value("model", request.model_id);
        if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
            r.usage.input = u->value("prompt_tokens", 0LL);
            r.usage.output = u->value("completion_tokens", 0LL);
        }
        return r;
    } catch (const json::exception& e) {
        throw TransportError(std::string("malformed chat completion body: ") + e.what());
    }
}

std::vector<EmbeddingVector> RemoteBackend::embed(const std::vector<std::string>& texts,
                                                  const std::string& model_id) {
    const auto body = post("/embeddings", json{{"model", model_id}, {"input", texts}}.dump());
    try {
        const json j = json::parse(body);
        std::vector<EmbeddingVector> out(texts.size());
        std::vector<bool> filled(texts.size(), false);
        const auto& data = j.at("data");
        for (std::size_t k = 0; k < data.size(); ++k) {
            const auto& item = data[k];
            const auto index = item.value("index", k);
            if (index >= out.size() || filled[index]) throw TransportError("embedding index out of range");
            out[index] = {item.at("embedding").get<std::vector<double>>(), j.value("model", model_id)};
            filled[index] = true;
        }
        if (std::find(filled.begin(), filled.end(), false) != filled.end()) {
            throw TransportError("embedding response is missing entries");
        }
        return out;
    } catch (const json::exception& e) {
        throw TransportError(std::string("malformed embeddings body: ") + e.what());
    }
}

}  // namespace ciaf
