#include "ciaf/mock_backend.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ciaf/error.hpp"

namespace ciaf {

namespace {

std::uint64_t fnv1a(std::string_view text, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

long long word_count(std::string_view text) {
    std::istringstream in{std::string(text)};
    long long n = 0;
    for (std::string w; in >> w;) ++n;
    return n;
}

}  // namespace

bool MockRule::matches(const std::string& prompt) const {
    if (prompt.find(needle) == std::string::npos) return false;
    return std::all_of(also.begin(), also.end(),
                       [&](const std::string& n) { return prompt.find(n) != std::string::npos; });
}

MockBackend::MockBackend(std::vector<MockRule> rules, MockEmbedding embedding)
    : rules_(std::move(rules)), hits_(rules_.size(), 0), embedding_(std::move(embedding)) {
    if (embedding_.dim == 0) throw InvalidArgument("mock embedding dimension must be >= 1");
    for (const auto& [text, v] : embedding_.vectors) {
        if (v.size() > embedding_.dim) {
            throw InvalidArgument("mock embedding override for '" + text + "' exceeds dimension");
        }
    }
}

ChatResponse MockBackend::chat(const ChatRequest& request) {
    const std::string prompt = request.system_prompt + "\n" + request.user_prompt;
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        const auto& rule = rules_[i];
        if (!rule.matches(prompt)) continue;

        calls_.push_back({request, i});
        const int hit = hits_[i]++;
        if (rule.fail_times < 0 || hit < rule.fail_times) {
            switch (rule.failure) {
                case MockFailure::transient: throw TransportError("mock: scripted 503 for rule " + std::to_string(i));
                case MockFailure::timeout: throw Timeout("mock: scripted timeout for rule " + std::to_string(i));
                case MockFailure::refusal: throw BackendRefusal("mock: scripted 400 for rule " + std::to_string(i));
            }
        }
        ChatResponse r;
        r.text = rule.reply;
        r.model_id = request.model_id;
        r.usage = {word_count(prompt), word_count(rule.reply)};
        return r;
    }
    throw NoRuleMatched("mock: no rule matches prompt starting '" + prompt.substr(0, 80) + "'");
}

std::vector<double> MockBackend::vector_for(const std::string& text) const {
    std::vector<double> v(embedding_.dim, 0.0);
    if (auto it = embedding_.vectors.find(text); it != embedding_.vectors.end()) {
        std::copy(it->second.begin(), it->second.end(), v.begin());
        return v;
    }
    std::uint64_t state = fnv1a(text, embedding_.seed);
    for (auto& x : v) {
        // uniform in [-1, 1)
        x = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-52 - 1.0;
    }
    return v;
}

std::vector<EmbeddingVector> MockBackend::embed(const std::vector<std::string>& texts, const std::string& model_id) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back({vector_for(t), model_id});
    return out;
}

std::vector<MockCall> MockBackend::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

std::size_t MockBackend::call_count() const {
    std::lock_guard lock(mu_);
    return calls_.size();
}

void MockBackend::clear_calls() {
    std::lock_guard lock(mu_);
    calls_.clear();
}

std::shared_ptr<MockBackend> mock_program(std::vector<MockRule> rules, MockEmbedding embedding) {
    if (rules.empty()) throw InvalidArgument("mock program needs at least one rule");
    return std::make_shared<MockBackend>(std::move(rules), std::move(embedding));
}

std::shared_ptr<MockBackend> load_mock_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read mock script " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument("mock script " + path.string() + ": " + e.what());
    }

    std::vector<MockRule> rules;
    try {
        for (const auto& r : j.at("rules")) {
            MockRule rule;
            const auto& match = r.at("match");
            if (match.is_array()) {
                if (match.empty()) throw InvalidArgument("mock rule with an empty match list");
                rule.needle = match[0].get<std::string>();
                for (std::size_t k = 1; k < match.size(); ++k) rule.also.push_back(match[k].get<std::string>());
            } else {
                rule.needle = match.get<std::string>();
            }
            const auto& reply = r.at("reply");
            rule.reply = reply.is_string() ? reply.get<std::string>() : reply.dump();
            rule.fail_times = r.value("fail_times", 0);
            const auto failure = r.value("failure", std::string("transient"));
            if (failure == "timeout") rule.failure = MockFailure::timeout;
            else if (failure == "refusal") rule.failure = MockFailure::refusal;
            else if (failure != "transient") throw InvalidArgument("unknown mock failure '" + failure + "'");
            rules.push_back(std::move(rule));
        }

        MockEmbedding emb;
        if (auto e = j.find("embedding"); e != j.end()) {
            emb.dim = e->value("dim", emb.dim);
            emb.seed = e->value("seed", emb.seed);
            if (auto v = e->find("vectors"); v != e->end()) {
                for (const auto& [text, values] : v->items()) {
                    emb.vectors[text] = values.get<std::vector<double>>();
                }
            }
        }
        return mock_program(std::move(rules), std::move(emb));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("mock script " + path.string() + ": " + e.what());
    }
}

}  // namespace ciaf
