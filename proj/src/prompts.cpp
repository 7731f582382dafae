#include "ciaf/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "ciaf/error.hpp"

namespace ciaf {

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

// Drops lines that hold nothing but a {{! comment }}.
std::string strip_comment_lines(const std::string& text) {
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        const auto end = nl == std::string::npos ? text.size() : nl + 1;
        const std::string line = text.substr(pos, end - pos);
        const auto t = trim(line.substr(0, line.find_last_not_of("\r\n") + 1));
        const bool comment_only = t.starts_with("{{!") && t.ends_with("}}") && t.find("}}") == t.size() - 2;
        if (!comment_only) out += line;
        pos = end;
    }
    return out;
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string text, std::string name) {
    PromptTemplate t;
    t.name_ = std::move(name);
    const std::string body = strip_comment_lines(text);

    std::size_t pos = 0;
    while (pos < body.size()) {
        const auto open = body.find("{{", pos);
        if (open == std::string::npos) {
            t.pieces_.push_back({false, body.substr(pos)});
            break;
        }
        if (open > pos) t.pieces_.push_back({false, body.substr(pos, open - pos)});
        const auto close = body.find("}}", open + 2);
        if (close == std::string::npos) throw TemplateError(t.name_ + ": unterminated placeholder");
        const std::string inner = trim(body.substr(open + 2, close - open - 2));
        if (!inner.starts_with("!")) {
            if (inner.empty()) throw TemplateError(t.name_ + ": empty placeholder");
            t.pieces_.push_back({true, inner});
            if (std::find(t.placeholders_.begin(), t.placeholders_.end(), inner) == t.placeholders_.end()) {
                t.placeholders_.push_back(inner);
            }
        }
        pos = close + 2;
    }
    return t;
}

std::string PromptTemplate::render(const PromptVars& vars) const {
    std::string out;
    for (const auto& piece : pieces_) {
        if (!piece.is_var) {
            out += piece.text;
            continue;
        }
        auto it = vars.find(piece.text);
        if (it == vars.end()) throw TemplateError(name_ + ": no value for placeholder '" + piece.text + "'");
        out += it->second;
    }
    return out;
}

PromptSet PromptSet::load(const std::filesystem::path& root, const std::string& id) {
    if (id.empty() || id.find("..") != std::string::npos || id.find('/') != std::string::npos) {
        throw InvalidArgument("invalid prompt set id '" + id + "'");
    }
    const auto dir = root / id;
    if (!std::filesystem::is_directory(dir)) throw IoError("prompt set directory not found: " + dir.string());

    PromptSet set;
    set.id_ = id;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto& p = entry.path();
        const std::string stem = p.stem().string();
        if (p.extension() == ".txt") {
            set.templates_.emplace(stem, PromptTemplate::parse(slurp(p), id + "/" + p.filename().string()));
        } else if (p.extension() == ".json") {
            try {
                set.resources_.emplace(stem, nlohmann::json::parse(slurp(p)));
            } catch (const nlohmann::json::parse_error& e) {
                throw TemplateError(p.string() + ": " + e.what());
            }
        }
    }
    return set;
}

const PromptTemplate& PromptSet::get(std::string_view name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw TemplateError("prompt set '" + id_ + "' has no template " + std::string(name));
    return it->second;
}

const nlohmann::json& PromptSet::resource(std::string_view name) const {
    auto it = resources_.find(name);
    if (it == resources_.end()) throw TemplateError("prompt set '" + id_ + "' has no resource " + std::string(name));
    return it->second;
}

bool PromptSet::has(std::string_view name) const { return templates_.contains(name) || resources_.contains(name); }

void PromptSet::require(const std::vector<std::string>& templates, const std::vector<std::string>& resources) const {
    std::string missing;
    for (const auto& t : templates) {
        if (!templates_.contains(t)) missing += " " + t + ".txt";
    }
    for (const auto& r : resources) {
        if (!resources_.contains(r)) missing += " " + r + ".json";
    }
    if (!missing.empty()) throw TemplateError("prompt set '" + id_ + "' is missing:" + missing);
}

}  // namespace ciaf
