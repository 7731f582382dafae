#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ciaf {

using PromptVars = std::map<std::string, std::string, std::less<>>;

/// Plain-text template with `{{name}}` placeholders. `{{! ... }}` is a
/// comment and renders to nothing; a comment alone on a line removes the line.
class PromptTemplate {
public:
    static PromptTemplate parse(std::string text, std::string name = "<inline>");

    /// Throws TemplateError if a placeholder has no value.
    std::string render(const PromptVars& vars) const;

    const std::vector<std::string>& placeholders() const { return placeholders_; }
    const std::string& name() const { return name_; }

private:
    struct Piece {
        bool is_var;
        std::string text;
    };

    std::string name_;
    std::vector<Piece> pieces_;
    std::vector<std::string> placeholders_;
};

/// A versioned directory of templates (`<name>.txt`) and JSON resources
/// (`<name>.json`), selected by id under a prompts root.
class PromptSet {
public:
    static PromptSet load(const std::filesystem::path& root, const std::string& id);

    const std::string& id() const { return id_; }
    const PromptTemplate& get(std::string_view name) const;
    const nlohmann::json& resource(std::string_view name) const;
    bool has(std::string_view name) const;

    /// Throws TemplateError listing any missing template or resource.
    void require(const std::vector<std::string>& templates, const std::vector<std::string>& resources = {}) const;

private:
    std::string id_;
    std::map<std::string, PromptTemplate, std::less<>> templates_;
    std::map<std::string, nlohmann::json, std::less<>> resources_;
};

}  // namespace ciaf
