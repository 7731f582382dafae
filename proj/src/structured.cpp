#include "ciaf/structured.hpp"

#include <optional>

#include "ciaf/error.hpp"

namespace ciaf {

using nlohmann::json;

Shape Shape::any() { return Shape{}; }

Shape Shape::string() {
    Shape s;
    s.kind = Kind::string;
    return s;
}

Shape Shape::integer() {
    Shape s;
    s.kind = Kind::integer;
    return s;
}

Shape Shape::number() {
    Shape s;
    s.kind = Kind::number;
    return s;
}

Shape Shape::boolean() {
    Shape s;
    s.kind = Kind::boolean;
    return s;
}

Shape Shape::array_of(Shape element) {
    Shape s;
    s.kind = Kind::array;
    s.element = std::make_shared<const Shape>(std::move(element));
    return s;
}

Shape Shape::object(std::string name, std::vector<Field> fields, bool allow_extra) {
    Shape s;
    s.kind = Kind::object;
    s.name = std::move(name);
    s.fields = std::move(fields);
    s.allow_extra = allow_extra;
    return s;
}

Shape& Shape::or_null() {
    nullable = true;
    return *this;
}

namespace {

bool kind_matches(const json& v, Shape::Kind kind) {
    switch (kind) {
        case Shape::Kind::any: return true;
        case Shape::Kind::string: return v.is_string();
        case Shape::Kind::integer: return v.is_number_integer();
        case Shape::Kind::number: return v.is_number();
        case Shape::Kind::boolean: return v.is_boolean();
        case Shape::Kind::array: return v.is_array();
        case Shape::Kind::object: return v.is_object();
    }
    return false;
}

void collect(const json& v, const Shape& shape, const std::string& path, std::vector<std::string>& out) {
    if (v.is_null() && shape.nullable) return;
    if (!kind_matches(v, shape.kind)) {
        out.push_back(path.empty() ? "<root>" : path);
        return;
    }
    if (shape.kind == Shape::Kind::array && shape.element) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            collect(v[i], *shape.element, path + "[" + std::to_string(i) + "]", out);
        }
    } else if (shape.kind == Shape::Kind::object) {
        const std::string prefix = path.empty() ? "" : path + ".";
        for (const auto& f : shape.fields) {
            auto it = v.find(f.name);
            if (it == v.end()) {
                if (f.required) out.push_back(prefix + f.name);
                continue;
            }
            collect(*it, f.shape, prefix + f.name, out);
        }
        if (!shape.allow_extra) {
            for (const auto& [key, _] : v.items()) {
                const bool known = std::any_of(shape.fields.begin(), shape.fields.end(),
                                               [&](const Field& f) { return f.name == key; });
                if (!known) out.push_back(prefix + key);
            }
        }
    }
}

// End (exclusive) of the bracketed span opening at `start`, honouring JSON
// string literals, or nullopt when it never closes.
std::optional<std::size_t> balanced_end(std::string_view text, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{' || c == '[') ++depth;
        else if (c == '}' || c == ']') {
            if (--depth == 0) return i + 1;
            if (depth < 0) return std::nullopt;
        }
    }
    return std::nullopt;
}

}  // namespace

std::vector<std::string> schema_violations(const json& value, const Shape& shape) {
    std::vector<std::string> out;
    collect(value, shape, "", out);
    return out;
}

json parse_structured(std::string_view text, const Shape& shape) {
    const char opener = shape.kind == Shape::Kind::array ? '[' : '{';
    const bool either = shape.kind == Shape::Kind::any;

    std::optional<std::vector<std::string>> first_violations;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (!(c == opener || (either && (c == '{' || c == '[')))) {
            ++i;
            continue;
        }
        const auto end = balanced_end(text, i);
        if (!end) {
            ++i;
            continue;
        }
        json value = json::parse(text.substr(i, *end - i), nullptr, /*allow_exceptions=*/false);
        if (value.is_discarded()) {
            ++i;
            continue;
        }
        auto violations = schema_violations(value, shape);
        if (violations.empty()) return value;
        if (!first_violations) first_violations = std::move(violations);
        i = *end;  // a well-formed value was found here; do not mine its interior
    }
    if (first_violations) throw SchemaMismatch(std::move(*first_violations));
    throw NoStructureFound("no well-formed " + std::string(shape.name.empty() ? "JSON value" : shape.name) +
                           " in reply");
}

}  // namespace ciaf
