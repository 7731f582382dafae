#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ciaf {

struct Field;

/// Minimal structural schema for model replies. Objects list their fields;
/// arrays carry an element shape. Unknown object keys are rejected unless
/// `allow_extra` is set.
struct Shape {
    enum class Kind { any, string, integer, number, boolean, array, object };

    Kind kind = Kind::any;
    std::string name;
    std::vector<Field> fields;
    std::shared_ptr<const Shape> element;
    bool allow_extra = false;
    bool nullable = false;

    static Shape any();
    static Shape string();
    static Shape integer();
    static Shape number();
    static Shape boolean();
    static Shape array_of(Shape element);
    static Shape object(std::string name, std::vector<Field> fields, bool allow_extra = false);

    Shape& or_null();
};

struct Field {
    std::string name;
    Shape shape;
    bool required = true;
};

/// Returns the offending paths ("perspectives", "insights[1].text"), empty
/// when `value` conforms.
std::vector<std::string> schema_violations(const nlohmann::json& value, const Shape& shape);

/// Finds the first well-formed JSON value in `text` (prose, markdown fences
/// and leading chatter are skipped) that conforms to `shape`.
///
/// Throws NoStructureFound when no well-formed value of the shape's top-level
/// kind exists, SchemaMismatch with the first candidate's violations when
/// candidates exist but none conform.
nlohmann::json parse_structured(std::string_view text, const Shape& shape);

}  // namespace ciaf
