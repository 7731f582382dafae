#include "ciaf/error.hpp"

namespace ciaf {

namespace {

std::string join_fields(const std::vector<std::string>& fields) {
    std::string out;
    for (const auto& f : fields) {
        if (!out.empty()) out += ", ";
        out += f;
    }
    return out;
}

}  // namespace

SchemaMismatch::SchemaMismatch(std::vector<std::string> fields)
    : Error("SchemaMismatch", "schema mismatch: " + join_fields(fields)), fields_(std::move(fields)) {}

std::string innermost_kind(const std::exception& e) {
    std::string kind = "std::exception";
    if (const auto* err = dynamic_cast<const Error*>(&e)) kind = err->kind();
    try {
        std::rethrow_if_nested(e);
    } catch (const std::exception& inner) {
        return innermost_kind(inner);
    } catch (...) {
    }
    return kind;
}

}  // namespace ciaf
