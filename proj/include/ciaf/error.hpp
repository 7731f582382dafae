#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ciaf {

/// Root of every error thrown by the library. `kind()` is a stable tag used in
/// run records and CLI output, so it must not change once published.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define CIAF_DEFINE_ERROR(Name)                                               \
    class Name : public Error {                                               \
    public:                                                                   \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    }

// corpus
class MalformedRecord : public Error {
public:
    MalformedRecord(std::size_t line_no, const std::string& reason)
        : Error("MalformedRecord", "line " + std::to_string(line_no) + ": " + reason),
          line_no_(line_no), reason_(reason) {}

    std::size_t line_no() const noexcept { return line_no_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_no_;
    std::string reason_;
};

class DuplicateId : public Error {
public:
    explicit DuplicateId(std::string id)
        : Error("DuplicateId", "duplicate sample id: " + id), id_(std::move(id)) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class MissingImage : public Error {
public:
    explicit MissingImage(std::string path)
        : Error("MissingImage", "image not found or unreadable: " + path), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class UnsupportedImageFormat : public Error {
public:
    UnsupportedImageFormat(std::string path, const std::string& detail)
        : Error("UnsupportedImageFormat", "unsupported image " + path + ": " + detail),
          path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

CIAF_DEFINE_ERROR(IoError);
CIAF_DEFINE_ERROR(InvalidArgument);

// gateway
CIAF_DEFINE_ERROR(TransportError);
CIAF_DEFINE_ERROR(BackendRefusal);
CIAF_DEFINE_ERROR(Timeout);
CIAF_DEFINE_ERROR(EmptyInput);
CIAF_DEFINE_ERROR(NoRuleMatched);
CIAF_DEFINE_ERROR(NoStructureFound);

class SchemaMismatch : public Error {
public:
    explicit SchemaMismatch(std::vector<std::string> fields);
    const std::vector<std::string>& fields() const noexcept { return fields_; }

private:
    std::vector<std::string> fields_;
};

// pipeline
CIAF_DEFINE_ERROR(TemplateError);
CIAF_DEFINE_ERROR(PlanParseError);
CIAF_DEFINE_ERROR(ExtractionParseError);
CIAF_DEFINE_ERROR(EmptyNarrative);

/// Wraps a failure inside one pipeline or evaluation stage. The original
/// exception stays reachable through std::rethrow_if_nested.
class StageError : public Error, public std::nested_exception {
public:
    StageError(std::string stage, const std::string& inner_kind, const std::string& inner_message)
        : Error("StageError", stage + ": " + inner_kind + ": " + inner_message),
          stage_(std::move(stage)), inner_kind_(inner_kind) {}

    const std::string& stage() const noexcept { return stage_; }
    const std::string& inner_kind() const noexcept { return inner_kind_; }

private:
    std::string stage_;
    std::string inner_kind_;
};

// evaluation
CIAF_DEFINE_ERROR(PerspectiveParseError);
CIAF_DEFINE_ERROR(NoScoreFound);
CIAF_DEFINE_ERROR(DimensionMismatch);
CIAF_DEFINE_ERROR(EmptyRun);

// bench
CIAF_DEFINE_ERROR(MissingReference);
CIAF_DEFINE_ERROR(MissingEvalReport);
CIAF_DEFINE_ERROR(RunConflict);

#undef CIAF_DEFINE_ERROR

/// Runs `body`, rethrowing any failure as a StageError tagged with `stage`.
template <typename Fn>
decltype(auto) in_stage(const std::string& stage, Fn&& body) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        std::throw_with_nested(StageError(stage, e.kind(), e.what()));
    } catch (const std::exception& e) {
        std::throw_with_nested(StageError(stage, "std::exception", e.what()));
    }
}

/// Kind of the innermost ciaf::Error in a (possibly nested) exception chain.
std::string innermost_kind(const std::exception& e);

}  // namespace ciaf
