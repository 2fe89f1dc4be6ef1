#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace copyscope {

enum class ErrorKind {
    Io,
    Decode,
    Dataset,
    Argument,
    Numeric,
    NotPsd,
    InsufficientSamples,
    UndefinedSimilarity,
    Configuration,
    Completeness,
    Schema,
    Lookup,
    InternalConsistency,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Process exit code for a failure of the given kind: 2 usage, 3 data, 4 numeric/internal.
int exit_code_for(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace copyscope
