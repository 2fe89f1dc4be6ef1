#include "copyscope/error.hpp"

namespace copyscope {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Io: return "io";
        case ErrorKind::Decode: return "decode";
        case ErrorKind::Dataset: return "dataset";
        case ErrorKind::Argument: return "argument";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::NotPsd: return "not_psd";
        case ErrorKind::InsufficientSamples: return "insufficient_samples";
        case ErrorKind::UndefinedSimilarity: return "undefined_similarity";
        case ErrorKind::Configuration: return "configuration";
        case ErrorKind::Completeness: return "completeness";
        case ErrorKind::Schema: return "schema";
        case ErrorKind::Lookup: return "lookup";
        case ErrorKind::InternalConsistency: return "internal_consistency";
    }
    return "unknown";
}

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Argument:
            return 2;
        case ErrorKind::Io:
        case ErrorKind::Decode:
        case ErrorKind::Dataset:
        case ErrorKind::Configuration:
        case ErrorKind::Completeness:
        case ErrorKind::Schema:
        case ErrorKind::Lookup:
            return 3;
        default:
            return 4;
    }
}

} // namespace copyscope
