#pragma once

#include <stdexcept>
#include <string>

namespace qbm {

enum class ErrorCode {
    invalid_argument,
    enumeration_too_large,
    invalid_batch_size,
    empty_input,
    dimension_mismatch,
    non_finite,
    degenerate_population,
    too_large,
    numeric,
    unnormalized,
    training_failed,
    io,
    config,
};

constexpr const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::enumeration_too_large: return "enumeration_too_large";
    case ErrorCode::invalid_batch_size: return "invalid_batch_size";
    case ErrorCode::empty_input: return "empty_input";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::degenerate_population: return "degenerate_population";
    case ErrorCode::too_large: return "too_large";
    case ErrorCode::numeric: return "numeric";
    case ErrorCode::unnormalized: return "unnormalized";
    case ErrorCode::training_failed: return "training_failed";
    case ErrorCode::io: return "io";
    case ErrorCode::config: return "config";
    }
    return "unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace qbm
