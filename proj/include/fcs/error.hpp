#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fcs {

enum class ErrorCode {
    InvalidArgument,
    OutOfRange,
    TailNotNegligible,
    GridMismatch,
    SingularGram,
    EigenFailure,
    RankTooLarge,
    BasisMismatch,
    NotDecayed,
    HorizonExceeded,
    BadThreshold,
    MissingIncrements,
    EmptyEnsemble,
    ConfigError,
    ParseError,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::TailNotNegligible: return "TailNotNegligible";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::SingularGram: return "SingularGram";
        case ErrorCode::EigenFailure: return "EigenFailure";
        case ErrorCode::RankTooLarge: return "RankTooLarge";
        case ErrorCode::BasisMismatch: return "BasisMismatch";
        case ErrorCode::NotDecayed: return "NotDecayed";
        case ErrorCode::HorizonExceeded: return "HorizonExceeded";
        case ErrorCode::BadThreshold: return "BadThreshold";
        case ErrorCode::MissingIncrements: return "MissingIncrements";
        case ErrorCode::EmptyEnsemble: return "EmptyEnsemble";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

/// Library error. `where` names the module and operation that raised it,
/// e.g. "spectral.make_tn".
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string where, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + " in " + where + ": " + what),
          code_(code), where_(std::move(where)) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    [[nodiscard]] const std::string& where() const noexcept { return where_; }

private:
    ErrorCode code_;
    std::string where_;
};

[[noreturn]] inline void fail(ErrorCode code, std::string where, const std::string& what) {
    throw Error(code, std::move(where), what);
}

}  // namespace fcs
