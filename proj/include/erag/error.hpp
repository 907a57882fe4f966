#pragma once
// Typed errors shared by every module. One exception class carrying a code,
// so tests and the CLI can dispatch on the failure kind without string parsing.

#include <stdexcept>
#include <string>

namespace erag {

enum class ErrorCode {
    DuplicateId,
    InvalidPose,
    UnknownNode,
    SelfLoop,
    NegativeCost,
    Unreachable,
    ParseError,
    EmptyMap,
    NotALeaf,
    InvariantViolation,
    SummarizerError,
    ProviderError,
    MalformedResponse,
    InvalidSpec,
    DigestMismatch,
    UsageError,
    IoError,
};

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::InvalidPose: return "InvalidPose";
        case ErrorCode::UnknownNode: return "UnknownNode";
        case ErrorCode::SelfLoop: return "SelfLoop";
        case ErrorCode::NegativeCost: return "NegativeCost";
        case ErrorCode::Unreachable: return "Unreachable";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::EmptyMap: return "EmptyMap";
        case ErrorCode::NotALeaf: return "NotALeaf";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::SummarizerError: return "SummarizerError";
        case ErrorCode::ProviderError: return "ProviderError";
        case ErrorCode::MalformedResponse: return "MalformedResponse";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::DigestMismatch: return "DigestMismatch";
        case ErrorCode::UsageError: return "UsageError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    // Provider errors distinguish transient failures (worth a retry) from fatal ones.
    Error(ErrorCode code, std::string message, bool retryable)
        : Error(code, std::move(message)) {
        retryable_ = retryable;
    }

    ErrorCode code() const noexcept { return code_; }
    bool retryable() const noexcept { return retryable_; }

private:
    ErrorCode code_;
    bool retryable_ = false;
};

}  // namespace erag
