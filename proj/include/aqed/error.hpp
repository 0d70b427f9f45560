#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aqed {

/// Failure classes surfaced by the library. Each maps to one diagnostic name
/// (see error_class_name) and, in the CLI, to one exit code family.
enum class ErrorKind {
    Syntax,
    Annotation,
    Bound,
    Region,
    UnrollCap,
    Wiring,
    Composability,
    StepBudgetExceeded,
    ExplosionCap,
    NotApplicable,
    Spec,
    ReplayMismatch,
    EmptyInterface,
    Config,
    Internal,
};

constexpr std::string_view error_class_name(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Syntax: return "SyntaxError";
    case ErrorKind::Annotation: return "AnnotationError";
    case ErrorKind::Bound: return "BoundError";
    case ErrorKind::Region: return "RegionError";
    case ErrorKind::UnrollCap: return "UnrollCap";
    case ErrorKind::Wiring: return "WiringError";
    case ErrorKind::Composability: return "ComposabilityError";
    case ErrorKind::StepBudgetExceeded: return "StepBudgetExceeded";
    case ErrorKind::ExplosionCap: return "ExplosionCap";
    case ErrorKind::NotApplicable: return "NotApplicable";
    case ErrorKind::Spec: return "SpecError";
    case ErrorKind::ReplayMismatch: return "ReplayMismatch";
    case ErrorKind::EmptyInterface: return "EmptyInterface";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Internal: return "InternalError";
    }
    return "Error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_class_name(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Parse-time error carrying a source position.
class SourceError : public Error {
public:
    SourceError(ErrorKind kind, int line, int column, const std::string& message)
        : Error(kind, std::to_string(line) + ":" + std::to_string(column) + ": " + message),
          line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

/// Composability violation; `condition` is the index (1..5) of the failed
/// clause: batch size, alphabet match, control disjointness, relevant
/// region identity, non-relevant factorization.
class ComposabilityError : public Error {
public:
    ComposabilityError(int condition, const std::string& message)
        : Error(ErrorKind::Composability, "condition (" + roman(condition) + "): " + message),
          condition_(condition) {}

    int condition() const noexcept { return condition_; }

private:
    static std::string roman(int c) {
        static const char* names[] = {"?", "i", "ii", "iii", "iv", "v"};
        return (c >= 1 && c <= 5) ? names[c] : names[0];
    }
    int condition_;
};

} // namespace aqed
