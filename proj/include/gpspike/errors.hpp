#pragma once

#include <stdexcept>
#include <string>

namespace gpspike {

enum class ErrorKind {
    NoBracket,
    TailNotDecayed,
    ZeroField,
    NoConvergence,
    NotSolvable,
    SingularSystem,
    WrongCase,
    Collapse,
    GridTooCoarse,
    BallOutsideGrid,
    InsufficientPoints,
    InputError,
};

const char* kind_name(ErrorKind kind);

// Single exception type for the whole library; the kind drives CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(kind_name(kind)) + ": " + what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NoBracket: return "NoBracket";
        case ErrorKind::TailNotDecayed: return "TailNotDecayed";
        case ErrorKind::ZeroField: return "ZeroField";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::NotSolvable: return "NotSolvable";
        case ErrorKind::SingularSystem: return "SingularSystem";
        case ErrorKind::WrongCase: return "WrongCase";
        case ErrorKind::Collapse: return "Collapse";
        case ErrorKind::GridTooCoarse: return "GridTooCoarse";
        case ErrorKind::BallOutsideGrid: return "BallOutsideGrid";
        case ErrorKind::InsufficientPoints: return "InsufficientPoints";
        case ErrorKind::InputError: return "InputError";
    }
    return "Unknown";
}

}  // namespace gpspike
