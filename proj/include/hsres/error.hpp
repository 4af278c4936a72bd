#pragma once

#include <stdexcept>
#include <string>

namespace hsres {

enum class ErrorKind {
    Validation,          // malformed input record
    Domain,              // argument outside the operation's domain
    SingularMatrix,      // a required inverse does not exist
    ClosedChannel,       // energy below a channel threshold
    UnsupportedShape,    // operation defined for another channel count
    PoleEvaluation,      // model evaluated exactly at its pole
    DegenerateBackground,
    InconsistentParameters,
    Convergence,
    Tracking,
    MatchingQuality,
    NoOpenChannel,
    Bracket,
    Io,
    Stage,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::SingularMatrix: return "matrix inversion failure";
    case ErrorKind::ClosedChannel: return "closed channel";
    case ErrorKind::UnsupportedShape: return "unsupported shape";
    case ErrorKind::PoleEvaluation: return "pole evaluation";
    case ErrorKind::DegenerateBackground: return "degenerate background";
    case ErrorKind::InconsistentParameters: return "inconsistent parameters";
    case ErrorKind::Convergence: return "no convergence";
    case ErrorKind::Tracking: return "tracking error";
    case ErrorKind::MatchingQuality: return "matching quality";
    case ErrorKind::NoOpenChannel: return "no open channel";
    case ErrorKind::Bracket: return "bracket error";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Stage: return "stage error";
    }
    return "error";
}

inline void require(bool condition, ErrorKind kind, const std::string& what)
{
    if (!condition)
        throw Error(kind, what);
}

} // namespace hsres
