#pragma once

#include <stdexcept>
#include <string>

namespace riverflow {

/// Raised when caller-supplied data violates a documented precondition.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a numerical procedure cannot produce a result (dry section,
/// non-convergence, rank deficiency).
class SolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for malformed files.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message)
{
    if (!condition) throw InputError(message);
}

} // namespace riverflow
