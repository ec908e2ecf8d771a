#pragma once

#include <stdexcept>
#include <string>

namespace qv {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad shapes, mismatched q/n, malformed files.
struct InvalidInput : Error {
    using Error::Error;
};

// Argument is well-formed but outside the operation's domain
// (point not on the cone, hypothesis of an estimate violated).
struct DomainError : Error {
    using Error::Error;
};

struct ConvergenceError : Error {
    ConvergenceError(const std::string& what, double best)
        : Error(what), best_residual(best) {}
    double best_residual;
};

// Desk-scale enumeration bounds.
struct CapabilityError : Error {
    using Error::Error;
};

}  // namespace qv
