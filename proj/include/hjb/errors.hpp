#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hjb {

enum class ErrorKind {
    config,
    usage,
    domain,
    degenerate_denominator,
    cfl_violation,
    not_implemented,
    nonconvergence,
    overflow,
};

inline const char* kind_name(ErrorKind k)
{
    switch (k) {
    case ErrorKind::config: return "config";
    case ErrorKind::usage: return "usage";
    case ErrorKind::domain: return "domain";
    case ErrorKind::degenerate_denominator: return "degenerate_denominator";
    case ErrorKind::cfl_violation: return "cfl_violation";
    case ErrorKind::not_implemented: return "not_implemented";
    case ErrorKind::nonconvergence: return "nonconvergence";
    case ErrorKind::overflow: return "overflow";
    }
    return "unknown";
}

// process exit status used by the command line driver
inline int exit_code(ErrorKind k)
{
    switch (k) {
    case ErrorKind::config:
    case ErrorKind::usage: return 2;
    case ErrorKind::domain:
    case ErrorKind::degenerate_denominator:
    case ErrorKind::cfl_violation:
    case ErrorKind::not_implemented: return 3;
    case ErrorKind::nonconvergence: return 4;
    case ErrorKind::overflow: return 5;
    }
    return 1;
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Newton failure keeps the last iterate for inspection.
class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, std::vector<double> last, double norm, int iters)
        : Error(ErrorKind::nonconvergence, what), last_iterate(std::move(last)),
          residual_norm(norm), iterations(iters) {}

    std::vector<double> last_iterate;
    double residual_norm;
    int iterations;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what)
{
    throw Error(kind, what);
}

} // namespace hjb
