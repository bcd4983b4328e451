#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tailbound {

// Root of the library's exception hierarchy.  Everything thrown on purpose
// derives from this, so callers can catch tailbound::Error at the boundary.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user-supplied configuration (JSON config files, CLI arguments).
class ConfigError : public Error {
public:
    using Error::Error;
};

// A function was called with arguments outside its contract.
class ParameterError : public Error {
public:
    using Error::Error;
};

// Evaluation requested at a point where the quantity is undefined or has
// numerically underflowed past the point of being meaningful.
class DomainError : public Error {
public:
    using Error::Error;
};

// Adaptive integration failed to reach the requested tolerance.
class QuadratureError : public Error {
public:
    QuadratureError(const std::string& msg, double achieved_tol)
        : Error(msg), achieved_tol(achieved_tol) {}
    double achieved_tol;
};

// Root finding failed: the target function has no sign change on the
// searchable range.
class NoRootError : public Error {
public:
    using Error::Error;
};

// The model has no finite exponential moment, so exponential-change-of-measure
// machinery does not apply to it.
class NoExponentError : public Error {
public:
    using Error::Error;
};

// One (t, value, reference) sample of a verification curve, kept with a failed
// certification so the caller can still write a diagnostic trace.
struct CurvePoint {
    double t;
    double value;
    double reference;
};

// A drift or side-condition verification failed.  Carries the worst offending
// point and the whole verification curve.
class CertificationError : public Error {
public:
    CertificationError(const std::string& msg, double worst_t, double worst_value,
                       std::vector<CurvePoint> curve = {})
        : Error(msg), worst_t(worst_t), worst_value(worst_value), curve(std::move(curve)) {}
    double worst_t;
    double worst_value;
    std::vector<CurvePoint> curve;
};

// A required input artifact (file produced by an earlier pipeline stage) is
// missing or malformed.
class DependencyError : public Error {
public:
    using Error::Error;
};

// A Monte Carlo self-check failed beyond its statistical allowance.
class StatCheckError : public Error {
public:
    using Error::Error;
};

// Filesystem-level failure while writing or reading run artifacts.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace tailbound
