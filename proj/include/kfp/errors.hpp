#pragma once

#include <stdexcept>
#include <string>

namespace kfp {

// Argument sits on a pole of Gamma or of a Kummer/Tricomi parameter.
class PoleError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Parameter outside the documented admissible range.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Result not representable in double (overflow).
class RangeError : public std::range_error {
public:
    using std::range_error::range_error;
};

// Adaptive quadrature or series failed to reach the requested tolerance.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, int level)
        : std::runtime_error(what), level_(level) {}
    int level() const { return level_; }

private:
    int level_;
};

// Iteration did not contract or did not converge.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double ratio)
        : std::runtime_error(what), ratio_(ratio) {}
    double ratio() const { return ratio_; }

private:
    double ratio_;
};

// Time-stepper produced a non-finite value or broke its stability contract.
class NumericalAbort : public std::runtime_error {
public:
    NumericalAbort(const std::string& what, double t, int ix, int iv)
        : std::runtime_error(what), t_(t), ix_(ix), iv_(iv) {}
    double time() const { return t_; }
    int ix() const { return ix_; }
    int iv() const { return iv_; }

private:
    double t_;
    int ix_, iv_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Velocity window too small for the requested quantity.
class TruncationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string format_where(double t, int ix, int iv);

}  // namespace kfp
