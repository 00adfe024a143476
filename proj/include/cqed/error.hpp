#pragma once

#include <stdexcept>
#include <string>

namespace cqed {

/// Argument or configuration violates a documented precondition.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The integrator could not make progress (step-size underflow, non-finite state).
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative procedure did not reach its stopping criterion.
class ConvergenceFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A decay curve has no burst or dip distinguishable from its baseline.
class NoFeature : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed text input (CSV/JSON); message carries line/column or key path.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cqed
