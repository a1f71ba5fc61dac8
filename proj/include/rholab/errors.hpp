#pragma once

#include <stdexcept>
#include <string>

namespace rholab {

// Bad input or configuration (CLI exit code 2).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A solver could not produce a trustworthy number: CFL violation,
// non-convergence, regression breakdown (CLI exit code 3).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The problem is well posed but its value is +inf (CLI exit code 4).
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rholab
