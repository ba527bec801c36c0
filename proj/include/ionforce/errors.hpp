#pragma once

#include <stdexcept>
#include <string>

namespace ionforce {

/// Invalid input: a domain invariant or a configuration value was violated.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Driving frequency too close to the trap frequency for the off-resonant model.
class ResonanceError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// A numerical routine could not reach the requested accuracy.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A fit did not converge or the data cannot identify the model parameters.
class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NonIdentifiableError : public FitError {
public:
    using FitError::FitError;
};

void require(bool condition, const std::string& message);

}  // namespace ionforce
