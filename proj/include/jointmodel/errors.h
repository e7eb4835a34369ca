#pragma once

#include <stdexcept>
#include <string>

namespace jointmodel
{

// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error
{
public:
    using Error::Error;
};

// Cholesky failure, non-finite density or similar; carries the individual
// id when the failure can be attributed to one.
class NumericError : public Error
{
public:
    explicit NumericError(const std::string& what, std::string individual = {})
        : Error(individual.empty() ? what : what + " (individual " + individual + ")"),
          individual_(std::move(individual))
    {
    }

    const std::string& individual() const noexcept { return individual_; }

private:
    std::string individual_;
};

class SingularCovariance : public NumericError
{
public:
    using NumericError::NumericError;
};

class ConfigError : public Error
{
public:
    using Error::Error;
};

class DataError : public Error
{
public:
    using Error::Error;
};

class DomainError : public Error
{
public:
    using Error::Error;
};

// Raised when the sampler state leaves the support of the posterior.
class InvariantViolation : public Error
{
public:
    using Error::Error;
};

class InitializationError : public Error
{
public:
    using Error::Error;
};

class DegenerateChain : public Error
{
public:
    using Error::Error;
};

class IngestionError : public Error
{
public:
    using Error::Error;
};

class FormatError : public Error
{
public:
    using Error::Error;
};

}  // namespace jointmodel
