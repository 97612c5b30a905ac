#pragma once

#include <stdexcept>
#include <string>

namespace rfsad {

// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Cholesky pivot <= 0, or a covariance that is not symmetric positive definite.
class NotPositiveDefinite : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Configuration or hyperparameters that violate a documented invariant.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed input data: observation streams, snapshots, prior files.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

[[noreturn]] inline void domain_fail(const char* fn, const std::string& what) {
    throw DomainError(std::string(fn) + ": " + what);
}

}  // namespace detail
}  // namespace rfsad
