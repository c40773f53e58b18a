#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace emtp2 {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (shape, sign, validity).
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A factorization or decomposition broke down on otherwise well-formed input.
class NumericError : public Error {
public:
    using Error::Error;
};

/// An iterative method ran out of iterations.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// The empirical variogram has a non-positive off-diagonal entry, so the
/// constrained estimator does not exist. Indices are zero-based.
class ExistenceError : public InvalidInput {
public:
    ExistenceError(std::size_t i, std::size_t j, double value);

    std::size_t i() const noexcept { return i_; }
    std::size_t j() const noexcept { return j_; }
    double value() const noexcept { return value_; }

private:
    std::size_t i_;
    std::size_t j_;
    double value_;
};

}  // namespace emtp2
