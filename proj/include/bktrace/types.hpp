#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace bktrace {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using Index = Eigen::Index;

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter lies outside the domain of the operation (e.g. tau >= 1, p < 2).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Matrix dimensions are inconsistent with the operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A matrix that must have full rank does not (numerically).
class RankError : public Error {
public:
    using Error::Error;
};

/// Input violates a documented contract (e.g. a symmetric argument that is not).
class ContractError : public Error {
public:
    using Error::Error;
};

/// A matrix expected to be positive semi-definite is not.
class PsdError : public Error {
public:
    using Error::Error;
};

/// Malformed or unacceptable external input (files, configuration).
class InputError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool condition, const char* what)
{
    if (!condition) throw ParameterError(what);
}

} // namespace detail

} // namespace bktrace
