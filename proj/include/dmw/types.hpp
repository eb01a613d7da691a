#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dmw {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed objects that do not belong together (e.g. cubes from two grids).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Requested resolution exceeds the configured cell cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A Haar function or operator is not resolved by the finest cells.
class ResolutionError : public Error {
 public:
  using Error::Error;
};

/// Input data violates an invariant (non-Hermitian block, shift normalization, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Iterative method failed or a value became non-finite.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace dmw
