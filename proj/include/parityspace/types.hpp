#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace parityspace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed caller input: dimension mismatches, non-finite entries,
/// out-of-range scalars, inconsistent scenario definitions.
struct InvalidInputError : Error {
  using Error::Error;
};

/// Required numerical structure is absent: matrix pencil not symmetric
/// positive definite, singular covariance, rank collapse.
struct NumericalError : Error {
  using Error::Error;
};

/// A stability precondition is violated (spectral radius >= 1 where a
/// convergent steady state is required).
struct UnstableError : Error {
  using Error::Error;
};

/// An iterative synthesis (Riccati recursion, threshold calibration)
/// failed to converge.
struct SynthesisError : Error {
  using Error::Error;
};

/// Invalid experiment configuration; the CLI maps this to exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace parityspace
