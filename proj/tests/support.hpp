#pragma once

// Shared helpers for the unit tests: seeded random matrix generators and
// small independent oracles that the library code must agree with.

#include <parityspace/linalg.hpp>
#include <parityspace/types.hpp>

#include <random>

namespace testsupport {

using parityspace::Mat;
using parityspace::Vec;

inline Mat random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * n01(rng);
  return m;
}

/// Random symmetric positive definite matrix with eigenvalues bounded away
/// from zero.
inline Mat random_spd(std::mt19937_64& rng, int n, double ridge = 0.5) {
  const Mat g = random_matrix(rng, n, n);
  return g * g.transpose() + ridge * Mat::Identity(n, n);
}

/// Random square matrix rescaled to a target spectral radius.
inline Mat random_stable(std::mt19937_64& rng, int n, double radius = 0.9) {
  Mat a = random_matrix(rng, n, n);
  const double r = parityspace::spectral_radius(a);
  if (r > 0.0) a *= radius / r;
  return a;
}

/// Independent oracle for the discrete Lyapunov equation: the truncated
/// power series  P = sum_k A^k W (A^T)^k  summed until the increment norm
/// drops below 1e-12 (relative). Deliberately naive.
inline Mat dlyap_series(const Mat& a, const Mat& w, double tol = 1e-12) {
  Mat p = w;
  Mat x = a;
  const double scale = std::max(1.0, w.norm());
  for (int k = 0; k < 100000; ++k) {
    const Mat inc = x * w * x.transpose();
    p += inc;
    x = a * x;
    if (inc.norm() < tol * scale) break;
  }
  return p;
}

}  // namespace testsupport
