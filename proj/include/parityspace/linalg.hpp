#pragma once

#include "parityspace/types.hpp"

namespace parityspace {

/// Thin singular value decomposition m = u * diag(sigma) * v^T with the
/// numerical rank decided by the tolerance max(rows, cols) * eps * sigma_max.
struct Svd {
  Mat u;        ///< left singular vectors, one column per singular value
  Vec sigma;    ///< singular values, descending
  Mat v;        ///< right singular vectors, one column per singular value
  int rank;     ///< number of singular values above tol
  double tol;   ///< absolute cutoff used for the rank decision
};

Svd svd(const Mat& m);

/// Orthonormal rows spanning the left null space {z : z * m = 0}.
/// Returns a (rows(m) - rank(m)) x rows(m) matrix; zero rows when m has
/// full row rank.
Mat null_space_left(const Mat& m);

/// Generalized symmetric-definite eigenproblem S v = lambda T v with T
/// symmetric positive definite. Eigenvalues descending; eigenvector columns
/// are T-orthonormal (V^T T V = I). Throws NumericalError when T is not SPD
/// and InvalidInputError when S (or T) is not symmetric.
struct GenEig {
  Vec values;
  Mat vectors;
};

GenEig gen_eig_spd(const Mat& s, const Mat& t);

/// Discrete Lyapunov equation P = A P A^T + W solved by fixed-point doubling
/// (P <- P + X P X^T, X <- X X until the increment is negligible).
/// Requires spectral radius(A) < 1 and W symmetric; throws UnstableError
/// otherwise. The result is exactly symmetric.
Mat dlyap(const Mat& a, const Mat& w);

/// Largest absolute eigenvalue of a square matrix.
double spectral_radius(const Mat& a);

/// Symmetric part (m + m^T) / 2.
Mat sym(const Mat& m);

/// Symmetric PSD square root via eigendecomposition; eigenvalues below
/// -tol * max_eig are rejected, small negatives are clamped to zero.
Mat psd_sqrt(const Mat& m);

/// True when every entry is finite.
bool is_finite(const Mat& m);

/// Throws InvalidInputError when the matrix has NaN or infinite entries.
void require_finite(const Mat& m, const char* what);

}  // namespace parityspace
