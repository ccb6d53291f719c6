#pragma once

#include "parityspace/types.hpp"

namespace parityspace {

enum class NormKind { two, inf };

/// Residual weighting M (l x nz) with the objective value it achieves and the
/// eigen/singular spectrum that certifies the solution. Rows of pencil-based
/// solutions are T_theta-orthonormal, so the weighted residual covariance is
/// identity-scaled.
struct OptimalWeight {
  Mat M;
  double objective = 0.0;
  Vec spectrum;
  bool swapped_pencil = false;  ///< KL solver only: contraction branch used
};

/// Norm-ratio weighting: M = Lambda^-1 U^T from the eigendecomposition
/// T_theta = U Lambda^2 U^T; maximizes |M G_delta|_i / |M G_theta|_i where
/// G are square roots. The solution depends only on T_theta.
OptimalWeight solve_j1(const Mat& t_theta, const Mat& t_delta_p, NormKind norm);

/// Ratio-trace weighting: rows are the top-l generalized eigenvectors of
/// (T_delta_sum, T_theta); maximizes tr(Theta^-1 M T_delta_sum M^T).
OptimalWeight solve_j2(const Mat& t_theta, const Mat& t_delta_sum, int l);

/// Divergence weighting: square M from the generalized eigenvectors of
/// (T_delta + T_theta, T_theta), swapping the pencil when the covariance
/// change contracts volume; maximizes the Kullback-Leibler divergence
/// between the weighted attacked and nominal residual distributions.
OptimalWeight solve_j2m(const Mat& t_theta, const Mat& t_delta);

/// Single-row Rayleigh weighting: top generalized eigenvector of
/// (T_delta_sum, T_theta); maximizes the quadratic-form ratio.
OptimalWeight solve_j3(const Mat& t_theta, const Mat& t_delta_sum);

/// Budgeted-trace weighting: l copies of the top generalized eigenvector
/// scaled to saturate tr(M T_theta M^T) = gamma; maximizes
/// tr(M T_delta_sum M^T) under that false-alarm budget. Rows are parallel,
/// so any l > 1 duplicates one scalar residual and the weighted covariance
/// is singular; detectors should use l = 1.
OptimalWeight solve_j4(const Mat& t_theta, const Mat& t_delta_sum, int l, double gamma);

/// Whitening weighting M = Lambda^-1 U^T: M T_theta M^T = I. Every index
/// above is maximized by a row recombination of this M, which makes it the
/// shared preprocessing choice.
OptimalWeight unified_solution(const Mat& t_theta);

/// Objective evaluators used for certification and reporting.
double eval_j1(const Mat& m, const Mat& t_theta, const Mat& t_delta_p, NormKind norm);
double eval_j2(const Mat& m, const Mat& t_theta, const Mat& t_delta_sum);
double eval_kl(const Mat& m, const Mat& t_theta, const Mat& t_delta);
double eval_j3(const Mat& m, const Mat& t_theta, const Mat& t_delta_sum);
double eval_j4(const Mat& m, const Mat& t_delta_sum);

}  // namespace parityspace
