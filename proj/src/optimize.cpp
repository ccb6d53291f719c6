#include "parityspace/optimize.hpp"

#include "parityspace/detect.hpp"
#include "parityspace/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace parityspace {
namespace {

void check_symmetric(const Mat& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw InvalidInputError(std::string(what) + ": matrix must be square and non-empty");
  }
  require_finite(m, what);
  if ((m - m.transpose()).cwiseAbs().maxCoeff() >
      1e-8 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    throw InvalidInputError(std::string(what) + ": matrix must be symmetric");
  }
}

// M = Lambda^-1 U^T with T = U Lambda^2 U^T, eigenvalues descending.
OptimalWeight whitening_weight(const Mat& t_theta, const char* what) {
  check_symmetric(t_theta, what);
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(t_theta));
  if (es.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + ": eigendecomposition failed");
  }
  const int nz = static_cast<int>(t_theta.rows());
  const Vec evals_asc = es.eigenvalues();
  const double tol = nz * std::numeric_limits<double>::epsilon() *
                     std::max(std::abs(evals_asc(0)), std::abs(evals_asc(nz - 1)));
  OptimalWeight w;
  w.spectrum = Vec(nz);
  Mat u(nz, nz);
  for (int i = 0; i < nz; ++i) {
    const double lam = evals_asc(nz - 1 - i);
    if (lam <= tol) {
      throw NumericalError(std::string(what) +
                           ": covariance is rank deficient, whitening fails");
    }
    w.spectrum(i) = std::sqrt(lam);
    u.col(i) = es.eigenvectors().col(nz - 1 - i);
  }
  w.M = w.spectrum.cwiseInverse().asDiagonal() * u.transpose();
  return w;
}

double log_det_spd(const Mat& m, const char* what) {
  Eigen::LLT<Mat> llt(sym(m));
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + ": matrix is not positive definite");
  }
  const Mat l = llt.matrixL();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) acc += std::log(l(i, i));
  return 2.0 * acc;
}

double matrix_norm(const Mat& m, NormKind norm) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  if (norm == NormKind::two) {
    const Svd s = svd(m);
    return s.sigma.size() > 0 ? s.sigma(0) : 0.0;
  }
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace

OptimalWeight solve_j1(const Mat& t_theta, const Mat& t_delta_p, NormKind norm) {
  check_symmetric(t_delta_p, "solve_j1 (change portion)");
  if (t_delta_p.rows() != t_theta.rows()) {
    throw InvalidInputError("solve_j1: matrices must share dimensions");
  }
  OptimalWeight w = whitening_weight(t_theta, "solve_j1");
  w.objective = matrix_norm(w.M * psd_sqrt(t_delta_p), norm);
  return w;
}

OptimalWeight solve_j2(const Mat& t_theta, const Mat& t_delta_sum, int l) {
  check_symmetric(t_delta_sum, "solve_j2 (change sum)");
  const int nz = static_cast<int>(t_theta.rows());
  if (l < 1 || l > nz) throw InvalidInputError("solve_j2: need 1 <= l <= nz");
  const GenEig ge = gen_eig_spd(sym(t_delta_sum), sym(t_theta));
  OptimalWeight w;
  w.M = ge.vectors.leftCols(l).transpose();
  w.spectrum = ge.values;
  w.objective = ge.values.head(l).sum();
  return w;
}

OptimalWeight solve_j2m(const Mat& t_theta, const Mat& t_delta) {
  check_symmetric(t_delta, "solve_j2m (change)");
  if (t_delta.rows() != t_theta.rows()) {
    throw InvalidInputError("solve_j2m: matrices must share dimensions");
  }
  const Mat t_alpha = sym(t_theta + t_delta);
  const double log_ratio =
      log_det_spd(t_alpha, "solve_j2m (attacked)") - log_det_spd(t_theta, "solve_j2m (nominal)");

  OptimalWeight w;
  w.swapped_pencil = !(log_ratio > 0.0);
  const GenEig ge = w.swapped_pencil ? gen_eig_spd(sym(t_theta), t_alpha)
                                     : gen_eig_spd(t_alpha, sym(t_theta));
  w.M = ge.vectors.transpose();
  w.spectrum = ge.values;
  w.objective = eval_kl(w.M, t_theta, t_delta);
  return w;
}

OptimalWeight solve_j3(const Mat& t_theta, const Mat& t_delta_sum) {
  check_symmetric(t_delta_sum, "solve_j3 (change sum)");
  const GenEig ge = gen_eig_spd(sym(t_delta_sum), sym(t_theta));
  OptimalWeight w;
  w.M = ge.vectors.col(0).transpose();
  w.spectrum = ge.values;
  w.objective = ge.values(0);
  return w;
}

OptimalWeight solve_j4(const Mat& t_theta, const Mat& t_delta_sum, int l, double gamma) {
  check_symmetric(t_delta_sum, "solve_j4 (change sum)");
  if (l < 1) throw InvalidInputError("solve_j4: need l >= 1");
  if (!(gamma > 0.0)) throw InvalidInputError("solve_j4: false-alarm budget must be positive");
  const GenEig ge = gen_eig_spd(sym(t_delta_sum), sym(t_theta));
  const double a = std::sqrt(gamma / l);  // rows saturate tr(M T_theta M^T) = gamma
  OptimalWeight w;
  w.M = a * ge.vectors.col(0).transpose().replicate(l, 1);
  w.spectrum = ge.values;
  w.objective = ge.values(0) * gamma;
  return w;
}

OptimalWeight unified_solution(const Mat& t_theta) {
  return whitening_weight(t_theta, "unified_solution");
}

double eval_j1(const Mat& m, const Mat& t_theta, const Mat& t_delta_p, NormKind norm) {
  const double denom = matrix_norm(m * psd_sqrt(t_theta), norm);
  if (denom <= 0.0) throw InvalidInputError("eval_j1: weighting annihilates the nominal covariance");
  return matrix_norm(m * psd_sqrt(t_delta_p), norm) / denom;
}

double eval_j2(const Mat& m, const Mat& t_theta, const Mat& t_delta_sum) {
  const Mat theta = sym(m * t_theta * m.transpose());
  Eigen::LLT<Mat> llt(theta);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("eval_j2: weighted covariance is not positive definite");
  }
  return llt.solve(m * t_delta_sum * m.transpose()).trace();
}

double eval_kl(const Mat& m, const Mat& t_theta, const Mat& t_delta) {
  const Mat theta = sym(m * t_theta * m.transpose());
  const Mat theta_alpha = sym(m * (t_theta + t_delta) * m.transpose());
  return kl_divergence(theta, theta_alpha);
}

double eval_j3(const Mat& m, const Mat& t_theta, const Mat& t_delta_sum) {
  if (m.rows() != 1) throw InvalidInputError("eval_j3: weighting must be a single row");
  const double denom = (m * t_theta * m.transpose())(0, 0);
  if (denom <= 0.0) throw InvalidInputError("eval_j3: weighting annihilates the nominal covariance");
  return (m * t_delta_sum * m.transpose())(0, 0) / denom;
}

double eval_j4(const Mat& m, const Mat& t_delta_sum) {
  return (m * t_delta_sum * m.transpose()).trace();
}

}  // namespace parityspace
