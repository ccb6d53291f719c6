#include "parityspace/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <string>

namespace parityspace {

namespace {
constexpr double kEps = std::numeric_limits<double>::epsilon();
}

bool is_finite(const Mat& m) { return m.allFinite(); }

void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) {
    throw InvalidInputError(std::string(what) + ": non-finite entries");
  }
}

Mat sym(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw InvalidInputError("sym: matrix must be square");
  }
  return 0.5 * (m + m.transpose());
}

Svd svd(const Mat& m) {
  require_finite(m, "svd");
  Eigen::JacobiSVD<Mat> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Svd out;
  out.u = dec.matrixU();
  out.sigma = dec.singularValues();
  out.v = dec.matrixV();
  const double smax = out.sigma.size() > 0 ? out.sigma(0) : 0.0;
  out.tol = static_cast<double>(std::max(m.rows(), m.cols())) * kEps * smax;
  out.rank = 0;
  for (Eigen::Index i = 0; i < out.sigma.size(); ++i) {
    if (out.sigma(i) > out.tol) ++out.rank;
  }
  return out;
}

Mat null_space_left(const Mat& m) {
  require_finite(m, "null_space_left");
  Eigen::JacobiSVD<Mat> dec(m, Eigen::ComputeFullU);
  const Vec& sv = dec.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  const double tol = static_cast<double>(std::max(m.rows(), m.cols())) * kEps * smax;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++rank;
  }
  const Eigen::Index dim = m.rows() - rank;
  return dec.matrixU().rightCols(dim).transpose();
}

GenEig gen_eig_spd(const Mat& s, const Mat& t) {
  require_finite(s, "gen_eig_spd: S");
  require_finite(t, "gen_eig_spd: T");
  if (s.rows() != s.cols() || t.rows() != t.cols() || s.rows() != t.rows()) {
    throw InvalidInputError("gen_eig_spd: S and T must be square of equal size");
  }
  const double s_scale = s.norm();
  const double t_scale = t.norm();
  if ((s - s.transpose()).norm() > 1e-8 * std::max(1.0, s_scale) ||
      (t - t.transpose()).norm() > 1e-8 * std::max(1.0, t_scale)) {
    throw InvalidInputError("gen_eig_spd: inputs must be symmetric");
  }
  const Mat ss = sym(s);
  const Mat tt = sym(t);
  Eigen::LLT<Mat> llt(tt);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("gen_eig_spd: T is not positive definite");
  }
  const Mat l = llt.matrixL();
  // Reduce to the ordinary symmetric problem W y = lambda y with
  // W = L^-1 S L^-T, then map eigenvectors back through v = L^-T y.
  Mat w = l.triangularView<Eigen::Lower>().solve(ss);
  w = l.triangularView<Eigen::Lower>().solve(w.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Mat> eig(sym(w));
  if (eig.info() != Eigen::Success) {
    throw NumericalError("gen_eig_spd: eigendecomposition failed");
  }
  const Eigen::Index n = s.rows();
  GenEig out;
  out.values = Vec(n);
  out.vectors = Mat(n, n);
  // Eigen returns ascending order; flip to descending.
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = eig.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = eig.eigenvectors().col(n - 1 - i);
  }
  out.vectors = l.transpose().triangularView<Eigen::Upper>().solve(out.vectors);
  return out;
}

double spectral_radius(const Mat& a) {
  require_finite(a, "spectral_radius");
  if (a.rows() != a.cols()) {
    throw InvalidInputError("spectral_radius: matrix must be square");
  }
  if (a.rows() == 0) return 0.0;
  Eigen::EigenSolver<Mat> eig(a, /*computeEigenvectors=*/false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

Mat dlyap(const Mat& a, const Mat& w) {
  require_finite(a, "dlyap: A");
  require_finite(w, "dlyap: W");
  if (a.rows() != a.cols() || w.rows() != w.cols() || a.rows() != w.rows()) {
    throw InvalidInputError("dlyap: A and W must be square of equal size");
  }
  if ((w - w.transpose()).norm() > 1e-8 * std::max(1.0, w.norm())) {
    throw InvalidInputError("dlyap: W must be symmetric");
  }
  const double rho = spectral_radius(a);
  if (rho >= 1.0 - 1e-12) {
    throw UnstableError("dlyap: spectral radius " + std::to_string(rho) +
                        " >= 1, no stationary solution");
  }
  Mat p = sym(w);
  Mat x = a;
  const double tol = 1e-14 * std::max(1.0, p.norm());
  for (int it = 0; it < 200; ++it) {
    const Mat inc = x * p * x.transpose();
    p = sym(p + inc);
    x = x * x;
    if (inc.norm() <= tol) return p;
    if (!p.allFinite()) break;
  }
  throw UnstableError("dlyap: doubling iteration did not converge");
}

Mat psd_sqrt(const Mat& m) {
  require_finite(m, "psd_sqrt");
  const Mat mm = sym(m);
  Eigen::SelfAdjointEigenSolver<Mat> eig(mm);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("psd_sqrt: eigendecomposition failed");
  }
  const Vec& ev = eig.eigenvalues();
  const double emax = ev.size() > 0 ? std::max(0.0, ev.maxCoeff()) : 0.0;
  const double tol = 1e-10 * std::max(1.0, emax);
  Vec root(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -tol) {
      throw NumericalError("psd_sqrt: matrix has a significantly negative eigenvalue");
    }
    root(i) = std::sqrt(std::max(0.0, ev(i)));
  }
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace parityspace
