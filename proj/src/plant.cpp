#include "parityspace/plant.hpp"

#include "parityspace/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <string>

namespace parityspace {

namespace {

void require_psd(const Mat& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw InvalidInputError(std::string(what) + ": must be square");
  }
  if ((m - m.transpose()).norm() > 1e-10 * std::max(1.0, m.norm())) {
    throw InvalidInputError(std::string(what) + ": must be symmetric");
  }
  if (m.rows() == 0) return;
  Eigen::SelfAdjointEigenSolver<Mat> eig(sym(m));
  const double emax = std::max(1.0, eig.eigenvalues().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-10 * emax) {
    throw InvalidInputError(std::string(what) + ": must be positive semidefinite");
  }
}

Mat solve_spd(const Mat& m, const Mat& rhs, const char* what) {
  Eigen::LLT<Mat> llt(sym(m));
  if (llt.info() != Eigen::Success) {
    throw SynthesisError(std::string(what) + ": innovation matrix not positive definite");
  }
  return llt.solve(rhs);
}

}  // namespace

LtiSystem make_system(const Mat& a, const Mat& bu, const Mat& bw, const Mat& c,
                      const Mat& q, const Mat& r) {
  LtiSystem sys{a, bu, bw, c, q, r};
  const int n = sys.state_dim();
  require_finite(a, "system A");
  require_finite(bu, "system Bu");
  require_finite(bw, "system Bw");
  require_finite(c, "system C");
  require_finite(q, "system Q");
  require_finite(r, "system R");
  if (a.rows() != a.cols()) throw InvalidInputError("system: A must be square");
  if (bu.rows() != n || bw.rows() != n || c.cols() != n) {
    throw InvalidInputError("system: Bu/Bw/C dimensions inconsistent with A");
  }
  if (bu.cols() < 1 || bw.cols() < 1 || c.rows() < 1) {
    throw InvalidInputError("system: input, noise and output dimensions must be positive");
  }
  if (q.rows() != bw.cols() || r.rows() != c.rows()) {
    throw InvalidInputError("system: Q/R sizes must match noise/output dimensions");
  }
  require_psd(q, "system Q");
  require_psd(r, "system R");
  return sys;
}

Controller make_static_controller(const Mat& f, int output_dim) {
  require_finite(f, "controller F");
  if (f.cols() != output_dim) {
    throw InvalidInputError("static controller: F column count must equal output dimension");
  }
  Controller ctrl;
  ctrl.Ac = Mat::Zero(0, 0);
  ctrl.Bc = Mat::Zero(0, output_dim);
  ctrl.Cc = Mat::Zero(f.rows(), 0);
  ctrl.Dc = f;
  return ctrl;
}

Controller make_observer_controller(const LtiSystem& sys, const Mat& k, const Mat& l) {
  require_finite(k, "controller K");
  require_finite(l, "controller L");
  const int n = sys.state_dim();
  if (k.rows() != sys.input_dim() || k.cols() != n) {
    throw InvalidInputError("observer controller: K must be input_dim x state_dim");
  }
  if (l.rows() != n || l.cols() != sys.output_dim()) {
    throw InvalidInputError("observer controller: L must be state_dim x output_dim");
  }
  Controller ctrl;
  ctrl.Ac = sys.A + sys.Bu * k - l * sys.C;
  ctrl.Bc = l;
  ctrl.Cc = k;
  ctrl.Dc = Mat::Zero(sys.input_dim(), sys.output_dim());
  ctrl.K = k;
  ctrl.L = l;
  ctrl.observer_form = true;
  return ctrl;
}

Controller make_dynamic_controller(const Mat& ac, const Mat& bc, const Mat& cc, const Mat& dc) {
  require_finite(ac, "controller Ac");
  require_finite(bc, "controller Bc");
  require_finite(cc, "controller Cc");
  require_finite(dc, "controller Dc");
  if (ac.rows() != ac.cols() || bc.rows() != ac.rows() || cc.cols() != ac.rows() ||
      dc.rows() != cc.rows() || dc.cols() != bc.cols()) {
    throw InvalidInputError("dynamic controller: inconsistent realization dimensions");
  }
  Controller ctrl;
  ctrl.Ac = ac;
  ctrl.Bc = bc;
  ctrl.Cc = cc;
  ctrl.Dc = dc;
  return ctrl;
}

Controller lqg_synthesize(const LtiSystem& sys, const Mat& state_weight,
                          const Mat& input_weight) {
  const int n = sys.state_dim();
  const int m = sys.input_dim();
  const Mat qx = state_weight.size() > 0 ? state_weight : Mat::Identity(n, n);
  const Mat ru = input_weight.size() > 0 ? input_weight : Mat::Identity(m, m);
  require_psd(qx, "lqg state weight");
  require_psd(ru, "lqg input weight");

  constexpr int kMaxIter = 200000;
  constexpr double kTol = 1e-13;

  // Regulator Riccati recursion.
  Mat p = qx;
  bool converged = false;
  for (int it = 0; it < kMaxIter; ++it) {
    const Mat btp = sys.Bu.transpose() * p;
    const Mat gain = solve_spd(ru + btp * sys.Bu, btp * sys.A, "lqg regulator");
    const Mat next = sym(qx + sys.A.transpose() * p * sys.A -
                         sys.A.transpose() * p * sys.Bu * gain);
    const double diff = (next - p).norm();
    p = next;
    if (!p.allFinite()) throw SynthesisError("lqg: regulator recursion diverged");
    if (diff <= kTol * std::max(1.0, p.norm())) {
      converged = true;
      break;
    }
  }
  if (!converged) throw SynthesisError("lqg: regulator recursion did not converge");
  const Mat btp = sys.Bu.transpose() * p;
  const Mat k = -solve_spd(ru + btp * sys.Bu, btp * sys.A, "lqg regulator");

  // Filter Riccati recursion for the one-step-ahead observer gain.
  const Mat w = sys.Bw * sys.Q * sys.Bw.transpose();
  Mat sig = w;
  converged = false;
  for (int it = 0; it < kMaxIter; ++it) {
    const Mat cs = sys.C * sig;
    const Mat gain = solve_spd(cs * sys.C.transpose() + sys.R, cs * sys.A.transpose(),
                               "lqg filter");
    const Mat next = sym(w + sys.A * sig * sys.A.transpose() -
                         sys.A * sig * sys.C.transpose() * gain);
    const double diff = (next - sig).norm();
    sig = next;
    if (!sig.allFinite()) throw SynthesisError("lqg: filter recursion diverged");
    if (diff <= kTol * std::max(1.0, sig.norm())) {
      converged = true;
      break;
    }
  }
  if (!converged) throw SynthesisError("lqg: filter recursion did not converge");
  const Mat cs = sys.C * sig;
  const Mat l = (solve_spd(cs * sys.C.transpose() + sys.R, cs * sys.A.transpose(),
                           "lqg filter"))
                    .transpose();

  if (spectral_radius(sys.A + sys.Bu * k) >= 1.0) {
    throw UnstableError("lqg: regulator does not stabilize the plant");
  }
  if (spectral_radius(sys.A - l * sys.C) >= 1.0) {
    throw UnstableError("lqg: observer error dynamics unstable");
  }
  return make_observer_controller(sys, k, l);
}

ClosedLoop close_loop(const LtiSystem& sys, const Controller& ctrl) {
  const int n = sys.state_dim();
  const int nc = ctrl.state_dim();
  const int p = sys.output_dim();
  const int q = sys.noise_dim();
  if (ctrl.Bc.cols() != p || ctrl.Cc.rows() != sys.input_dim()) {
    throw InvalidInputError("close_loop: controller i/o dimensions do not match the plant");
  }

  ClosedLoop loop;
  loop.A = Mat::Zero(n + nc, n + nc);
  loop.A.topLeftCorner(n, n) = sys.A + sys.Bu * ctrl.Dc * sys.C;
  loop.A.topRightCorner(n, nc) = sys.Bu * ctrl.Cc;
  loop.A.bottomLeftCorner(nc, n) = ctrl.Bc * sys.C;
  loop.A.bottomRightCorner(nc, nc) = ctrl.Ac;
  loop.Gw = Mat::Zero(n + nc, q);
  loop.Gw.topRows(n) = sys.Bw;
  loop.Gv = Mat::Zero(n + nc, p);
  loop.Gv.topRows(n) = sys.Bu * ctrl.Dc;
  loop.Gv.bottomRows(nc) = ctrl.Bc;
  loop.C = Mat::Zero(p, n + nc);
  loop.C.leftCols(n) = sys.C;
  loop.plant_dim = n;
  loop.ctrl_offset = n;
  loop.ctrl_dim = nc;
  loop.output_noise = true;

  const double rho = spectral_radius(loop.A);
  if (rho >= 1.0) {
    throw UnstableError("close_loop: closed loop spectral radius " + std::to_string(rho));
  }
  return loop;
}

MarginalFilter make_filter(const Mat& az, const Mat& bz) {
  require_finite(az, "filter Az");
  require_finite(bz, "filter Bz");
  if (az.rows() != az.cols() || bz.rows() != az.rows()) {
    throw InvalidInputError("filter: Az must be square with as many rows as Bz");
  }
  const double rho = spectral_radius(az);
  if (rho > 1.0 + 1e-12) {
    throw InvalidInputError("filter: Az must have spectral radius <= 1");
  }
  const Svd f = svd(bz);
  if (f.rank != bz.cols()) {
    throw InvalidInputError("filter: Bz must have full column rank for recovery");
  }
  return MarginalFilter{az, bz};
}

MarginalFilter default_filter(int output_dim, double radius) {
  if (output_dim < 1) throw InvalidInputError("filter: output dimension must be positive");
  if (radius <= 0.0 || radius > 1.0) {
    throw InvalidInputError("filter: radius must lie in (0, 1]");
  }
  return make_filter(radius * Mat::Identity(output_dim, output_dim),
                     Mat::Identity(output_dim, output_dim));
}

Vec filter_step(const MarginalFilter& f, const Vec& zeta, const Vec& y) {
  return f.Az * zeta + f.Bz * y;
}

Vec recover_step(const MarginalFilter& f, const Vec& zeta_now, const Vec& zeta_prev) {
  const Vec rhs = zeta_now - f.Az * zeta_prev;
  return f.Bz.colPivHouseholderQr().solve(rhs);
}

LtiSystem augment_with_filter(const LtiSystem& sys, const MarginalFilter& f) {
  const int n = sys.state_dim();
  const int p = sys.output_dim();
  const int q = sys.noise_dim();
  if (f.Bz.cols() != p) {
    throw InvalidInputError("augment_with_filter: Bz column count must equal plant output dim");
  }
  const int pf = f.state_dim();

  Mat a = Mat::Zero(n + pf, n + pf);
  a.topLeftCorner(n, n) = sys.A;
  a.bottomLeftCorner(pf, n) = f.Bz * sys.C * sys.A;
  a.bottomRightCorner(pf, pf) = f.Az;

  Mat bu = Mat::Zero(n + pf, sys.input_dim());
  bu.topRows(n) = sys.Bu;
  bu.bottomRows(pf) = f.Bz * sys.C * sys.Bu;

  Mat bw = Mat::Zero(n + pf, q + p);
  bw.topLeftCorner(n, q) = sys.Bw;
  bw.bottomLeftCorner(pf, q) = f.Bz * sys.C * sys.Bw;
  bw.bottomRightCorner(pf, p) = f.Bz;

  Mat c = Mat::Zero(pf, n + pf);
  c.rightCols(pf) = Mat::Identity(pf, pf);

  Mat qbar = Mat::Zero(q + p, q + p);
  qbar.topLeftCorner(q, q) = sys.Q;
  qbar.bottomRightCorner(p, p) = sys.R;

  return make_system(a, bu, bw, c, qbar, Mat::Zero(pf, pf));
}

ClosedLoop close_loop_filtered(const LtiSystem& sys, const MarginalFilter& f,
                               const Controller& ctrl) {
  const int n = sys.state_dim();
  const int p = sys.output_dim();
  const int q = sys.noise_dim();
  const int pf = f.state_dim();
  const int nc = ctrl.state_dim();
  if (f.Bz.cols() != p) {
    throw InvalidInputError("close_loop_filtered: filter/plant output dimensions differ");
  }
  if (ctrl.Bc.cols() != p || ctrl.Cc.rows() != sys.input_dim()) {
    throw InvalidInputError("close_loop_filtered: controller i/o dimensions do not match");
  }

  // State X = [x; zeta; xc; nu] with nu(k) = v(k). The controller is fed the
  // exactly recovered output y = C x + nu, so the loop dynamics match the
  // unfiltered loop on (x, xc) while zeta rides along.
  const int dim = n + pf + nc + p;
  const Mat acl_xx = sys.A + sys.Bu * ctrl.Dc * sys.C;

  Mat a = Mat::Zero(dim, dim);
  a.block(0, 0, n, n) = acl_xx;
  a.block(0, n + pf, n, nc) = sys.Bu * ctrl.Cc;
  a.block(0, n + pf + nc, n, p) = sys.Bu * ctrl.Dc;
  a.block(n, 0, pf, n) = f.Bz * sys.C * acl_xx;
  a.block(n, n, pf, pf) = f.Az;
  a.block(n, n + pf, pf, nc) = f.Bz * sys.C * sys.Bu * ctrl.Cc;
  a.block(n, n + pf + nc, pf, p) = f.Bz * sys.C * sys.Bu * ctrl.Dc;
  a.block(n + pf, 0, nc, n) = ctrl.Bc * sys.C;
  a.block(n + pf, n + pf, nc, nc) = ctrl.Ac;
  a.block(n + pf, n + pf + nc, nc, p) = ctrl.Bc;

  // Stacked white noise eta(k) = [w(k); v(k+1)], covariance diag(Q, R).
  Mat gw = Mat::Zero(dim, q + p);
  gw.block(0, 0, n, q) = sys.Bw;
  gw.block(n, 0, pf, q) = f.Bz * sys.C * sys.Bw;
  gw.block(n, q, pf, p) = f.Bz;
  gw.block(n + pf + nc, q, p, p) = Mat::Identity(p, p);

  ClosedLoop loop;
  loop.A = a;
  loop.Gw = gw;
  loop.Gv = Mat::Zero(dim, pf);
  loop.C = Mat::Zero(pf, dim);
  loop.C.block(0, n, pf, pf) = Mat::Identity(pf, pf);
  loop.plant_dim = n + pf;
  loop.ctrl_offset = n + pf;
  loop.ctrl_dim = nc;
  loop.output_noise = false;

  const double rho = spectral_radius(loop.A);
  if (rho >= 1.0) {
    throw UnstableError("close_loop_filtered: loop spectral radius " + std::to_string(rho) +
                        " >= 1 (an exactly integrating filter has no stationary state)");
  }
  return loop;
}

}  // namespace parityspace
