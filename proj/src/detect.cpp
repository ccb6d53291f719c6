#include "parityspace/detect.hpp"

#include "parityspace/linalg.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace parityspace {
namespace {

struct SpdFactor {
  Eigen::LLT<Mat> llt;
  double log_det = 0.0;
};

SpdFactor factor_spd(const Mat& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw InvalidInputError(std::string(what) + ": matrix must be square and non-empty");
  }
  require_finite(m, what);
  if ((m - m.transpose()).cwiseAbs().maxCoeff() >
      1e-8 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    throw InvalidInputError(std::string(what) + ": matrix must be symmetric");
  }
  SpdFactor f;
  f.llt.compute(m);
  if (f.llt.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + ": matrix is not positive definite");
  }
  const Mat l = f.llt.matrixL();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (l(i, i) <= 0.0) {
      throw NumericalError(std::string(what) + ": matrix is not positive definite");
    }
    acc += std::log(l(i, i));
  }
  f.log_det = 2.0 * acc;
  return f;
}

}  // namespace

double chi2_threshold(int dof, double rate) {
  if (dof < 1) throw InvalidInputError("chi2_threshold: dof must be positive");
  if (!(rate > 0.0) || !(rate < 1.0)) {
    throw InvalidInputError("chi2_threshold: rate must lie in (0, 1)");
  }
  boost::math::chi_squared dist(static_cast<double>(dof));
  return boost::math::quantile(dist, 1.0 - rate);
}

Chi2Detector make_chi2_detector(const Mat& theta, double threshold) {
  if (!(threshold > 0.0)) throw InvalidInputError("chi2 detector: threshold must be positive");
  SpdFactor f = factor_spd(theta, "chi2 detector");
  Chi2Detector det;
  det.dof = static_cast<int>(theta.rows());
  det.threshold = threshold;
  det.theta_inv = f.llt.solve(Mat::Identity(theta.rows(), theta.rows()));
  return det;
}

Chi2Detector make_chi2_detector_from_rate(const Mat& theta, double rate) {
  return make_chi2_detector(theta, chi2_threshold(static_cast<int>(theta.rows()), rate));
}

double chi2_stat(const Chi2Detector& det, const Vec& r) {
  if (r.size() != det.theta_inv.rows()) {
    throw InvalidInputError("chi2_stat: residual dimension mismatch");
  }
  return r.dot(det.theta_inv * r);
}

bool chi2_alarm(const Chi2Detector& det, const Vec& r) {
  return chi2_stat(det, r) > det.threshold;
}

GlrDetector make_glr_detector(const Mat& theta, int n_r, double threshold) {
  if (n_r < theta.rows()) {
    throw InvalidInputError(
        "glr detector: window must hold at least as many residuals as their dimension");
  }
  SpdFactor f = factor_spd(theta, "glr detector");
  GlrDetector det;
  det.theta = theta;
  det.theta_inv = f.llt.solve(Mat::Identity(theta.rows(), theta.rows()));
  det.log_det_theta = f.log_det;
  det.n_r = n_r;
  det.threshold = threshold;
  return det;
}

double glr_stat(const GlrDetector& det, const Mat& window) {
  const int l = static_cast<int>(det.theta.rows());
  if (window.rows() != det.n_r || window.cols() != l) {
    throw InvalidInputError("glr_stat: window must be n_r x l");
  }
  const Mat theta_hat = window.transpose() * window / static_cast<double>(det.n_r);
  Eigen::LLT<Mat> llt(theta_hat);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("glr_stat: window sample covariance is singular");
  }
  const Mat lmat = llt.matrixL();
  double log_det_hat = 0.0;
  for (int i = 0; i < l; ++i) {
    if (lmat(i, i) <= 0.0) {
      throw NumericalError("glr_stat: window sample covariance is singular");
    }
    log_det_hat += 2.0 * std::log(lmat(i, i));
  }
  double quad = 0.0;
  for (int i = 0; i < det.n_r; ++i) {
    const Vec r = window.row(i).transpose();
    quad += r.dot(det.theta_inv * r) - r.dot(llt.solve(r));
  }
  return 0.5 * det.n_r * (det.log_det_theta - log_det_hat) + 0.5 * quad;
}

bool glr_alarm(const GlrDetector& det, const Mat& window) {
  return glr_stat(det, window) > det.threshold;
}

double calibrate_glr_threshold(const Mat& theta, int n_r, double rate,
                               int windows, std::uint64_t seed) {
  if (!(rate > 0.0) || !(rate < 1.0)) {
    throw InvalidInputError("calibrate_glr_threshold: rate must lie in (0, 1)");
  }
  if (windows < 10) {
    throw InvalidInputError("calibrate_glr_threshold: need at least 10 windows");
  }
  GlrDetector det = make_glr_detector(theta, n_r, 1.0);
  const int l = static_cast<int>(theta.rows());
  const Mat chol = factor_spd(theta, "calibrate_glr_threshold").llt.matrixL();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<double> stats;
  stats.reserve(windows);
  Mat window(n_r, l);
  Vec xi(l);
  for (int wdx = 0; wdx < windows; ++wdx) {
    for (int i = 0; i < n_r; ++i) {
      for (int j = 0; j < l; ++j) xi(j) = n01(rng);
      window.row(i) = (chol * xi).transpose();
    }
    stats.push_back(glr_stat(det, window));
  }
  std::sort(stats.begin(), stats.end());
  const auto idx = static_cast<std::size_t>(
      std::min<double>(stats.size() - 1.0, std::ceil((1.0 - rate) * stats.size())));
  return stats[idx];
}

LrModel make_lr_model(const Mat& theta, const Mat& theta_alpha) {
  SpdFactor f0 = factor_spd(theta, "lr model (nominal)");
  SpdFactor fa = factor_spd(theta_alpha, "lr model (attacked)");
  if (theta.rows() != theta_alpha.rows()) {
    throw InvalidInputError("lr model: covariances must share dimensions");
  }
  LrModel model;
  model.theta_inv = f0.llt.solve(Mat::Identity(theta.rows(), theta.rows()));
  model.theta_alpha_inv = fa.llt.solve(Mat::Identity(theta.rows(), theta.rows()));
  model.log_det_ratio = f0.log_det - fa.log_det;
  return model;
}

double lr_score(const LrModel& model, const Vec& r) {
  if (r.size() != model.theta_inv.rows()) {
    throw InvalidInputError("lr_score: residual dimension mismatch");
  }
  return model.log_det_ratio + r.dot(model.theta_inv * r) - r.dot(model.theta_alpha_inv * r);
}

double kl_divergence(const Mat& theta, const Mat& theta_alpha) {
  SpdFactor f0 = factor_spd(theta, "kl_divergence (nominal)");
  SpdFactor fa = factor_spd(theta_alpha, "kl_divergence (attacked)");
  const int l = static_cast<int>(theta.rows());
  if (theta_alpha.rows() != l) {
    throw InvalidInputError("kl_divergence: covariances must share dimensions");
  }
  const double tr = (f0.llt.solve(theta_alpha)).trace();
  return 0.5 * (f0.log_det - fa.log_det + tr - l);
}

double lr_score_variance(const Mat& theta, const Mat& theta_alpha) {
  SpdFactor f0 = factor_spd(theta, "lr_score_variance (nominal)");
  factor_spd(theta_alpha, "lr_score_variance (attacked)");
  const int l = static_cast<int>(theta.rows());
  if (theta_alpha.rows() != l) {
    throw InvalidInputError("lr_score_variance: covariances must share dimensions");
  }
  const Mat a = f0.llt.solve(theta_alpha);
  return 2.0 * (a * a).trace() + 2.0 * l - 4.0 * a.trace();
}

DetectionBounds chi2_bounds(const Mat& theta, const Mat& delta, double threshold) {
  if (!(threshold > 0.0)) throw InvalidInputError("chi2_bounds: threshold must be positive");
  SpdFactor f0 = factor_spd(theta, "chi2_bounds (nominal)");
  const Mat theta_alpha = theta + delta;
  factor_spd(theta_alpha, "chi2_bounds (attacked)");
  const int l = static_cast<int>(theta.rows());

  const Mat a = f0.llt.solve(theta_alpha);  // Theta^-1 Theta_alpha
  DetectionBounds b;
  b.mean_stat = a.trace();  // l + tr(delta Theta^-1)
  b.upper = std::min(b.mean_stat / threshold, 1.0);
  const double slack = b.mean_stat - threshold;
  b.lower_valid = slack >= 0.0;
  if (b.lower_valid) {
    b.kappa = slack / (2.0 * (a * a).trace());
    b.lower = b.kappa * b.kappa / (1.0 + b.kappa * b.kappa);
  }
  return b;
}

DetectionBounds lr_bounds(const Mat& theta, const Mat& delta, double threshold) {
  if (!(threshold > 0.0)) throw InvalidInputError("lr_bounds: threshold must be positive");
  SpdFactor f0 = factor_spd(theta, "lr_bounds (nominal)");
  const Mat theta_alpha = theta + delta;
  SpdFactor fa = factor_spd(theta_alpha, "lr_bounds (attacked)");
  const int l = static_cast<int>(theta.rows());

  const Mat a = f0.llt.solve(theta_alpha);
  const double numerator = (f0.log_det - fa.log_det) + (a.trace() - l);  // 2 x KL divergence
  DetectionBounds b;
  b.mean_stat = 0.5 * numerator;
  b.upper = std::min(std::max(numerator, 0.0) / (2.0 * threshold), 1.0);
  const double slack = 0.5 * numerator - threshold;
  b.lower_valid = slack >= 0.0;
  if (b.lower_valid) {
    const double denom = 4.0 * (a * a).trace() + 4.0 * l - 8.0 * a.trace();
    b.kappa = (numerator - 2.0 * threshold) / denom;
    b.lower = b.kappa * b.kappa / (1.0 + b.kappa * b.kappa);
  }
  return b;
}

AnomalyCall classify_anomaly(const std::vector<std::uint8_t>& alarms,
                             int excursion_bound, int merge_gap) {
  if (excursion_bound < 1) {
    throw InvalidInputError("classify_anomaly: excursion bound must be positive");
  }
  if (merge_gap < 0) throw InvalidInputError("classify_anomaly: merge gap must be >= 0");

  AnomalyCall call;
  const int n = static_cast<int>(alarms.size());
  int i = 0;
  while (i < n) {
    if (!alarms[i]) {
      ++i;
      continue;
    }
    int j = i;
    int last_alarm = i;
    while (j < n) {
      if (alarms[j]) {
        last_alarm = j;
        ++j;
      } else if (j - last_alarm <= merge_gap) {
        ++j;  // tolerate short quiet gaps inside one event
      } else {
        break;
      }
    }
    call.runs.push_back({i, last_alarm - i + 1});
    i = last_alarm + 1;
  }

  const int long_run = excursion_bound + 2;  // overshoot tolerance
  for (const AlarmRun& run : call.runs) {
    if (run.length > long_run) {
      ++call.persistent_runs;
    } else if (run.length >= 3) {
      ++call.excursions;
    }
  }

  if (call.persistent_runs >= 1) {
    call.type = AnomalyType::fault;
  } else if (call.excursions >= 2) {
    call.type = AnomalyType::replay;
  } else if (call.excursions == 1) {
    call.type = AnomalyType::outlier;
  } else {
    call.type = AnomalyType::none;
  }
  return call;
}

const char* anomaly_name(AnomalyType type) {
  switch (type) {
    case AnomalyType::none: return "none";
    case AnomalyType::outlier: return "outlier";
    case AnomalyType::fault: return "fault";
    case AnomalyType::replay: return "replay";
  }
  return "unknown";
}

}  // namespace parityspace
