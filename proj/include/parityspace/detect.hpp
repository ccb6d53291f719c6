#pragma once

#include "parityspace/types.hpp"

#include <cstdint>
#include <vector>

namespace parityspace {

/// Threshold with false-alarm probability `rate` for a chi-squared statistic
/// with `dof` degrees of freedom.
double chi2_threshold(int dof, double rate);

/// Quadratic-form detector: alarm when r^T Theta^-1 r exceeds the threshold.
struct Chi2Detector {
  Mat theta_inv;
  int dof = 0;
  double threshold = 0.0;
};

Chi2Detector make_chi2_detector(const Mat& theta, double threshold);
Chi2Detector make_chi2_detector_from_rate(const Mat& theta, double rate);
double chi2_stat(const Chi2Detector& det, const Vec& r);
bool chi2_alarm(const Chi2Detector& det, const Vec& r);

/// Generalized likelihood-ratio detector over a sliding window of n_r
/// residuals; the window covariance is re-estimated by maximum likelihood.
struct GlrDetector {
  Mat theta;
  Mat theta_inv;
  double log_det_theta = 0.0;
  int n_r = 0;
  double threshold = 0.0;
};

GlrDetector make_glr_detector(const Mat& theta, int n_r, double threshold);

/// window holds the n_r most recent residuals as rows.
double glr_stat(const GlrDetector& det, const Mat& window);
bool glr_alarm(const GlrDetector& det, const Mat& window);

/// Monte Carlo threshold calibration: empirical (1-rate) quantile of the GLR
/// statistic over independent nominal windows.
double calibrate_glr_threshold(const Mat& theta, int n_r, double rate,
                               int windows, std::uint64_t seed);

/// Ideal log-likelihood-ratio score between two known zero-mean Gaussian
/// residual models, without the 1/2 prefactor:
///   score(r) = ln det(Theta)/det(Theta_a) + r^T Theta^-1 r - r^T Theta_a^-1 r.
/// Half the score has mean equal to the Kullback-Leibler divergence
/// D(N(0,Theta_a) || N(0,Theta)) when r ~ N(0, Theta_a).
struct LrModel {
  Mat theta_inv;
  Mat theta_alpha_inv;
  double log_det_ratio = 0.0;  ///< ln det(Theta) - ln det(Theta_alpha)
};

LrModel make_lr_model(const Mat& theta, const Mat& theta_alpha);
double lr_score(const LrModel& model, const Vec& r);
double kl_divergence(const Mat& theta, const Mat& theta_alpha);
/// Variance of the no-1/2 score under r ~ N(0, Theta_alpha):
///   2 tr{(Theta^-1 Theta_a)^2} + 2 l - 4 tr{Theta^-1 Theta_a}.
double lr_score_variance(const Mat& theta, const Mat& theta_alpha);

/// Per-depth detection-rate bounds derived from the residual covariance
/// change delta = Theta_alpha - Theta at the given alarm threshold.
struct DetectionBounds {
  double upper = 0.0;        ///< Markov bound on the alarm probability
  double lower = 0.0;        ///< one-sided concentration bound (0 when invalid)
  bool lower_valid = false;  ///< mean-above-threshold condition
  double kappa = 0.0;
  double mean_stat = 0.0;    ///< expected statistic under attack
};

DetectionBounds chi2_bounds(const Mat& theta, const Mat& delta, double threshold);
DetectionBounds lr_bounds(const Mat& theta, const Mat& delta, double threshold);

/// Alarm-pattern triage. A replayed segment can only disturb the residual
/// while the detection window straddles a splice, so it shows up as short
/// excursions bounded by the window length at the attack onset and end; a
/// lasting fault keeps the alarm high, and a lone spike is an outlier.
enum class AnomalyType { none, outlier, fault, replay };

struct AlarmRun {
  int start = 0;
  int length = 0;
};

struct AnomalyCall {
  AnomalyType type = AnomalyType::none;
  std::vector<AlarmRun> runs;      ///< merged alarm runs
  int persistent_runs = 0;         ///< runs longer than the excursion bound
  int excursions = 0;              ///< runs consistent with a window splice
};

/// excursion_bound: longest alarm run a single splice can cause (the window
/// length s for per-sample tests, s + n_r - 1 for n_r-sample windows).
AnomalyCall classify_anomaly(const std::vector<std::uint8_t>& alarms,
                             int excursion_bound, int merge_gap = 2);

const char* anomaly_name(AnomalyType type);

}  // namespace parityspace
