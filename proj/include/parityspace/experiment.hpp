#pragma once

#include "parityspace/covariance.hpp"
#include "parityspace/detect.hpp"
#include "parityspace/optimize.hpp"
#include "parityspace/parity.hpp"
#include "parityspace/plant.hpp"
#include "parityspace/simulate.hpp"
#include "parityspace/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace parityspace {

struct WeightingChoice {
  enum class Kind { identity, j1, j2, j2m, j3, j4, unified };
  Kind kind = Kind::identity;
  int l = -1;           ///< residual rows (j2 only; -1 = full parity space)
  double gamma = 0.01;  ///< false-alarm budget (j4 only)
  int alpha = -1;       ///< target depth for per-depth indices (-1 = default)
};

struct DetectorSettings {
  double chi2_threshold = 20.0;
  double glr_threshold = 40.0;
  int n_r = -1;  ///< GLR window (-1 = s + 1)
};

struct AttackSettings {
  bool enabled = true;
  int onset = 601;
  int offset = 300;          ///< replayed data lags by this many steps
  int end = -1;              ///< -1 = attack until the horizon ends
  bool replay_inputs = true;
  bool randomized_start = false;
};

struct FaultSettings {
  bool enabled = false;
  FaultConfig config;
};

struct FilterSettings {
  bool enabled = false;
  Mat Az;
  Mat Bz;
};

/// Fully resolved experiment description. `echo` holds the canonical JSON
/// form written into summaries for reproducibility.
struct ExperimentConfig {
  std::string preset;  ///< empty when the system is given explicitly
  LtiSystem sys;
  std::string controller_type;  ///< lqg | static | observer
  Controller ctrl;
  int s = 9;
  DetectorSettings detector;
  WeightingChoice weighting;
  FilterSettings filter;
  AttackSettings attack;
  FaultSettings fault;
  int horizon = 700;
  int warmup = 200;
  int trials = 500;
  std::uint64_t seed = 1;
  std::string echo;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

/// Everything derived from a config that experiments share: the monitored
/// signal model (plant, or plant + transmit filter), the weighted parity
/// model, calibrated detectors, and - when the closed loop admits a
/// stationary analysis - the analytic covariance report in the identity
/// parity basis.
struct PreparedExperiment {
  ExperimentConfig cfg;
  std::optional<MarginalFilter> filter;
  LtiSystem monitored;
  ParityModel pm;  ///< weighting applied
  Mat theta;       ///< weighted residual covariance
  Chi2Detector chi2;
  GlrDetector glr;
  std::optional<CovarianceReport> report;
  std::string analysis_note;  ///< why `report` is absent, weighting fallbacks
};

PreparedExperiment prepare_experiment(const ExperimentConfig& cfg);

/// Single seeded run: statistic traces, alarms, and pattern classification.
struct TraceResult {
  int start = 0;                       ///< step of the first statistic sample
  std::vector<double> chi2_stats;      ///< index i -> step start + i
  std::vector<double> glr_stats;       ///< NaN until the window fills
  std::vector<std::uint8_t> chi2_alarms;
  std::vector<std::uint8_t> glr_alarms;
  std::vector<std::uint8_t> phase;     ///< 0 healthy, 1 recording, 2 attacked
  std::vector<std::uint8_t> fault_on;
  AnomalyCall chi2_call;
  AnomalyCall glr_call;
};

TraceResult run_trace(const PreparedExperiment& ex);

/// Monte Carlo detection-rate sweep over the replay depth alpha.
struct RateResult {
  int trials = 0;
  int n_alpha = 0;  ///< depths emitted: 1 .. s + n_r - 1
  std::vector<double> chi2_rate;       ///< alarm exactly at depth alpha
  std::vector<double> chi2_rate_cum;   ///< alarm at any depth <= alpha
  std::vector<double> glr_rate;
  std::vector<double> glr_rate_cum;
  std::vector<double> ideal_lr_rate;   ///< known-covariance LR test, depths 1..s
  std::vector<DetectionBounds> chi2_b; ///< depths 1..s when analysis available
  std::vector<DetectionBounds> lr_b;
};

RateResult run_detection_rate(const PreparedExperiment& ex);

/// Deterministic CSV/summary bundle: traces.csv, rates.csv, bounds.csv,
/// summary.txt. Unused tables are emitted header-only.
void write_report(const PreparedExperiment& ex, const TraceResult* trace,
                  const RateResult* rate, const std::string& out_dir);

}  // namespace parityspace
