#pragma once

#include "parityspace/parity.hpp"
#include "parityspace/plant.hpp"
#include "parityspace/simulate.hpp"
#include "parityspace/types.hpp"

#include <cstdint>
#include <vector>

namespace parityspace {

/// Attack-free residual covariance Theta = Z (Hw Qs Hw^T + Rs) Z^T together
/// with its projection onto the parity space (M = I) and rectangular factors
/// F with Theta = F F^T used by the weighting optimizers.
struct ParityCov {
  Mat theta;           ///< l x l
  Mat t_theta;         ///< nz x nz (identity-weighting covariance)
  Mat theta_factor;    ///< l x (q+p)(s+1)
  Mat t_theta_factor;  ///< nz x (q+p)(s+1)
};

ParityCov theta_s(const ParityModel& pm, const LtiSystem& sys);

/// Stationary closed-loop state covariance and its blocks.
struct SteadyState {
  Mat P_full;   ///< full closed-loop state covariance
  Mat P_x;      ///< monitored plant block
  Mat P_xc;     ///< controller block
  Mat P_x_xc;   ///< plant/controller cross block
};

SteadyState steady_state_cov(const LtiSystem& sys, const ClosedLoop& loop);

/// Cross covariance between a stacked noise window and a closed-loop state
/// block: row block i (oldest first, i = 0..s-alpha) equals
/// cov{ noise(k-s+i), X_block(k-alpha+1) }.
Mat cross_noise_state(const ClosedLoop& loop, const Mat& noise_input,
                      const Mat& noise_cov, int block_offset, int block_dim,
                      int s, int alpha);

/// Residual covariance perturbation at replay depth alpha.
struct ReplayPerturbation {
  int alpha = 0;
  Mat P_delta;    ///< (s+1)p square window-space weight, state-discrepancy part
  Mat P_u_delta;  ///< controller-discrepancy part (zero under input replay)
  Mat delta;      ///< l x l residual covariance change Z (P_delta [+ P_u_delta]) Z^T
  Mat t_delta;    ///< nz x nz identity-weighting covariance change
  Mat t_delta_p;  ///< nz x nz positive-semidefinite portion (weighting design)
};

/// Analytic covariance perturbation for 0 <= alpha. Depths 0 and, under
/// input replay, alpha > s return all-zero perturbations (the detector sees
/// nominal residuals there). Output-only replay has no stationary expression
/// past alpha = s and throws InvalidInputError.
ReplayPerturbation delta_alpha(const ParityModel& pm, const LtiSystem& sys,
                               const ClosedLoop& loop, const Controller& ctrl,
                               const SteadyState& steady, int alpha,
                               bool input_replay);

/// Full analytic covariance picture for a monitored loop.
struct CovarianceReport {
  ParityCov nominal;
  std::vector<ReplayPerturbation> per_alpha;  ///< index alpha-1, alpha = 1..s
  Mat t_delta_sum;    ///< sum over alpha of t_delta
  Mat t_delta_p_sum;  ///< sum over alpha of t_delta_p
  bool input_replay = true;
};

CovarianceReport covariance_report(const ParityModel& pm, const LtiSystem& sys,
                                   const ClosedLoop& loop, const Controller& ctrl,
                                   bool input_replay);

/// JSON export of a covariance report (matrices as nested arrays).
std::string covariance_report_to_json(const CovarianceReport& report);

/// Data-driven estimate of the per-depth covariance changes: n_batches
/// seeded healthy runs each replay their own recorded window once at every
/// depth alpha = 1..s (depth 0 uses a pre-onset step), and the sample second
/// moment minus the analytic attack-free covariance estimates the change.
/// Estimates live in the identity-weighted parity space (nz x nz).
struct TDeltaEstimate {
  std::vector<Mat> t_hat;  ///< index alpha = 0..s
  int batches = 0;
};

TDeltaEstimate estimate_t_delta(const LtiSystem& sys, const Controller& ctrl,
                                const MarginalFilter* filter, const ParityModel& pm,
                                int batches, bool replay_inputs, int offset,
                                int warmup, std::uint64_t seed);

}  // namespace parityspace
