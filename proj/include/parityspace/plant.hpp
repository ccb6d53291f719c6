#pragma once

#include "parityspace/types.hpp"

namespace parityspace {

/// Discrete-time stochastic plant
///   x(k+1) = A x(k) + Bu u(k) + Bw w(k),   w ~ N(0, Q)
///   y(k)   = C x(k) + v(k),                v ~ N(0, R)
/// Q and R are symmetric positive semidefinite; a zero R models an exactly
/// known (noise-free) output, which the filter-augmented monitoring model
/// below produces.
struct LtiSystem {
  Mat A;
  Mat Bu;
  Mat Bw;
  Mat C;
  Mat Q;
  Mat R;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(Bu.cols()); }
  int noise_dim() const { return static_cast<int>(Bw.cols()); }
  int output_dim() const { return static_cast<int>(C.rows()); }
};

/// Validates dimensions, finiteness and noise-covariance symmetry/PSD-ness.
LtiSystem make_system(const Mat& a, const Mat& bu, const Mat& bw, const Mat& c,
                      const Mat& q, const Mat& r);

/// Output-feedback controller in realization form
///   u_c(k)  = Cc xc(k) + Dc y_c(k)
///   xc(k+1) = Ac xc(k) + Bc y_c(k)
/// The observer-state-feedback form u = K x_hat with a one-step-ahead
/// observer x_hat(k+1) = A x_hat + Bu u + L (y - C x_hat) is stored in this
/// realization as (Ac, Bc, Cc, Dc) = (A + Bu K - L C, L, K, 0).
struct Controller {
  Mat Ac;
  Mat Bc;
  Mat Cc;
  Mat Dc;
  Mat K;  ///< populated for the observer form, empty otherwise
  Mat L;  ///< populated for the observer form, empty otherwise
  bool observer_form = false;

  int state_dim() const { return static_cast<int>(Ac.rows()); }
};

/// Static output feedback u = F y (stateless).
Controller make_static_controller(const Mat& f, int output_dim);

/// Observer state feedback from explicit gains.
Controller make_observer_controller(const LtiSystem& sys, const Mat& k, const Mat& l);

/// General dynamic output feedback from an explicit realization.
Controller make_dynamic_controller(const Mat& ac, const Mat& bc, const Mat& cc, const Mat& dc);

/// LQG synthesis: infinite-horizon LQR state feedback (weights default to
/// identity) plus a steady-state one-step-ahead Kalman observer. Throws
/// SynthesisError when a Riccati recursion fails to converge and
/// UnstableError when the resulting loop is not stable.
Controller lqg_synthesize(const LtiSystem& sys, const Mat& state_weight = Mat(),
                          const Mat& input_weight = Mat());

/// Closed control loop assembled for stationary covariance analysis. The full
/// state stacks the monitored plant state first, then the controller state
/// (and for the filtered loop two auxiliary blocks; see close_loop_filtered).
///
///   X(k+1) = A X(k) + Gw w(k) + Gv v(k)
///
/// where (w, v) are the monitored model's process/measurement noises.
struct ClosedLoop {
  Mat A;
  Mat Gw;
  Mat Gv;
  Mat C;           ///< monitored output map (output = C X + v when output_noise)
  int plant_dim;   ///< leading block of X holding the monitored plant state
  int ctrl_offset; ///< controller-state block start within X
  int ctrl_dim;
  bool output_noise;  ///< true when the monitored output carries direct noise

  int dim() const { return static_cast<int>(A.rows()); }
};

/// Plant + controller loop (monitored model = the plant itself).
/// Throws UnstableError when the loop's spectral radius is >= 1.
ClosedLoop close_loop(const LtiSystem& sys, const Controller& ctrl);

/// First-order moving filter placed at the sensor:
///   zeta(k) = Az zeta(k-1) + Bz y(k)
/// zeta is transmitted instead of y; the receiver inverts the recursion. Az
/// must have spectral radius <= 1, Bz full column rank. A spectral radius at
/// exactly one (integrating filter) is the marginally stable design point.
struct MarginalFilter {
  Mat Az;
  Mat Bz;

  int state_dim() const { return static_cast<int>(Az.rows()); }
};

MarginalFilter make_filter(const Mat& az, const Mat& bz);

/// Az = radius * I, Bz = I for a p-dimensional output.
MarginalFilter default_filter(int output_dim, double radius = 0.999);

/// One filter update: zeta_next = Az zeta + Bz y.
Vec filter_step(const MarginalFilter& f, const Vec& zeta, const Vec& y);

/// Inverts filter_step: recovers y from consecutive transmitted states via
/// the pseudo-inverse of Bz.
Vec recover_step(const MarginalFilter& f, const Vec& zeta_now, const Vec& zeta_prev);

/// Monitoring model for the filtered loop: state [x; zeta], input u, process
/// noise [w(k); v(k+1)] with covariance diag(Q, R), output zeta observed
/// exactly (R = 0).
LtiSystem augment_with_filter(const LtiSystem& sys, const MarginalFilter& f);

/// Filtered loop for covariance analysis. Full state X = [x; zeta; xc; nu]
/// where nu(k) = v(k) de-shifts the measurement noise so the stacked noise
/// [w(k); v(k+1)] is white with respect to X. The monitored plant state is
/// [x; zeta] (plant_dim = n + p); the monitored model has no output noise.
ClosedLoop close_loop_filtered(const LtiSystem& sys, const MarginalFilter& f,
                               const Controller& ctrl);

}  // namespace parityspace
