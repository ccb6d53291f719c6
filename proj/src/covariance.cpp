#include "parityspace/covariance.hpp"

#include "parityspace/linalg.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace parityspace {
namespace {

Mat block_diag_repeat(const Mat& block, int count) {
  Mat out = Mat::Zero(block.rows() * count, block.cols() * count);
  for (int i = 0; i < count; ++i) {
    out.block(i * block.rows(), i * block.cols(), block.rows(), block.cols()) = block;
  }
  return out;
}

nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

ParityCov theta_s(const ParityModel& pm, const LtiSystem& sys) {
  if (pm.n != sys.state_dim() || pm.p != sys.output_dim() || pm.q != sys.noise_dim()) {
    throw InvalidInputError("theta_s: parity model and system dimensions disagree");
  }
  const int win = pm.window();
  const Mat qs = block_diag_repeat(sys.Q, win);
  const Mat rs = block_diag_repeat(sys.R, win);
  const Mat w = pm.Hw * qs * pm.Hw.transpose() + rs;

  ParityCov out;
  out.t_theta = sym(pm.N * w * pm.N.transpose());
  out.theta = sym(pm.M * out.t_theta * pm.M.transpose());

  const Mat fq = pm.Hw * block_diag_repeat(psd_sqrt(sys.Q), win);
  const Mat fr = block_diag_repeat(psd_sqrt(sys.R), win);
  Mat f_win(win * pm.p, fq.cols() + fr.cols());
  f_win << fq, fr;
  out.t_theta_factor = pm.N * f_win;
  out.theta_factor = pm.M * out.t_theta_factor;
  return out;
}

SteadyState steady_state_cov(const LtiSystem& sys, const ClosedLoop& loop) {
  Mat w = loop.Gw * sys.Q * loop.Gw.transpose();
  if (loop.output_noise && loop.Gv.cols() > 0) {
    w += loop.Gv * sys.R * loop.Gv.transpose();
  }
  SteadyState out;
  out.P_full = dlyap(loop.A, sym(w));
  out.P_x = out.P_full.topLeftCorner(loop.plant_dim, loop.plant_dim);
  out.P_xc = out.P_full.block(loop.ctrl_offset, loop.ctrl_offset, loop.ctrl_dim, loop.ctrl_dim);
  out.P_x_xc = out.P_full.block(0, loop.ctrl_offset, loop.plant_dim, loop.ctrl_dim);
  return out;
}

Mat cross_noise_state(const ClosedLoop& loop, const Mat& noise_input,
                      const Mat& noise_cov, int block_offset, int block_dim,
                      int s, int alpha) {
  if (noise_input.rows() != loop.dim()) {
    throw InvalidInputError("cross_noise_state: noise input must enter the closed-loop state");
  }
  if (noise_cov.rows() != noise_input.cols() || noise_cov.cols() != noise_input.cols()) {
    throw InvalidInputError("cross_noise_state: noise covariance dimension mismatch");
  }
  if (block_offset < 0 || block_dim < 0 || block_offset + block_dim > loop.dim()) {
    throw InvalidInputError("cross_noise_state: state block out of range");
  }
  if (alpha < 1 || alpha > s) {
    throw InvalidInputError("cross_noise_state: depth must satisfy 1 <= alpha <= s");
  }
  const int nqn = static_cast<int>(noise_input.cols());
  const int blocks = s - alpha + 1;

  // propagated[e] = A^e * noise_input for e = 0..s-alpha
  std::vector<Mat> propagated(blocks);
  propagated[0] = noise_input;
  for (int e = 1; e < blocks; ++e) propagated[e] = loop.A * propagated[e - 1];

  Mat out(blocks * nqn, block_dim);
  for (int i = 0; i < blocks; ++i) {
    const int e = s - alpha - i;
    out.middleRows(i * nqn, nqn) =
        noise_cov * propagated[e].middleRows(block_offset, block_dim).transpose();
  }
  return out;
}

ReplayPerturbation delta_alpha(const ParityModel& pm, const LtiSystem& sys,
                               const ClosedLoop& loop, const Controller& ctrl,
                               const SteadyState& steady, int alpha,
                               bool input_replay) {
  if (pm.n != sys.state_dim() || pm.p != sys.output_dim() || pm.q != sys.noise_dim()) {
    throw InvalidInputError("delta_alpha: parity model and system dimensions disagree");
  }
  if (sys.state_dim() != loop.plant_dim) {
    throw InvalidInputError("delta_alpha: monitored system must match the closed-loop plant block");
  }
  if (alpha < 0) throw InvalidInputError("delta_alpha: depth must be non-negative");

  const int s = pm.s;
  const int p = pm.p;
  const int q = pm.q;
  const int n_win = pm.window() * p;

  ReplayPerturbation out;
  out.alpha = alpha;
  out.P_delta = Mat::Zero(n_win, n_win);
  out.P_u_delta = Mat::Zero(n_win, n_win);

  const auto finalize = [&](const Mat& p_pos) {
    Mat total = out.P_delta;
    if (!input_replay) total += out.P_u_delta;
    out.t_delta = sym(pm.N * total * pm.N.transpose());
    out.delta = sym(pm.M * out.t_delta * pm.M.transpose());
    out.t_delta_p = sym(pm.N * p_pos * pm.N.transpose());
  };

  if (alpha == 0) {
    finalize(Mat::Zero(n_win, n_win));
    return out;
  }
  if (alpha > s) {
    if (input_replay) {
      // The whole detection window is a consistent recorded segment, so the
      // residual distribution is exactly nominal.
      finalize(Mat::Zero(n_win, n_win));
      return out;
    }
    throw InvalidInputError(
        "delta_alpha: output-only replay has no stationary expression past the window length");
  }

  const int top = (s + 1 - alpha) * p;   // rows still holding pre-attack data
  const int bot = alpha * p;             // rows holding replayed data

  const Mat h0a = observability_stack(sys.A, sys.C, alpha - 1);       // bot x n
  const Mat hw_head = impulse_stack(sys.A, sys.Bw, sys.C, s - alpha); // top x (s+1-alpha)q
  const Mat hw21 = pm.Hw.block(top, 0, bot, (s + 1 - alpha) * q);

  // State discrepancy: the replayed tail no longer carries the live plant
  // state, doubling its stationary contribution, while the cross terms with
  // the still-genuine head of the window are removed.
  const Mat pwx = cross_noise_state(loop, loop.Gw, sys.Q, 0, loop.plant_dim, s, alpha);
  Mat pvx = Mat::Zero(top, loop.plant_dim);
  if (loop.output_noise && loop.Gv.cols() > 0) {
    pvx = cross_noise_state(loop, loop.Gv, sys.R, 0, loop.plant_dim, s, alpha);
  }

  const Mat h0a_t = h0a.transpose();
  out.P_delta.block(top, top, bot, bot) += 2.0 * h0a * steady.P_x * h0a_t;

  const Mat b_tr = hw_head * pwx * h0a_t;  // top x bot
  const Mat b_br = hw21 * pwx * h0a_t;     // bot x bot
  out.P_delta.block(0, top, top, bot) -= b_tr;
  out.P_delta.block(top, 0, bot, top) -= b_tr.transpose();
  out.P_delta.block(top, top, bot, bot) -= b_br + b_br.transpose();

  const Mat c_tr = pvx * h0a_t;  // Hv is identity
  out.P_delta.block(0, top, top, bot) -= c_tr;
  out.P_delta.block(top, 0, bot, top) -= c_tr.transpose();

  Mat p_pos = Mat::Zero(n_win, n_win);
  p_pos.block(top, top, bot, bot) = 2.0 * h0a * steady.P_x * h0a_t;

  // Controller discrepancy: with the command channel untouched, the live
  // controller keeps reacting to replayed measurements and its state drifts
  // from the recorded run by free controller dynamics.
  if (!input_replay && ctrl.state_dim() > 0) {
    const Mat hc = observability_stack(ctrl.Ac, ctrl.Cc, alpha - 1);  // alpha*m x nc
    const Mat hu_a = impulse_stack(sys.A, sys.Bu, sys.C, alpha - 1);  // bot x alpha*m
    const Mat g = hu_a * hc;                                          // bot x nc
    const Mat g_t = g.transpose();

    out.P_u_delta.block(top, top, bot, bot) +=
        2.0 * g * steady.P_xc * g_t +
        2.0 * h0a * steady.P_x_xc * g_t +
        2.0 * g * steady.P_x_xc.transpose() * h0a_t;

    const Mat pwxc =
        cross_noise_state(loop, loop.Gw, sys.Q, loop.ctrl_offset, loop.ctrl_dim, s, alpha);
    const Mat d_tr = hw_head * pwxc * g_t;
    const Mat d_br = hw21 * pwxc * g_t;
    out.P_u_delta.block(0, top, top, bot) -= d_tr;
    out.P_u_delta.block(top, 0, bot, top) -= d_tr.transpose();
    out.P_u_delta.block(top, top, bot, bot) -= d_br + d_br.transpose();

    if (loop.output_noise && loop.Gv.cols() > 0) {
      const Mat pvxc =
          cross_noise_state(loop, loop.Gv, sys.R, loop.ctrl_offset, loop.ctrl_dim, s, alpha);
      const Mat e_tr = pvxc * g_t;
      out.P_u_delta.block(0, top, top, bot) -= e_tr;
      out.P_u_delta.block(top, 0, bot, top) -= e_tr.transpose();
    }

    p_pos.block(top, top, bot, bot) += g * steady.P_xc * g_t;
  }

  finalize(p_pos);
  return out;
}

CovarianceReport covariance_report(const ParityModel& pm, const LtiSystem& sys,
                                   const ClosedLoop& loop, const Controller& ctrl,
                                   bool input_replay) {
  CovarianceReport report;
  report.input_replay = input_replay;
  report.nominal = theta_s(pm, sys);
  const SteadyState steady = steady_state_cov(sys, loop);

  const int nz = pm.nz();
  report.t_delta_sum = Mat::Zero(nz, nz);
  report.t_delta_p_sum = Mat::Zero(nz, nz);
  report.per_alpha.reserve(pm.s);
  for (int alpha = 1; alpha <= pm.s; ++alpha) {
    report.per_alpha.push_back(delta_alpha(pm, sys, loop, ctrl, steady, alpha, input_replay));
    report.t_delta_sum += report.per_alpha.back().t_delta;
    report.t_delta_p_sum += report.per_alpha.back().t_delta_p;
  }
  return report;
}

std::string covariance_report_to_json(const CovarianceReport& report) {
  nlohmann::json j;
  j["input_replay"] = report.input_replay;
  j["theta"] = mat_to_json(report.nominal.theta);
  j["t_theta"] = mat_to_json(report.nominal.t_theta);
  nlohmann::json per = nlohmann::json::array();
  for (const auto& rp : report.per_alpha) {
    nlohmann::json entry;
    entry["alpha"] = rp.alpha;
    entry["delta"] = mat_to_json(rp.delta);
    entry["t_delta"] = mat_to_json(rp.t_delta);
    entry["t_delta_p"] = mat_to_json(rp.t_delta_p);
    entry["trace_delta"] = rp.delta.trace();
    per.push_back(entry);
  }
  j["per_alpha"] = per;
  j["t_delta_sum"] = mat_to_json(report.t_delta_sum);
  j["t_delta_p_sum"] = mat_to_json(report.t_delta_p_sum);
  return j.dump(2);
}

TDeltaEstimate estimate_t_delta(const LtiSystem& sys, const Controller& ctrl,
                                const MarginalFilter* filter, const ParityModel& pm,
                                int batches, bool replay_inputs, int offset,
                                int warmup, std::uint64_t seed) {
  if (batches < 2) throw InvalidInputError("estimate_t_delta: need at least two batches");
  const int s = pm.s;
  if (offset < s + 1) {
    throw InvalidInputError("estimate_t_delta: offset must leave room for a full healthy window");
  }

  // The analytic attack-free covariance lives on the monitored signal model.
  LtiSystem monitored = filter ? augment_with_filter(sys, *filter) : sys;
  if (pm.n != monitored.state_dim() || pm.p != monitored.output_dim()) {
    throw InvalidInputError("estimate_t_delta: parity model does not match the monitored signal");
  }
  ParityModel pm_id = pm;
  pm_id.M = Mat::Identity(pm.nz(), pm.nz());
  const Mat t_theta = theta_s(pm_id, monitored).t_theta;

  const int onset = offset;
  const int horizon = onset + s;

  AttackScenario atk;
  atk.record_start = 0;
  atk.record_end = s - 1;
  atk.onset = onset;
  atk.end = onset + s - 1;
  atk.replay_inputs = replay_inputs;
  atk.schedule.kind = ReplaySchedule::Kind::fixed_offset;
  atk.schedule.offset = offset;

  const int nz = pm.nz();
  std::vector<Mat> accum(s + 1, Mat::Zero(nz, nz));
  for (int b = 0; b < batches; ++b) {
    SimOptions opt;
    opt.horizon = horizon;
    opt.warmup = warmup;
    opt.seed = derive_seed(seed, static_cast<std::uint64_t>(b));
    const Trajectory traj = simulate(sys, ctrl, filter, &atk, nullptr, opt);
    const ResidualTrace rt = residual_trace(pm_id, traj.y_d, traj.u_d);

    const Vec r0 = rt.r.row(rt.row_of_step(onset - 1)).transpose();
    accum[0] += r0 * r0.transpose();
    for (int a = 1; a <= s; ++a) {
      const Vec r = rt.r.row(rt.row_of_step(onset + a - 1)).transpose();
      accum[a] += r * r.transpose();
    }
  }

  TDeltaEstimate est;
  est.batches = batches;
  est.t_hat.reserve(s + 1);
  for (int a = 0; a <= s; ++a) {
    est.t_hat.push_back(sym(accum[a] / static_cast<double>(batches - 1)) - t_theta);
  }
  return est;
}

}  // namespace parityspace
