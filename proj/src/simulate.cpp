#include "parityspace/simulate.hpp"

#include "parityspace/linalg.hpp"

#include <cmath>
#include <random>
#include <string>

namespace parityspace {

namespace {

struct ResolvedAttack {
  bool enabled = false;
  int onset = 0;
  int end = 0;
  int tau0 = 0;
  bool replay_inputs = true;
  const AttackerInput* ua = nullptr;
};

ResolvedAttack resolve_attack(const AttackScenario* attack, int horizon,
                              std::mt19937_64& rng) {
  ResolvedAttack out;
  if (attack == nullptr || attack->onset < 0) return out;
  const AttackScenario& a = *attack;
  out.enabled = true;
  out.onset = a.onset;
  out.end = a.end < 0 ? horizon - 1 : a.end;
  out.replay_inputs = a.replay_inputs;
  out.ua = &a.ua;
  if (a.record_start < 0 || a.record_end < a.record_start) {
    throw InvalidInputError("attack: recording window is empty or unset");
  }
  if (a.onset < a.record_end + std::max(1, a.min_onset_gap)) {
    throw InvalidInputError("attack: onset must come after the recording window");
  }
  if (out.end < out.onset || out.onset >= horizon) {
    throw InvalidInputError("attack: onset/end do not describe a live attack window");
  }
  const int len = out.end - out.onset + 1;
  switch (a.schedule.kind) {
    case ReplaySchedule::Kind::fixed_offset: {
      if (a.schedule.offset < 1) {
        throw InvalidInputError("attack: replay offset must be >= 1");
      }
      out.tau0 = a.onset - a.schedule.offset;
      break;
    }
    case ReplaySchedule::Kind::randomized_start: {
      const int slack = (a.record_end - a.record_start) - (len - 1);
      if (slack < 0) {
        throw InvalidInputError("attack: recording window shorter than the replay segment");
      }
      std::uniform_int_distribution<int> pick(0, slack);
      out.tau0 = a.record_start + pick(rng);
      break;
    }
  }
  if (out.tau0 < a.record_start || out.tau0 + len - 1 > a.record_end) {
    throw InvalidInputError("attack: replay source steps leave the recorded window");
  }
  return out;
}

Vec fault_value(const FaultConfig& f, int k, std::normal_distribution<double>& n01,
                std::mt19937_64& rng) {
  const int nf = static_cast<int>(f.Bf.cols());
  Vec val = Vec::Zero(nf);
  switch (f.signal.kind) {
    case FaultSignal::Kind::constant:
      val = f.signal.value;
      break;
    case FaultSignal::Kind::gaussian:
      for (int i = 0; i < nf; ++i) val(i) = f.signal.sigma * n01(rng);
      break;
    case FaultSignal::Kind::sinusoid:
      val = Vec::Constant(nf, f.signal.amp * std::sin(static_cast<double>(k) /
                                                      f.signal.time_scale));
      break;
  }
  return val;
}

}  // namespace

Trajectory simulate(const LtiSystem& sys, const Controller& ctrl,
                    const MarginalFilter* filter, const AttackScenario* attack,
                    const FaultConfig* fault, const SimOptions& opt) {
  const int n = sys.state_dim();
  const int m = sys.input_dim();
  const int p = sys.output_dim();
  const int q = sys.noise_dim();
  const int nc = ctrl.state_dim();
  if (opt.horizon < 1) throw InvalidInputError("simulate: horizon must be positive");
  if (opt.warmup < 0) throw InvalidInputError("simulate: warm-up must be >= 0");
  if (ctrl.Bc.cols() != p || ctrl.Cc.rows() != m) {
    throw InvalidInputError("simulate: controller i/o dimensions do not match the plant");
  }
  const bool filtered = filter != nullptr;
  const int ch = filtered ? filter->state_dim() : p;  // sensor-channel width
  if (filtered && filter->Bz.cols() != p) {
    throw InvalidInputError("simulate: filter input width must equal the plant output");
  }
  if (fault != nullptr) {
    if (fault->Bf.rows() != n || fault->Df.rows() != p ||
        fault->Bf.cols() != fault->Df.cols()) {
      throw InvalidInputError("simulate: fault matrices must be n x nf and p x nf");
    }
    if (fault->start < 0 || fault->end < fault->start) {
      throw InvalidInputError("simulate: fault window is empty");
    }
  }

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const Mat sq = psd_sqrt(sys.Q);
  const Mat sr = psd_sqrt(sys.R);

  const ResolvedAttack atk = resolve_attack(attack, opt.horizon, rng);
  const int rec_lo = atk.enabled ? attack->record_start : -1;
  const int rec_hi = atk.enabled ? attack->record_end : -2;
  if (atk.enabled && atk.ua->kind == AttackerInput::Kind::constant &&
      atk.ua->value.size() != m) {
    throw InvalidInputError("simulate: constant attacker input must match the plant input width");
  }

  Trajectory tr;
  tr.horizon = opt.horizon;
  tr.filtered = filtered;
  tr.x = Mat::Zero(opt.horizon, n);
  tr.xc = Mat::Zero(opt.horizon, nc);
  tr.zeta = Mat::Zero(opt.horizon, filtered ? ch : 0);
  tr.y = Mat::Zero(opt.horizon, p);
  tr.y_d = Mat::Zero(opt.horizon, ch);
  tr.y_ctrl = Mat::Zero(opt.horizon, p);
  tr.u = Mat::Zero(opt.horizon, m);
  tr.u_c = Mat::Zero(opt.horizon, m);
  tr.u_d = Mat::Zero(opt.horizon, m);
  tr.w = Mat::Zero(opt.horizon, q);
  tr.v = Mat::Zero(opt.horizon, p);
  tr.fault = Mat::Zero(opt.horizon, fault != nullptr ? fault->Bf.cols() : 0);
  tr.tau.assign(opt.horizon, -1);
  tr.phase.assign(opt.horizon, 0);
  tr.fault_on.assign(opt.horizon, 0);

  Mat rec_sent(ch, std::max(0, rec_hi - rec_lo + 1));
  Mat rec_u(m, std::max(0, rec_hi - rec_lo + 1));

  Vec x = Vec::Zero(n);
  Vec xc = Vec::Zero(nc);
  Vec zeta = Vec::Zero(filtered ? ch : 0);
  Vec prev_received = Vec::Zero(filtered ? ch : 0);  // controller-side memory

  Vec xi_q(q), xi_r(p);
  for (int k = -opt.warmup; k < opt.horizon; ++k) {
    for (int i = 0; i < q; ++i) xi_q(i) = n01(rng);
    for (int i = 0; i < p; ++i) xi_r(i) = n01(rng);
    const Vec wk = sq * xi_q;
    const Vec vk = sr * xi_r;

    const bool fault_active =
        fault != nullptr && k >= fault->start && k <= fault->end;
    Vec fk;
    if (fault_active) fk = fault_value(*fault, k, n01, rng);

    Vec y = sys.C * x + vk;
    if (fault_active) y += fault->Df * fk;

    Vec sent;
    if (filtered) {
      zeta = filter_step(*filter, zeta, y);
      sent = zeta;
    } else {
      sent = y;
    }

    const bool attacked = atk.enabled && k >= atk.onset && k <= atk.end;
    const int tau = attacked ? atk.tau0 + (k - atk.onset) : -1;
    const Vec received = attacked ? Vec(rec_sent.col(tau - rec_lo)) : sent;

    Vec y_ctrl;
    if (filtered) {
      y_ctrl = recover_step(*filter, received, prev_received);
      prev_received = received;
    } else {
      y_ctrl = received;
    }

    const Vec uc = ctrl.Cc * xc + ctrl.Dc * y_ctrl;
    Vec u = uc;
    if (attacked) {
      switch (atk.ua->kind) {
        case AttackerInput::Kind::zero:
          break;
        case AttackerInput::Kind::constant:
          u += atk.ua->value;
          break;
        case AttackerInput::Kind::gaussian:
          for (int i = 0; i < m; ++i) u(i) += atk.ua->sigma * n01(rng);
          break;
      }
    }
    const Vec ud = (attacked && atk.replay_inputs) ? Vec(rec_u.col(tau - rec_lo)) : uc;

    if (k >= rec_lo && k <= rec_hi) {
      rec_sent.col(k - rec_lo) = sent;
      rec_u.col(k - rec_lo) = u;
    }

    if (k >= 0) {
      tr.x.row(k) = x.transpose();
      tr.xc.row(k) = xc.transpose();
      if (filtered) tr.zeta.row(k) = zeta.transpose();
      tr.y.row(k) = y.transpose();
      tr.y_d.row(k) = received.transpose();
      tr.y_ctrl.row(k) = y_ctrl.transpose();
      tr.u.row(k) = u.transpose();
      tr.u_c.row(k) = uc.transpose();
      tr.u_d.row(k) = ud.transpose();
      tr.w.row(k) = wk.transpose();
      tr.v.row(k) = vk.transpose();
      if (fault_active) tr.fault.row(k) = fk.transpose();
      tr.tau[k] = tau;
      tr.phase[k] = attacked ? 2 : ((k >= rec_lo && k <= rec_hi) ? 1 : 0);
      tr.fault_on[k] = fault_active ? 1 : 0;
    }

    x = sys.A * x + sys.Bu * u + sys.Bw * wk;
    if (fault_active) x += fault->Bf * fk;
    if (nc > 0) xc = ctrl.Ac * xc + ctrl.Bc * y_ctrl;
  }
  return tr;
}

}  // namespace parityspace
