#pragma once

#include "parityspace/plant.hpp"
#include "parityspace/types.hpp"

#include <cstdint>
#include <vector>

namespace parityspace {

/// Deterministic per-stream seed derivation (SplitMix64 finalizer). Raw
/// XOR of base and stream index would correlate neighbouring streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// How the replay source step tau_k is chosen. Replay is contiguous:
/// tau_k = tau_0 + (k - onset).
struct ReplaySchedule {
  enum class Kind { fixed_offset, randomized_start };
  Kind kind = Kind::fixed_offset;
  int offset = 0;  ///< fixed_offset: tau_k = k - offset (offset >= 1)
};

/// Attacker's physical input added to the actuation while the attack runs.
struct AttackerInput {
  enum class Kind { zero, constant, gaussian };
  Kind kind = Kind::zero;
  Vec value;           ///< constant: added verbatim
  double sigma = 0.0;  ///< gaussian: i.i.d. N(0, sigma^2) per input channel
};

/// Replay attack scenario. The attacker records the transmitted sensor
/// signal (and the applied input) over [record_start, record_end], then from
/// `onset` to `end` feeds the recorded signal to both the controller and the
/// detector; when replay_inputs is set the detector's input channel is
/// replaced by the recorded inputs as well.
struct AttackScenario {
  int record_start = -1;
  int record_end = -1;
  int onset = -1;
  int end = -1;  ///< inclusive; -1 = attack until the horizon ends
  bool replay_inputs = true;
  ReplaySchedule schedule;
  AttackerInput ua;
  int min_onset_gap = 1;  ///< required gap between record_end and onset
};

/// Additive fault: x(k+1) += Bf f(k), y(k) += Df f(k) for k in
/// [start, end] (inclusive).
struct FaultSignal {
  enum class Kind { constant, gaussian, sinusoid };
  Kind kind = Kind::constant;
  Vec value;            ///< constant amplitude per fault channel
  double sigma = 0.0;   ///< gaussian: i.i.d. N(0, sigma^2)
  double amp = 0.0;     ///< sinusoid: amp * sin(k / time_scale)
  double time_scale = 1.0;
};

struct FaultConfig {
  Mat Bf;
  Mat Df;
  FaultSignal signal;
  int start = -1;
  int end = -1;
};

/// One simulated run. Signals are stored step-per-row; step indices are
/// post-warm-up (the warm-up prefix is discarded). y_d is the signal the
/// detector receives on the sensor channel: the plant output for a plain
/// loop, the filter state for a filtered loop.
struct Trajectory {
  int horizon = 0;
  bool filtered = false;
  Mat x;       ///< plant state
  Mat xc;      ///< controller state (0 columns when static)
  Mat zeta;    ///< filter state (0 columns when unfiltered)
  Mat y;       ///< true plant output
  Mat y_d;     ///< received sensor-channel signal (controller and detector)
  Mat y_ctrl;  ///< controller input after recovery (equals y_d when unfiltered)
  Mat u;       ///< applied plant input
  Mat u_c;     ///< controller output
  Mat u_d;     ///< detector-received input channel
  Mat w;       ///< process noise draws
  Mat v;       ///< measurement noise draws
  Mat fault;   ///< fault signal (0 columns when no fault)
  std::vector<int> tau;          ///< replay source step, -1 outside the attack
  std::vector<std::uint8_t> phase;     ///< 0 healthy, 1 recording, 2 attacked
  std::vector<std::uint8_t> fault_on;  ///< 1 while the fault is active
};

struct SimOptions {
  int horizon = 0;
  int warmup = 200;
  std::uint64_t seed = 0;
};

/// Runs the closed loop, optionally through a sensor-side filter, under an
/// optional replay attack and an optional additive fault. Identical options
/// produce bit-identical trajectories. Scenario inconsistencies (replay
/// source outside the recorded window, onset not beyond the recording, zero
/// offset) throw InvalidInputError.
Trajectory simulate(const LtiSystem& sys, const Controller& ctrl,
                    const MarginalFilter* filter, const AttackScenario* attack,
                    const FaultConfig* fault, const SimOptions& opt);

}  // namespace parityspace
