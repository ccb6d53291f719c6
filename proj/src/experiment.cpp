#include "parityspace/experiment.hpp"

#include "parityspace/linalg.hpp"
#include "parityspace/presets.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace parityspace {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError("config." + path + ": " + msg);
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) fail(path, "unknown key '" + it.key() + "'");
  }
}

Mat mat_field(const json& j, const std::string& path) {
  if (j.is_number()) {
    Mat m(1, 1);
    m(0, 0) = j.get<double>();
    return m;
  }
  if (!j.is_array() || j.empty()) fail(path, "expected a number or a non-empty array");
  if (j.front().is_number()) {  // flat array = one row
    Mat m(1, static_cast<Eigen::Index>(j.size()));
    for (std::size_t c = 0; c < j.size(); ++c) {
      if (!j[c].is_number()) fail(path, "row entries must be numbers");
      m(0, static_cast<Eigen::Index>(c)) = j[c].get<double>();
    }
    return m;
  }
  const std::size_t cols = j.front().size();
  if (cols == 0) fail(path, "rows must be non-empty arrays");
  Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) fail(path, "rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) fail(path, "matrix entries must be numbers");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

Vec vec_field(const json& j, const std::string& path) {
  const Mat m = mat_field(j, path);
  if (m.rows() == 1) return m.row(0).transpose();
  if (m.cols() == 1) return m.col(0);
  fail(path, "expected a vector");
}

double num_field(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

int int_field(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

bool bool_field(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected a boolean");
  return j.get<bool>();
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

const char* weighting_name(WeightingChoice::Kind k) {
  switch (k) {
    case WeightingChoice::Kind::identity: return "identity";
    case WeightingChoice::Kind::j1: return "j1";
    case WeightingChoice::Kind::j2: return "j2";
    case WeightingChoice::Kind::j2m: return "j2m";
    case WeightingChoice::Kind::j3: return "j3";
    case WeightingChoice::Kind::j4: return "j4";
    case WeightingChoice::Kind::unified: return "unified";
  }
  return "identity";
}

WeightingChoice::Kind weighting_kind(const std::string& name, const std::string& path) {
  if (name == "identity") return WeightingChoice::Kind::identity;
  if (name == "j1") return WeightingChoice::Kind::j1;
  if (name == "j2") return WeightingChoice::Kind::j2;
  if (name == "j2m") return WeightingChoice::Kind::j2m;
  if (name == "j3") return WeightingChoice::Kind::j3;
  if (name == "j4") return WeightingChoice::Kind::j4;
  if (name == "unified") return WeightingChoice::Kind::unified;
  fail(path, "unknown weighting '" + name +
                 "' (expected identity|j1|j2|j2m|j3|j4|unified)");
}

LtiSystem parse_system(const json& j, std::string& preset_out) {
  if (j.contains("preset")) {
    if (!j["preset"].is_string()) fail("preset", "expected a string");
    if (j.contains("system")) fail("system", "give either a preset or explicit matrices");
    preset_out = j["preset"].get<std::string>();
    try {
      return preset_system(preset_out);
    } catch (const Error& e) {
      fail("preset", e.what());
    }
  }
  if (!j.contains("system")) fail("system", "missing (give 'preset' or 'system')");
  const json& s = j["system"];
  if (!s.is_object()) fail("system", "expected an object");
  check_keys(s, {"A", "Bu", "Bw", "C", "Q", "R"}, "system");
  for (const char* k : {"A", "Bu", "Bw", "C", "Q", "R"}) {
    if (!s.contains(k)) fail(std::string("system.") + k, "missing");
  }
  try {
    return make_system(mat_field(s["A"], "system.A"), mat_field(s["Bu"], "system.Bu"),
                       mat_field(s["Bw"], "system.Bw"), mat_field(s["C"], "system.C"),
                       mat_field(s["Q"], "system.Q"), mat_field(s["R"], "system.R"));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail("system", e.what());
  }
}

Controller parse_controller(const json& j, const LtiSystem& sys, std::string& type_out) {
  json c = j.value("controller", json{{"type", "lqg"}});
  if (!c.is_object()) fail("controller", "expected an object");
  check_keys(c, {"type", "F", "K", "L", "state_weight", "input_weight"}, "controller");
  if (!c.contains("type") || !c["type"].is_string()) fail("controller.type", "expected a string");
  type_out = c["type"].get<std::string>();
  try {
    if (type_out == "lqg") {
      const Mat wx = c.contains("state_weight")
                         ? mat_field(c["state_weight"], "controller.state_weight")
                         : Mat(Mat::Identity(sys.state_dim(), sys.state_dim()));
      const Mat wu = c.contains("input_weight")
                         ? mat_field(c["input_weight"], "controller.input_weight")
                         : Mat(Mat::Identity(sys.input_dim(), sys.input_dim()));
      return lqg_synthesize(sys, wx, wu);
    }
    if (type_out == "static") {
      if (!c.contains("F")) fail("controller.F", "missing for static controller");
      return make_static_controller(mat_field(c["F"], "controller.F"), sys.output_dim());
    }
    if (type_out == "observer") {
      if (!c.contains("K") || !c.contains("L")) {
        fail("controller", "observer controller needs K and L");
      }
      return make_observer_controller(sys, mat_field(c["K"], "controller.K"),
                                      mat_field(c["L"], "controller.L"));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail("controller", e.what());
  }
  fail("controller.type", "unknown type '" + type_out + "' (expected lqg|static|observer)");
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  check_keys(j,
             {"preset", "system", "controller", "s", "detector", "weighting", "filter",
              "attack", "fault", "horizon", "warmup", "trials", "seed"},
             "(top level)");

  ExperimentConfig cfg;
  cfg.sys = parse_system(j, cfg.preset);
  cfg.ctrl = parse_controller(j, cfg.sys, cfg.controller_type);

  if (j.contains("s")) cfg.s = int_field(j["s"], "s");
  if (cfg.s < 1) fail("s", "window order must be >= 1");

  if (j.contains("detector")) {
    const json& d = j["detector"];
    if (!d.is_object()) fail("detector", "expected an object");
    check_keys(d, {"chi2_threshold", "glr_threshold", "n_r"}, "detector");
    if (d.contains("chi2_threshold")) {
      cfg.detector.chi2_threshold = num_field(d["chi2_threshold"], "detector.chi2_threshold");
    }
    if (d.contains("glr_threshold")) {
      cfg.detector.glr_threshold = num_field(d["glr_threshold"], "detector.glr_threshold");
    }
    if (d.contains("n_r")) cfg.detector.n_r = int_field(d["n_r"], "detector.n_r");
  }
  if (cfg.detector.n_r < 0) cfg.detector.n_r = cfg.s + 1;
  if (cfg.detector.n_r < 1) fail("detector.n_r", "window must be >= 1");
  if (!(cfg.detector.chi2_threshold > 0.0)) fail("detector.chi2_threshold", "must be > 0");
  if (!(cfg.detector.glr_threshold > 0.0)) fail("detector.glr_threshold", "must be > 0");

  if (j.contains("weighting")) {
    const json& w = j["weighting"];
    if (w.is_string()) {
      cfg.weighting.kind = weighting_kind(w.get<std::string>(), "weighting");
    } else if (w.is_object()) {
      check_keys(w, {"type", "l", "gamma", "alpha"}, "weighting");
      if (!w.contains("type") || !w["type"].is_string()) fail("weighting.type", "missing");
      cfg.weighting.kind = weighting_kind(w["type"].get<std::string>(), "weighting.type");
      if (w.contains("l")) cfg.weighting.l = int_field(w["l"], "weighting.l");
      if (w.contains("gamma")) cfg.weighting.gamma = num_field(w["gamma"], "weighting.gamma");
      if (w.contains("alpha")) cfg.weighting.alpha = int_field(w["alpha"], "weighting.alpha");
    } else {
      fail("weighting", "expected a string or an object");
    }
  }
  if (!(cfg.weighting.gamma > 0.0)) fail("weighting.gamma", "must be > 0");
  if (cfg.weighting.alpha == 0 || cfg.weighting.alpha > cfg.s) {
    fail("weighting.alpha", "target depth must lie in 1..s");
  }

  if (j.contains("filter")) {
    const json& f = j["filter"];
    if (!f.is_object()) fail("filter", "expected an object");
    check_keys(f, {"enabled", "radius", "Az", "Bz"}, "filter");
    cfg.filter.enabled = f.contains("enabled") ? bool_field(f["enabled"], "filter.enabled") : true;
    if (cfg.filter.enabled) {
      if (f.contains("Az") != f.contains("Bz")) {
        fail("filter", "give both Az and Bz or neither");
      }
      if (f.contains("Az")) {
        if (f.contains("radius")) fail("filter.radius", "ignored when Az/Bz are explicit");
        cfg.filter.Az = mat_field(f["Az"], "filter.Az");
        cfg.filter.Bz = mat_field(f["Bz"], "filter.Bz");
      } else {
        const double radius = f.contains("radius") ? num_field(f["radius"], "filter.radius") : 0.999;
        const int p = cfg.sys.output_dim();
        cfg.filter.Az = radius * Mat::Identity(p, p);
        cfg.filter.Bz = Mat::Identity(p, p);
      }
    }
  }

  if (j.contains("attack")) {
    const json& a = j["attack"];
    if (!a.is_object()) fail("attack", "expected an object");
    check_keys(a, {"enabled", "onset", "offset", "end", "replay_inputs", "randomized_start"},
               "attack");
    if (a.contains("enabled")) cfg.attack.enabled = bool_field(a["enabled"], "attack.enabled");
    if (a.contains("onset")) cfg.attack.onset = int_field(a["onset"], "attack.onset");
    if (a.contains("offset")) cfg.attack.offset = int_field(a["offset"], "attack.offset");
    if (a.contains("end")) cfg.attack.end = int_field(a["end"], "attack.end");
    if (a.contains("replay_inputs")) {
      cfg.attack.replay_inputs = bool_field(a["replay_inputs"], "attack.replay_inputs");
    }
    if (a.contains("randomized_start")) {
      cfg.attack.randomized_start = bool_field(a["randomized_start"], "attack.randomized_start");
    }
  }

  if (j.contains("fault")) {
    const json& f = j["fault"];
    if (!f.is_object()) fail("fault", "expected an object");
    check_keys(f, {"enabled", "kind", "Bf", "Df", "value", "sigma", "amp", "time_scale",
                   "start", "end"},
               "fault");
    cfg.fault.enabled = f.contains("enabled") ? bool_field(f["enabled"], "fault.enabled") : true;
    if (cfg.fault.enabled) {
      const int n = cfg.sys.state_dim();
      const int p = cfg.sys.output_dim();
      if (!f.contains("Bf") && !f.contains("Df")) fail("fault", "give Bf and/or Df");
      Mat bf = f.contains("Bf") ? mat_field(f["Bf"], "fault.Bf") : Mat();
      Mat df = f.contains("Df") ? mat_field(f["Df"], "fault.Df") : Mat();
      if (bf.size() == 0) bf = Mat::Zero(n, df.cols());
      if (df.size() == 0) df = Mat::Zero(p, bf.cols());
      cfg.fault.config.Bf = bf;
      cfg.fault.config.Df = df;
      const std::string kind = f.value("kind", std::string("constant"));
      if (kind == "constant") {
        cfg.fault.config.signal.kind = FaultSignal::Kind::constant;
        if (!f.contains("value")) fail("fault.value", "missing for constant fault");
        cfg.fault.config.signal.value = vec_field(f["value"], "fault.value");
      } else if (kind == "gaussian") {
        cfg.fault.config.signal.kind = FaultSignal::Kind::gaussian;
        if (!f.contains("sigma")) fail("fault.sigma", "missing for gaussian fault");
        cfg.fault.config.signal.sigma = num_field(f["sigma"], "fault.sigma");
      } else if (kind == "sinusoid") {
        cfg.fault.config.signal.kind = FaultSignal::Kind::sinusoid;
        if (!f.contains("amp")) fail("fault.amp", "missing for sinusoid fault");
        cfg.fault.config.signal.amp = num_field(f["amp"], "fault.amp");
        cfg.fault.config.signal.time_scale =
            f.contains("time_scale") ? num_field(f["time_scale"], "fault.time_scale") : 1.0;
        if (cfg.fault.config.signal.time_scale <= 0.0) fail("fault.time_scale", "must be > 0");
      } else {
        fail("fault.kind", "unknown kind '" + kind + "' (expected constant|gaussian|sinusoid)");
      }
      if (!f.contains("start") || !f.contains("end")) fail("fault", "give start and end steps");
      cfg.fault.config.start = int_field(f["start"], "fault.start");
      cfg.fault.config.end = int_field(f["end"], "fault.end");
    }
  }

  if (j.contains("horizon")) cfg.horizon = int_field(j["horizon"], "horizon");
  if (j.contains("warmup")) cfg.warmup = int_field(j["warmup"], "warmup");
  if (j.contains("trials")) cfg.trials = int_field(j["trials"], "trials");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() || j["seed"].get<long long>() < 0) {
      fail("seed", "expected a non-negative integer");
    }
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  if (cfg.horizon < cfg.s + 1) fail("horizon", "must exceed the parity window");
  if (cfg.warmup < 0) fail("warmup", "must be >= 0");
  if (cfg.trials < 1) fail("trials", "must be >= 1");

  // Canonical echo of the resolved configuration (alphabetical keys).
  json echo;
  if (!cfg.preset.empty()) {
    echo["preset"] = cfg.preset;
  } else {
    echo["system"] = {{"A", mat_to_json(cfg.sys.A)},   {"Bu", mat_to_json(cfg.sys.Bu)},
                      {"Bw", mat_to_json(cfg.sys.Bw)}, {"C", mat_to_json(cfg.sys.C)},
                      {"Q", mat_to_json(cfg.sys.Q)},   {"R", mat_to_json(cfg.sys.R)}};
  }
  echo["controller"] = j.value("controller", json{{"type", "lqg"}});
  echo["s"] = cfg.s;
  echo["detector"] = {{"chi2_threshold", cfg.detector.chi2_threshold},
                      {"glr_threshold", cfg.detector.glr_threshold},
                      {"n_r", cfg.detector.n_r}};
  echo["weighting"] = {{"type", weighting_name(cfg.weighting.kind)},
                       {"l", cfg.weighting.l},
                       {"gamma", cfg.weighting.gamma},
                       {"alpha", cfg.weighting.alpha}};
  echo["filter"] = {{"enabled", cfg.filter.enabled}};
  if (cfg.filter.enabled) {
    echo["filter"]["Az"] = mat_to_json(cfg.filter.Az);
    echo["filter"]["Bz"] = mat_to_json(cfg.filter.Bz);
  }
  echo["attack"] = {{"enabled", cfg.attack.enabled},
                    {"onset", cfg.attack.onset},
                    {"offset", cfg.attack.offset},
                    {"end", cfg.attack.end},
                    {"replay_inputs", cfg.attack.replay_inputs},
                    {"randomized_start", cfg.attack.randomized_start}};
  echo["fault"] = {{"enabled", cfg.fault.enabled}};
  if (cfg.fault.enabled) {
    echo["fault"]["Bf"] = mat_to_json(cfg.fault.config.Bf);
    echo["fault"]["Df"] = mat_to_json(cfg.fault.config.Df);
    echo["fault"]["start"] = cfg.fault.config.start;
    echo["fault"]["end"] = cfg.fault.config.end;
  }
  echo["horizon"] = cfg.horizon;
  echo["warmup"] = cfg.warmup;
  echo["trials"] = cfg.trials;
  echo["seed"] = cfg.seed;
  cfg.echo = echo.dump(2);
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

namespace {

AttackScenario build_attack(const ExperimentConfig& cfg) {
  const AttackSettings& a = cfg.attack;
  const int end = a.end < 0 ? cfg.horizon - 1 : a.end;
  if (end < a.onset) fail("attack.end", "attack ends before it starts");
  const int len = end - a.onset + 1;
  const int rec_start = a.onset - a.offset;
  if (rec_start < 0) fail("attack.offset", "replayed data would predate the run");
  AttackScenario atk;
  atk.record_start = rec_start;
  atk.record_end = rec_start + len - 1;
  if (atk.record_end >= a.onset) {
    fail("attack.offset", "recorded window overlaps the attack; increase the offset");
  }
  atk.onset = a.onset;
  atk.end = end;
  atk.replay_inputs = a.replay_inputs;
  atk.schedule.kind = a.randomized_start ? ReplaySchedule::Kind::randomized_start
                                         : ReplaySchedule::Kind::fixed_offset;
  atk.schedule.offset = a.offset;
  atk.min_onset_gap = cfg.s + 1;  // let the recorded window settle before splicing
  return atk;
}

}  // namespace

PreparedExperiment prepare_experiment(const ExperimentConfig& cfg) {
  PreparedExperiment ex;
  ex.cfg = cfg;

  if (cfg.filter.enabled) {
    try {
      ex.filter = make_filter(cfg.filter.Az, cfg.filter.Bz);
    } catch (const Error& e) {
      throw ConfigError(std::string("config.filter: ") + e.what());
    }
    ex.monitored = augment_with_filter(cfg.sys, *ex.filter);
  } else {
    ex.monitored = cfg.sys;
  }

  ParityModel pm_id;
  try {
    pm_id = build_parity(ex.monitored, cfg.s);
  } catch (const Error& e) {
    throw ConfigError(std::string("config.s: ") + e.what());
  }
  const ParityCov cov_id = theta_s(pm_id, ex.monitored);

  // Stationary closed-loop analysis; marginally stable loops (for example an
  // exactly integrating transmit filter) have none, which only forecloses the
  // analysis-dependent weightings and bound overlays.
  try {
    const ClosedLoop loop = ex.filter
                                ? close_loop_filtered(cfg.sys, cfg.ctrl, *ex.filter)
                                : close_loop(cfg.sys, cfg.ctrl);
    ex.report = covariance_report(pm_id, ex.monitored, loop, cfg.ctrl,
                                  cfg.attack.replay_inputs);
  } catch (const UnstableError& e) {
    ex.analysis_note = std::string("analysis unavailable: ") + e.what();
  }

  const int nz = pm_id.nz();
  Mat m = Mat::Identity(nz, nz);
  const WeightingChoice& w = cfg.weighting;
  const bool needs_report = w.kind == WeightingChoice::Kind::j1 ||
                            w.kind == WeightingChoice::Kind::j2 ||
                            w.kind == WeightingChoice::Kind::j2m ||
                            w.kind == WeightingChoice::Kind::j3 ||
                            w.kind == WeightingChoice::Kind::j4;
  if (needs_report && !ex.report) {
    throw ConfigError("config.weighting: '" + std::string(weighting_name(w.kind)) +
                      "' needs the closed-loop covariance analysis. " + ex.analysis_note +
                      " Use identity or unified weighting instead.");
  }
  switch (w.kind) {
    case WeightingChoice::Kind::identity:
      break;
    case WeightingChoice::Kind::unified:
      m = unified_solution(cov_id.t_theta).M;
      break;
    case WeightingChoice::Kind::j1: {
      const Mat target = w.alpha > 0 ? ex.report->per_alpha[w.alpha - 1].t_delta_p
                                     : ex.report->t_delta_p_sum;
      m = solve_j1(cov_id.t_theta, target, NormKind::two).M;
      break;
    }
    case WeightingChoice::Kind::j2: {
      const int l = w.l < 0 ? nz : w.l;
      if (l < 1 || l > nz) fail("weighting.l", "must lie in 1..parity-space dimension");
      m = solve_j2(cov_id.t_theta, ex.report->t_delta_sum, l).M;
      break;
    }
    case WeightingChoice::Kind::j2m: {
      const int alpha = w.alpha > 0 ? w.alpha : (cfg.s + 1) / 2;
      m = solve_j2m(cov_id.t_theta, ex.report->per_alpha[alpha - 1].t_delta).M;
      break;
    }
    case WeightingChoice::Kind::j3:
      m = solve_j3(cov_id.t_theta, ex.report->t_delta_sum).M;
      break;
    case WeightingChoice::Kind::j4: {
      if (w.l > 1) {
        ex.analysis_note += std::string(ex.analysis_note.empty() ? "" : "; ") +
                            "budgeted-trace weighting rows are parallel, using l = 1";
      }
      m = solve_j4(cov_id.t_theta, ex.report->t_delta_sum, 1, w.gamma).M;
      break;
    }
  }

  ex.pm = set_weighting(pm_id, m);
  ex.theta = sym(m * cov_id.t_theta * m.transpose());
  try {
    ex.chi2 = make_chi2_detector(ex.theta, cfg.detector.chi2_threshold);
    ex.glr = make_glr_detector(ex.theta, cfg.detector.n_r, cfg.detector.glr_threshold);
  } catch (const Error& e) {
    throw ConfigError(std::string("config.detector: ") + e.what());
  }
  return ex;
}

namespace {

Trajectory simulate_once(const PreparedExperiment& ex, std::uint64_t seed) {
  const ExperimentConfig& cfg = ex.cfg;
  AttackScenario atk;
  const AttackScenario* atk_ptr = nullptr;
  if (cfg.attack.enabled) {
    atk = build_attack(cfg);
    atk_ptr = &atk;
  }
  const FaultConfig* fault_ptr = cfg.fault.enabled ? &cfg.fault.config : nullptr;
  SimOptions opt;
  opt.horizon = cfg.horizon;
  opt.warmup = cfg.warmup;
  opt.seed = seed;
  const MarginalFilter* filter_ptr = ex.filter ? &*ex.filter : nullptr;
  return simulate(cfg.sys, cfg.ctrl, filter_ptr, atk_ptr, fault_ptr, opt);
}

}  // namespace

TraceResult run_trace(const PreparedExperiment& ex) {
  const ExperimentConfig& cfg = ex.cfg;
  const Trajectory traj = simulate_once(ex, cfg.seed);
  const ResidualTrace rt = residual_trace(ex.pm, traj.y_d, traj.u_d);

  TraceResult out;
  out.start = rt.start;
  const int rows = static_cast<int>(rt.r.rows());
  const int n_r = ex.glr.n_r;
  out.chi2_stats.resize(rows);
  out.glr_stats.assign(rows, std::numeric_limits<double>::quiet_NaN());
  out.chi2_alarms.resize(rows);
  out.glr_alarms.assign(rows, 0);
  out.phase.resize(rows);
  out.fault_on.resize(rows);

  for (int i = 0; i < rows; ++i) {
    const Vec r = rt.r.row(i).transpose();
    out.chi2_stats[i] = chi2_stat(ex.chi2, r);
    out.chi2_alarms[i] = out.chi2_stats[i] > ex.chi2.threshold ? 1 : 0;
    if (i >= n_r - 1) {
      out.glr_stats[i] = glr_stat(ex.glr, rt.r.middleRows(i - n_r + 1, n_r));
      out.glr_alarms[i] = out.glr_stats[i] > ex.glr.threshold ? 1 : 0;
    }
    const int k = rt.step_of_row(i);
    out.phase[i] = traj.phase[k];
    out.fault_on[i] = traj.fault_on[k];
  }
  out.chi2_call = classify_anomaly(out.chi2_alarms, cfg.s);
  out.glr_call = classify_anomaly(out.glr_alarms, cfg.s + n_r - 1);
  return out;
}

RateResult run_detection_rate(const PreparedExperiment& ex) {
  const ExperimentConfig& cfg = ex.cfg;
  if (!cfg.attack.enabled) {
    throw ConfigError("config.attack: detection-rate mode needs an enabled attack");
  }
  const int s = cfg.s;
  const int n_r = ex.glr.n_r;
  const int n_alpha = s + n_r - 1;
  const int onset = cfg.attack.onset;
  const int attack_end = cfg.attack.end < 0 ? cfg.horizon - 1 : cfg.attack.end;
  if (onset + n_alpha - 1 > attack_end || onset + n_alpha > cfg.horizon) {
    throw ConfigError("config.horizon: attack must cover depths 1.." +
                      std::to_string(n_alpha) + " for rate estimation");
  }

  RateResult out;
  out.trials = cfg.trials;
  out.n_alpha = n_alpha;

  // Known-covariance likelihood-ratio models per depth (analysis permitting).
  std::vector<LrModel> ideal;
  if (ex.report) {
    const Mat& m = ex.pm.M;
    ideal.reserve(s);
    for (int a = 1; a <= s; ++a) {
      const Mat delta_w = sym(m * ex.report->per_alpha[a - 1].t_delta * m.transpose());
      ideal.push_back(make_lr_model(ex.theta, sym(ex.theta + delta_w)));
    }
  }

  std::vector<int> chi2_hits(n_alpha, 0), chi2_cum(n_alpha, 0);
  std::vector<int> glr_hits(n_alpha, 0), glr_cum(n_alpha, 0);
  std::vector<int> ideal_hits(s, 0);

  for (int t = 0; t < cfg.trials; ++t) {
    const Trajectory traj = simulate_once(ex, derive_seed(cfg.seed, t));
    const ResidualTrace rt = residual_trace(ex.pm, traj.y_d, traj.u_d);
    bool any_chi2 = false;
    bool any_glr = false;
    for (int a = 1; a <= n_alpha; ++a) {
      const int i = rt.row_of_step(onset + a - 1);
      const Vec r = rt.r.row(i).transpose();
      const bool chi2_hit = chi2_stat(ex.chi2, r) > ex.chi2.threshold;
      const bool glr_hit =
          glr_stat(ex.glr, rt.r.middleRows(i - n_r + 1, n_r)) > ex.glr.threshold;
      any_chi2 = any_chi2 || chi2_hit;
      any_glr = any_glr || glr_hit;
      chi2_hits[a - 1] += chi2_hit;
      chi2_cum[a - 1] += any_chi2;
      glr_hits[a - 1] += glr_hit;
      glr_cum[a - 1] += any_glr;
      if (a <= s && !ideal.empty()) {
        ideal_hits[a - 1] += 0.5 * lr_score(ideal[a - 1], r) > ex.glr.threshold;
      }
    }
  }

  const auto to_rate = [&](const std::vector<int>& hits) {
    std::vector<double> rates(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
      rates[i] = static_cast<double>(hits[i]) / cfg.trials;
    }
    return rates;
  };
  out.chi2_rate = to_rate(chi2_hits);
  out.chi2_rate_cum = to_rate(chi2_cum);
  out.glr_rate = to_rate(glr_hits);
  out.glr_rate_cum = to_rate(glr_cum);
  if (!ideal.empty()) out.ideal_lr_rate = to_rate(ideal_hits);

  if (ex.report) {
    const Mat& m = ex.pm.M;
    out.chi2_b.reserve(s);
    out.lr_b.reserve(s);
    for (int a = 1; a <= s; ++a) {
      const Mat delta_w = sym(m * ex.report->per_alpha[a - 1].t_delta * m.transpose());
      out.chi2_b.push_back(chi2_bounds(ex.theta, delta_w, cfg.detector.chi2_threshold));
      out.lr_b.push_back(lr_bounds(ex.theta, delta_w, cfg.detector.glr_threshold));
    }
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

struct CiRow {
  double lo;
  double hi;
};

CiRow binom_ci(double p, int n) {
  const double half = 1.959963984540054 * std::sqrt(std::max(p * (1.0 - p), 0.0) / n);
  return {std::max(0.0, p - half), std::min(1.0, p + half)};
}

void rate_series(std::ofstream& f, const char* name, const std::vector<double>& v, int trials) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    const CiRow ci = binom_ci(v[i], trials);
    f << "rate," << (i + 1) << ',' << name << ',' << fmt(v[i]) << ',' << fmt(ci.lo) << ','
      << fmt(ci.hi) << '\n';
  }
}

}  // namespace

void write_report(const PreparedExperiment& ex, const TraceResult* trace,
                  const RateResult* rate, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory '" + out_dir + "': " + ec.message());

  const auto open = [&](const char* name) {
    std::ofstream f(fs::path(out_dir) / name, std::ios::trunc);
    if (!f) throw Error(std::string("cannot write ") + name + " in '" + out_dir + "'");
    return f;
  };

  {
    std::ofstream f = open("traces.csv");
    f << "experiment,k,series,value,ci_lo,ci_hi\n";
    if (trace) {
      const int rows = static_cast<int>(trace->chi2_stats.size());
      for (int i = 0; i < rows; ++i) {
        const int k = trace->start + i;
        f << "trace," << k << ",chi2_stat," << fmt(trace->chi2_stats[i]) << ",,\n";
        f << "trace," << k << ",chi2_alarm," << int(trace->chi2_alarms[i]) << ",,\n";
        if (!std::isnan(trace->glr_stats[i])) {
          f << "trace," << k << ",glr_stat," << fmt(trace->glr_stats[i]) << ",,\n";
          f << "trace," << k << ",glr_alarm," << int(trace->glr_alarms[i]) << ",,\n";
        }
        f << "trace," << k << ",phase," << int(trace->phase[i]) << ",,\n";
        f << "trace," << k << ",fault_on," << int(trace->fault_on[i]) << ",,\n";
      }
    }
  }

  {
    std::ofstream f = open("rates.csv");
    f << "experiment,alpha,series,value,ci_lo,ci_hi\n";
    if (rate) {
      rate_series(f, "chi2_rate", rate->chi2_rate, rate->trials);
      rate_series(f, "chi2_rate_cum", rate->chi2_rate_cum, rate->trials);
      rate_series(f, "glr_rate", rate->glr_rate, rate->trials);
      rate_series(f, "glr_rate_cum", rate->glr_rate_cum, rate->trials);
      rate_series(f, "ideal_lr_rate", rate->ideal_lr_rate, rate->trials);
    }
  }

  {
    std::ofstream f = open("bounds.csv");
    f << "alpha,chi2_mean,chi2_upper,chi2_lower,chi2_lower_valid,"
         "lr_mean,lr_upper,lr_lower,lr_lower_valid\n";
    if (rate && !rate->chi2_b.empty()) {
      for (std::size_t i = 0; i < rate->chi2_b.size(); ++i) {
        const DetectionBounds& c = rate->chi2_b[i];
        const DetectionBounds& g = rate->lr_b[i];
        f << (i + 1) << ',' << fmt(c.mean_stat) << ',' << fmt(c.upper) << ',' << fmt(c.lower)
          << ',' << int(c.lower_valid) << ',' << fmt(g.mean_stat) << ',' << fmt(g.upper) << ','
          << fmt(g.lower) << ',' << int(g.lower_valid) << '\n';
      }
    }
  }

  {
    std::ofstream f = open("summary.txt");
    f << "mode: " << (rate ? "rate" : "trace") << '\n';
    f << "seed: " << ex.cfg.seed << '\n';
    f << "parity window order: " << ex.cfg.s << '\n';
    f << "parity space dimension: " << ex.pm.nz() << '\n';
    f << "residual rows: " << ex.pm.l() << '\n';
    f << "analysis: " << (ex.report ? "available" : "unavailable") << '\n';
    if (!ex.analysis_note.empty()) f << "note: " << ex.analysis_note << '\n';
    if (trace) {
      f << "chi2 classification: " << anomaly_name(trace->chi2_call.type) << '\n';
      f << "glr classification: " << anomaly_name(trace->glr_call.type) << '\n';
    }
    if (rate) {
      f << "trials: " << rate->trials << '\n';
      const auto peak = [](const std::vector<double>& v) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < v.size(); ++i) {
          if (v[i] > v[best]) best = i;
        }
        return std::pair<int, double>(static_cast<int>(best) + 1, v.empty() ? 0.0 : v[best]);
      };
      if (!rate->chi2_rate.empty()) {
        const auto [a, v] = peak(rate->chi2_rate);
        f << "peak chi2 rate: " << fmt(v) << " at depth " << a << '\n';
      }
      if (!rate->glr_rate.empty()) {
        const auto [a, v] = peak(rate->glr_rate);
        f << "peak glr rate: " << fmt(v) << " at depth " << a << '\n';
      }
    }
    f << "config:\n" << ex.cfg.echo << '\n';
  }
}

}  // namespace parityspace
