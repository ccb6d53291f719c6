#include "parityspace/parity.hpp"

#include "parityspace/linalg.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace parityspace {

namespace {

nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Mat mat_from_json(const nlohmann::json& j, int cols_hint = -1) {
  if (!j.is_array()) throw InvalidInputError("parity json: matrix must be an array of rows");
  const int rows = static_cast<int>(j.size());
  if (rows == 0) return Mat::Zero(0, std::max(cols_hint, 0));
  const int cols = static_cast<int>(j.at(0).size());
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j.at(i).size()) != cols) {
      throw InvalidInputError("parity json: ragged matrix rows");
    }
    for (int jj = 0; jj < cols; ++jj) m(i, jj) = j.at(i).at(jj).get<double>();
  }
  return m;
}

}  // namespace

Mat observability_stack(const Mat& a, const Mat& c, int s) {
  if (s < 0) throw InvalidInputError("observability_stack: order must be >= 0");
  const Eigen::Index n = a.rows();
  const Eigen::Index p = c.rows();
  Mat h((s + 1) * p, n);
  Mat block = c;
  for (int i = 0; i <= s; ++i) {
    h.middleRows(i * p, p) = block;
    if (i < s) block = block * a;
  }
  return h;
}

Mat impulse_stack(const Mat& a, const Mat& b, const Mat& c, int s) {
  if (s < 0) throw InvalidInputError("impulse_stack: order must be >= 0");
  const Eigen::Index p = c.rows();
  const Eigen::Index m = b.cols();
  Mat h = Mat::Zero((s + 1) * p, (s + 1) * m);
  // Markov parameters C A^j B reused along the block diagonals.
  std::vector<Mat> markov(s);
  Mat ca = c;
  for (int j = 0; j < s; ++j) {
    markov[j] = ca * b;
    ca = ca * a;
  }
  for (int i = 1; i <= s; ++i) {
    for (int j = 0; j < i; ++j) {
      h.block(i * p, j * m, p, m) = markov[i - 1 - j];
    }
  }
  return h;
}

ParityModel build_parity(const LtiSystem& sys, int s) {
  if (s < 1) throw InvalidInputError("build_parity: window order must be >= 1");
  ParityModel pm;
  pm.s = s;
  pm.n = sys.state_dim();
  pm.m = sys.input_dim();
  pm.p = sys.output_dim();
  pm.q = sys.noise_dim();
  pm.H0 = observability_stack(sys.A, sys.C, s);
  pm.Hu = impulse_stack(sys.A, sys.Bu, sys.C, s);
  pm.Hw = impulse_stack(sys.A, sys.Bw, sys.C, s);
  pm.N = null_space_left(pm.H0);
  if (pm.N.rows() == 0) {
    throw NumericalError("build_parity: empty parity space; increase the window order");
  }
  pm.M = Mat::Identity(pm.nz(), pm.nz());
  return pm;
}

void set_weighting(ParityModel& pm, const Mat& m) {
  require_finite(m, "set_weighting");
  if (m.cols() != pm.nz()) {
    throw InvalidInputError("set_weighting: column count must equal the parity dimension");
  }
  if (m.rows() < 1 || m.rows() > pm.nz()) {
    throw InvalidInputError("set_weighting: row count must lie in [1, nz]");
  }
  if (svd(m).rank != m.rows()) {
    throw InvalidInputError("set_weighting: weighting must have full row rank");
  }
  pm.M = m;
}

Vec residual(const ParityModel& pm, const Mat& ywin, const Mat& uwin) {
  if (ywin.rows() != pm.window() || ywin.cols() != pm.p) {
    throw InvalidInputError("residual: output window must be (s+1) x p");
  }
  if (uwin.rows() != pm.window() || uwin.cols() != pm.m) {
    throw InvalidInputError("residual: input window must be (s+1) x m");
  }
  Vec ys(pm.window() * pm.p);
  for (int i = 0; i < pm.window(); ++i) ys.segment(i * pm.p, pm.p) = ywin.row(i).transpose();
  Vec us(pm.window() * pm.m);
  for (int i = 0; i < pm.window(); ++i) us.segment(i * pm.m, pm.m) = uwin.row(i).transpose();
  return pm.M * (pm.N * (ys - pm.Hu * us));
}

ResidualTrace residual_trace(const ParityModel& pm, const Mat& outputs, const Mat& inputs) {
  if (outputs.cols() != pm.p || inputs.cols() != pm.m) {
    throw InvalidInputError("residual_trace: signal widths do not match the model");
  }
  if (outputs.rows() != inputs.rows()) {
    throw InvalidInputError("residual_trace: output/input lengths differ");
  }
  const int horizon = static_cast<int>(outputs.rows());
  if (horizon < pm.window()) {
    throw InvalidInputError("residual_trace: horizon shorter than the parity window");
  }
  ResidualTrace trace;
  trace.start = pm.s;
  trace.r = Mat(horizon - pm.s, pm.l());
  const Mat z = pm.Z();
  const Mat zhu = z * pm.Hu;
  Vec ys(pm.window() * pm.p);
  Vec us(pm.window() * pm.m);
  for (int k = pm.s; k < horizon; ++k) {
    for (int i = 0; i < pm.window(); ++i) {
      ys.segment(i * pm.p, pm.p) = outputs.row(k - pm.s + i).transpose();
      us.segment(i * pm.m, pm.m) = inputs.row(k - pm.s + i).transpose();
    }
    trace.r.row(k - pm.s) = (z * ys - zhu * us).transpose();
  }
  return trace;
}

std::string parity_to_json(const ParityModel& pm) {
  nlohmann::json j;
  j["s"] = pm.s;
  j["n"] = pm.n;
  j["m"] = pm.m;
  j["p"] = pm.p;
  j["q"] = pm.q;
  j["H0"] = mat_to_json(pm.H0);
  j["Hu"] = mat_to_json(pm.Hu);
  j["Hw"] = mat_to_json(pm.Hw);
  j["N"] = mat_to_json(pm.N);
  j["M"] = mat_to_json(pm.M);
  return j.dump(2);
}

ParityModel parity_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInputError(std::string("parity json: ") + e.what());
  }
  ParityModel pm;
  try {
    pm.s = j.at("s").get<int>();
    pm.n = j.at("n").get<int>();
    pm.m = j.at("m").get<int>();
    pm.p = j.at("p").get<int>();
    pm.q = j.at("q").get<int>();
    pm.H0 = mat_from_json(j.at("H0"));
    pm.Hu = mat_from_json(j.at("Hu"), (pm.s + 1) * pm.m);
    pm.Hw = mat_from_json(j.at("Hw"), (pm.s + 1) * pm.q);
    pm.N = mat_from_json(j.at("N"));
    pm.M = mat_from_json(j.at("M"));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("parity json: ") + e.what());
  }
  if (pm.H0.rows() != (pm.s + 1) * pm.p || pm.N.cols() != pm.H0.rows() ||
      pm.M.cols() != pm.N.rows()) {
    throw InvalidInputError("parity json: inconsistent matrix dimensions");
  }
  return pm;
}

}  // namespace parityspace
