#pragma once

#include "parityspace/plant.hpp"
#include "parityspace/types.hpp"

#include <string>

namespace parityspace {

/// Stacked observability matrix [C; CA; ...; CA^s]  ((s+1)p x n).
Mat observability_stack(const Mat& a, const Mat& c, int s);

/// Block lower-triangular input-propagation matrix of window order s:
/// zero first block row, block (i, j) = C A^(i-1-j) B for j < i.
/// Size (s+1)p x (s+1)cols(B).
Mat impulse_stack(const Mat& a, const Mat& b, const Mat& c, int s);

/// Parity relation of window order s for a plant:
///   Y_s(k) = H0 x(k-s) + Hu U_s(k) + Hw W_s(k) + V_s(k)
/// with windows stacked oldest entry first. The residual projects out the
/// unknown initial state with Z = M N where N spans the left null space of
/// H0 and M is a designable weighting (identity until set_weighting).
struct ParityModel {
  int s = 0;
  int n = 0;   ///< plant state dimension
  int m = 0;   ///< input dimension
  int p = 0;   ///< output dimension
  int q = 0;   ///< process-noise dimension
  Mat H0;      ///< (s+1)p x n
  Mat Hu;      ///< (s+1)p x (s+1)m
  Mat Hw;      ///< (s+1)p x (s+1)q
  Mat N;       ///< n_z x (s+1)p, orthonormal rows, N H0 = 0
  Mat M;       ///< l x n_z weighting

  int window() const { return s + 1; }
  int nz() const { return static_cast<int>(N.rows()); }
  int l() const { return static_cast<int>(M.rows()); }
  Mat Z() const { return M * N; }
};

/// Builds the parity model with the identity weighting. Throws
/// NumericalError when the left null space of H0 is empty (s too small).
ParityModel build_parity(const LtiSystem& sys, int s);

/// Replaces the weighting; M must have full row rank and at most nz rows.
void set_weighting(ParityModel& pm, const Mat& m);

/// Residual for one window: r = Z (vec(Y) - Hu vec(U)). Windows are passed
/// as (s+1)-row matrices, row i = measurement at step k-s+i.
Vec residual(const ParityModel& pm, const Mat& ywin, const Mat& uwin);

/// Residual sequence over a signal pair laid out as step-per-row matrices
/// (horizon x p outputs, horizon x m inputs). Row t of the result is the
/// residual at step k = start + t; start = s.
struct ResidualTrace {
  int start = 0;
  Mat r;  ///< (horizon - s) x l

  int step_of_row(int row) const { return start + row; }
  int row_of_step(int k) const { return k - start; }
};

ResidualTrace residual_trace(const ParityModel& pm, const Mat& outputs, const Mat& inputs);

/// JSON round trip for a parity model (matrices as nested arrays).
std::string parity_to_json(const ParityModel& pm);
ParityModel parity_from_json(const std::string& text);

}  // namespace parityspace
