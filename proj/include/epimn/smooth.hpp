#pragma once

// Backward smoothing passes run on a completed filter trace.

#include <vector>

#include "epimn/filter.hpp"

namespace epimn {

struct SmoothTraceX {
  std::int64_t n = 0;
  std::vector<ProbVector> pi_smooth;  // index s = 0..t
  std::vector<Mat> backward;          // L_s, index s = 0..t-1; rows of unreachable states are zero

  int horizon() const { return int(pi_smooth.size()) - 1; }
};

struct SmoothTraceZ {
  std::int64_t n = 0;
  std::vector<JointMatrix> p_smooth;  // index s-1 for s = 1..t
  std::vector<ProbVector> pi_smooth;  // index s-1; pi_{s|t}
  std::vector<Mat> backward;          // Lbar_s, index s-1 for s = 1..t-1

  int horizon() const { return int(p_smooth.size()); }
  const JointMatrix& at(int s) const { return p_smooth.at(std::size_t(s - 1)); }
};

/// L_s^{(i,j)} = pi_{s|s}^{(j)} k^{(j,i)} / (pi_{s|s}^T K)^{(i)}.
Mat backward_kernel_x(const ProbVector& pi_filt, const StochMatrix& k_next);
/// Lbar_s^{(i,j)} = p_{s|s}^{(j,i)} / pi_{s|s}^{(i)}, pi_{s|s} the column marginal.
Mat backward_kernel_z(const JointMatrix& p_filt);

/// pi^T L, throwing ZeroDenominator if mass lands on an all-zero row of L.
ProbVector propagate_backward(const ProbVector& pi_next, const Mat& backward);

SmoothTraceX smooth_x(const FilterTraceX& trace, const ModelSpec& spec);
SmoothTraceZ smooth_z(const FilterTraceZ& trace);

/// Joint approximation for Z_s given y_{1:t}: (1 (x) pi_{s|t}) o L_{s-1}^T, s >= 1.
JointMatrix smoothed_joint_x(const SmoothTraceX& trace, int s);

/// n * P_{s|t}: expected transition counts under the smoothing approximation.
Mat smoothed_transition_mean(const SmoothTraceZ& trace, int s);

}  // namespace epimn
