#include "epimn/smooth.hpp"

namespace epimn {

Mat backward_kernel_x(const ProbVector& pi_filt, const StochMatrix& k_next) {
  const Eigen::Index m = pi_filt.size();
  const Vec pred = k_next.values().transpose() * pi_filt.values();
  Mat l = Mat::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (pred[i] <= 0.0) continue;
    for (Eigen::Index j = 0; j < m; ++j) l(i, j) = pi_filt[j] * k_next(j, i) / pred[i];
  }
  return l;
}

Mat backward_kernel_z(const JointMatrix& p_filt) {
  const Eigen::Index m = p_filt.size();
  const Vec pi = p_filt.values().colwise().sum().transpose();
  Mat l = Mat::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (pi[i] <= 0.0) continue;
    for (Eigen::Index j = 0; j < m; ++j) l(i, j) = p_filt(j, i) / pi[i];
  }
  return l;
}

namespace {

void check_reachable(const Vec& mass, const Mat& backward) {
  for (Eigen::Index i = 0; i < mass.size(); ++i) {
    if (mass[i] > 0.0 && backward.row(i).sum() == 0.0) {
      throw Error(ErrorCode::ZeroDenominator,
                  "smoothing mass on compartment " + std::to_string(i + 1) + " with zero filtering mass");
    }
  }
}

}  // namespace

ProbVector propagate_backward(const ProbVector& pi_next, const Mat& backward) {
  check_reachable(pi_next.values(), backward);
  return ProbVector(Vec(backward.transpose() * pi_next.values()));
}

SmoothTraceX smooth_x(const FilterTraceX& trace, const ModelSpec& spec) {
  const int t = trace.horizon();
  SmoothTraceX out;
  out.n = trace.n;
  out.pi_smooth.resize(std::size_t(t) + 1);
  out.backward.resize(std::size_t(t));
  out.pi_smooth[std::size_t(t)] = trace.filtered(t);
  for (int s = t - 1; s >= 0; --s) {
    const ProbVector& pi_ss = trace.filtered(s);
    Mat l = backward_kernel_x(pi_ss, spec.kernel_at(s + 1, pi_ss));
    out.pi_smooth[std::size_t(s)] = propagate_backward(out.pi_smooth[std::size_t(s) + 1], l);
    out.backward[std::size_t(s)] = std::move(l);
  }
  return out;
}

SmoothTraceZ smooth_z(const FilterTraceZ& trace) {
  const int t = trace.horizon();
  SmoothTraceZ out;
  out.n = trace.n;
  if (t == 0) return out;
  out.p_smooth.resize(std::size_t(t));
  out.pi_smooth.resize(std::size_t(t));
  out.backward.resize(std::size_t(t - 1));
  out.p_smooth[std::size_t(t - 1)] = trace.steps.back().p_filt;
  out.pi_smooth[std::size_t(t - 1)] = trace.steps.back().pi_filt;
  for (int s = t - 1; s >= 1; --s) {
    const JointMatrix& p_ss = trace.steps[std::size_t(s - 1)].p_filt;
    const ProbVector pi_st = out.p_smooth[std::size_t(s)].row_marginal();
    Mat l = backward_kernel_z(p_ss);
    check_reachable(pi_st.values(), l);
    // (1 (x) pi_{s|t}) o Lbar^T: entry (i, j) = pi_{s|t}^{(j)} Lbar^{(j,i)}.
    Mat p = l.transpose() * pi_st.values().asDiagonal();
    out.p_smooth[std::size_t(s - 1)] = JointMatrix(std::move(p));
    out.pi_smooth[std::size_t(s - 1)] = pi_st;
    out.backward[std::size_t(s - 1)] = std::move(l);
  }
  return out;
}

JointMatrix smoothed_joint_x(const SmoothTraceX& trace, int s) {
  if (s < 1 || s > trace.horizon()) throw Error(ErrorCode::Config, "smoothed joint requested outside 1..t");
  const Mat& l = trace.backward[std::size_t(s - 1)];
  return JointMatrix(Mat(l.transpose() * trace.pi_smooth[std::size_t(s)].values().asDiagonal()));
}

Mat smoothed_transition_mean(const SmoothTraceZ& trace, int s) { return double(trace.n) * trace.at(s).values(); }

}  // namespace epimn
