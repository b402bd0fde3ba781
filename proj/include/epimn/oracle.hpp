#pragma once

// Exact brute-force inference over the enumerated state space, for tiny
// (m, n). Used to check the multinomial recursions and to measure their
// approximation error.

#include <map>
#include <vector>

#include "epimn/filter.hpp"

namespace epimn::oracle {

inline constexpr std::int64_t kMaxStates = 1000000;

/// C(n + m - 1, m - 1) as a double (exact for the sizes we can enumerate).
double state_count(int m, std::int64_t n);

/// All compositions of `total` into `parts` nonnegative parts, lexicographic.
std::vector<IVec> compositions(int parts, std::int64_t total);

/// S_{m,n} with a reverse index.
class StateEnumeration {
 public:
  StateEnumeration(int m, std::int64_t n);

  int m() const { return m_; }
  std::int64_t n() const { return n_; }
  std::size_t size() const { return states_.size(); }
  const CountVector& operator[](std::size_t k) const { return states_[k]; }
  const std::vector<CountVector>& states() const { return states_; }
  std::size_t index_of(const CountVector& x) const;

 private:
  int m_;
  std::int64_t n_;
  std::vector<CountVector> states_;
  std::map<std::vector<std::int64_t>, std::size_t> index_;
};

StateEnumeration enumerate_states(int m, std::int64_t n);

/// Every m x m count matrix with the given row sums.
std::vector<CountMatrix> matrices_with_row_sums(const CountVector& row_sums);
/// Every m x m count matrix with entries summing to n.
std::vector<CountMatrix> matrices_with_total(int m, std::int64_t n);

/// log prod_i Mult(x_prev^(i), K^(i,.))(Z^(i,.)); -inf if row sums differ from x_prev.
double log_transition_matrix_pmf(const CountVector& x_prev, const StochMatrix& k, const CountMatrix& z);

/// pmf over S_{m,n} of the column sums of Z whose rows are Mult(x_prev^(i), K^(i,.)).
Vec exact_transition_pmf(const CountVector& x_prev, const StochMatrix& k, const StateEnumeration& states);

/// pmf of Mult(n, pi) over the enumeration.
Vec multinomial_pmf(const ProbVector& pi, const StateEnumeration& states);
/// Mean of eta(x) = x / n under a pmf.
Vec mean_proportions(const Vec& pmf, const StateEnumeration& states);

enum class EtaMode {
  /// K uses eta(x_{t-1}) inside the sum: the true model.
  Exact,
  /// K uses E[eta(x_{t-1})] under the current posterior.
  MeanField,
};

struct ExactFilterResult {
  StateEnumeration states;
  std::vector<Vec> predicted;   // p(x_t | y_{1:t-1}), t = 1..T (index t-1)
  std::vector<Vec> posterior;   // p(x_t | y_{1:t}), t = 0..T
  std::vector<double> log_w;    // log p(y_t | y_{1:t-1})
  double loglik = 0.0;
  std::vector<Vec> mean_x;      // E[x_t | y_{1:t}], t = 0..T
  std::vector<Mat> mean_z;      // E[Z_t | Y_{1:t}], z-form only, t = 1..T
};

/// Exact forward recursion. `initial` defaults to Mult(n, pi0).
ExactFilterResult exact_filter_x(const ModelSpec& spec, const ObservationsX& obs, EtaMode mode,
                                 const Vec* initial = nullptr);
ExactFilterResult exact_filter_z(const ModelSpec& spec, const ObservationsZ& obs, EtaMode mode,
                                 const Vec* initial = nullptr);

/// Exact distribution of a count matrix, keyed by its row-major entries.
using MatrixPmf = std::map<std::vector<std::int64_t>, double>;
std::vector<std::int64_t> flatten(const CountMatrix& z);

/// sum_x p(x) prod_i Mult(x^(i), K^(i,.)) for a fixed K.
MatrixPmf mixture_transition_pmf(const Vec& pmf_prev, const StateEnumeration& states, const StochMatrix& k);

/// Backward recursion of the smoothing lemmas, evaluated by enumeration:
/// starting from Mult(n, pi_{t|t}), mu_{s|t}(x_s) = sum_{x_{s+1}} mu_{s+1|t}(x_{s+1})
/// mu_{s|s}(x_s) M_{s+1}(x_s, pi_{s|s}, x_{s+1}) / normalizer. Returns pmfs for s = 0..t.
std::vector<Vec> smoothing_recursion_x(const FilterTraceX& trace, const ModelSpec& spec,
                                       const StateEnumeration& states);

/// Same for transition counts, anchored at Mult(n, P_{t|t}): pmfs over
/// matrices for s = 1..t (index s-1). The kernel cancels from the ratio, so
/// only the filtered tables are needed.
std::vector<MatrixPmf> smoothing_recursion_z(const FilterTraceZ& trace);

/// log Bin(trials, p)(k), -inf outside 0..trials.
double log_binomial_pmf(std::int64_t k, std::int64_t trials, double p);

}  // namespace epimn::oracle
