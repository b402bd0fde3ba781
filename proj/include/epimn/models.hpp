#pragma once

#include <functional>
#include <string>
#include <vector>

#include "epimn/core.hpp"

namespace epimn {

/// Maps (t, eta, theta) to the per-individual transition matrix K_{t,eta}.
using KernelFn = std::function<StochMatrix(int t, const ProbVector& eta, const ParamRecord& theta)>;

struct KernelSpec {
  std::string family;  // seir | ebola | covid | custom
  KernelFn eval;

  StochMatrix operator()(int t, const ProbVector& eta, const ParamRecord& theta) const {
    return eval(t, eta, theta);
  }
};

struct ModelSpec {
  int m = 0;
  std::int64_t n = 0;
  ProbVector pi0;
  KernelSpec kernel;
  ParamRecord theta;

  StochMatrix kernel_at(int t, const ProbVector& eta) const { return kernel(t, eta, theta); }
  /// Throws on m < 2, n < 1, or a pi0 of the wrong length.
  void validate() const;
};

ModelSpec make_model(KernelSpec kernel, std::int64_t n, ProbVector pi0, ParamRecord theta);

// Four-compartment S, E, I, R.
StochMatrix seir_kernel(int t, const ProbVector& eta, const ParamRecord& theta);
// SEIR with beta_t = beta for t < t_star, beta * exp(-lambda (t - t_star)) afterwards.
StochMatrix ebola_kernel(int t, const ProbVector& eta, const ParamRecord& theta);
// Two-branch (Wuhan / travellers) staged model, 10 compartments; see covid index constants.
StochMatrix covid_kernel(int t, const ProbVector& eta, const ParamRecord& theta);

double ebola_beta_t(int t, double beta, double lambda, double t_star);

namespace covid {
inline constexpr int S = 0, E1W = 1, E2W = 2, I1W = 3, I2W = 4;
inline constexpr int E1T = 5, E2T = 6, I1T = 7, I2T = 8, R = 9;
inline constexpr int kCompartments = 10;
}  // namespace covid

/// Scalar parameter `name`, or its schedule entry for time t (t >= 1, clamped
/// to the last entry) when a schedule of that name is present.
double param_at(const ParamRecord& theta, const std::string& name, int t);

/// seir, ebola, covid. Throws UnknownFamily otherwise.
KernelSpec kernel_family(const std::string& family);
int family_compartments(const std::string& family);
std::vector<std::string> family_compartment_names(const std::string& family);
std::vector<std::string> known_families();

/// Declares the positivity / interval constraints of the named family's parameters.
void declare_family_constraints(const std::string& family, ParamRecord& theta);

}  // namespace epimn
