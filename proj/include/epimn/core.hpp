#pragma once

// Foundational value types shared by every module: probability vectors,
// row-stochastic kernels, joint (matrix-valued) probability tables, count
// vectors/matrices and the named parameter record.

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace epimn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using IVec = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;
using IMat = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Absolute tolerance used for every simplex / stochasticity check.
inline constexpr double kSimplexTol = 1e-10;

enum class ErrorCode {
  NegativeElement,
  SumOutOfTolerance,
  ShapeMismatch,
  CountExceedsPopulation,
  ObservationExceedsPopulation,
  DegenerateUpdate,
  ZeroDenominator,
  ZeroExpectedCount,
  AllWeightsZero,
  TooLarge,
  HorizonCapReached,
  InvalidParameter,
  MissingParameter,
  UnknownFamily,
  Config,
  Data,
  IO,
};

const char* to_string(ErrorCode code);

/// Coarse grouping used by the CLI for exit codes.
enum class ErrorCategory { Config, Data, Numerical };
ErrorCategory category(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// y * log(x) with the convention 0 log 0 = 0 (and 0 log x = 0 for any x).
double xlogy(double y, double x);

/// log(k!) via log-gamma; k >= 0.
double log_factorial(std::int64_t k);

class ProbVector {
 public:
  ProbVector() = default;
  /// Validates and renormalizes; throws NegativeElement / SumOutOfTolerance.
  explicit ProbVector(Vec values);
  ProbVector(std::initializer_list<double> values);

  const Vec& values() const noexcept { return v_; }
  Eigen::Index size() const noexcept { return v_.size(); }
  double operator[](Eigen::Index i) const { return v_[i]; }
  double operator()(Eigen::Index i) const { return v_[i]; }

  /// Point mass at compartment i.
  static ProbVector vertex(Eigen::Index m, Eigen::Index i);

 private:
  Vec v_;
};

ProbVector validate_prob_vector(std::span<const double> values);

class StochMatrix {
 public:
  StochMatrix() = default;
  explicit StochMatrix(Mat values);

  const Mat& values() const noexcept { return k_; }
  Eigen::Index size() const noexcept { return k_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return k_(i, j); }

  static StochMatrix identity(Eigen::Index m);

 private:
  Mat k_;
};

/// Nonnegative m x m table whose entries sum to 1.
class JointMatrix {
 public:
  JointMatrix() = default;
  explicit JointMatrix(Mat values);

  const Mat& values() const noexcept { return p_; }
  Eigen::Index size() const noexcept { return p_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return p_(i, j); }
  double total() const { return p_.sum(); }

  /// (1^T P)^T
  ProbVector column_marginal() const;
  /// P 1
  ProbVector row_marginal() const;

 private:
  Mat p_;
};

class CountVector {
 public:
  CountVector() = default;
  explicit CountVector(IVec values);
  CountVector(std::initializer_list<std::int64_t> values);
  static CountVector zeros(Eigen::Index m) { return CountVector(IVec::Zero(m)); }

  const IVec& values() const noexcept { return x_; }
  Eigen::Index size() const noexcept { return x_.size(); }
  std::int64_t operator[](Eigen::Index i) const { return x_[i]; }
  std::int64_t total() const { return x_.sum(); }

 private:
  IVec x_;
};

class CountMatrix {
 public:
  CountMatrix() = default;
  explicit CountMatrix(IMat values);
  static CountMatrix zeros(Eigen::Index m) { return CountMatrix(IMat::Zero(m, m)); }

  const IMat& values() const noexcept { return z_; }
  Eigen::Index size() const noexcept { return z_.rows(); }
  std::int64_t operator()(Eigen::Index i, Eigen::Index j) const { return z_(i, j); }
  std::int64_t total() const { return z_.sum(); }
  CountVector row_sums() const { return CountVector(z_.rowwise().sum()); }
  CountVector col_sums() const { return CountVector(z_.colwise().sum().transpose()); }

 private:
  IMat z_;
};

/// log( n! / (prod_i c_i! * (n - sum c)!) ).
double log_multinomial_coeff(std::int64_t n, const CountVector& counts);

/// Log pmf of Mult(n, p) at x (x must sum to n).
double log_multinomial_pmf(const CountVector& x, const Vec& p);
/// Log pmf of Mult(n, P) over matrices.
double log_multinomial_pmf(const CountMatrix& z, const Mat& p);

enum class Constraint { Real, NonNegative, Positive, UnitInterval };

/// Named scalar parameters with declared constraints, plus named per-time
/// schedules (e.g. the departure fraction f_t of the two-branch model).
class ParamRecord {
 public:
  ParamRecord() = default;
  ParamRecord(std::initializer_list<std::pair<const std::string, double>> values);

  double get(const std::string& name) const;
  double get_or(const std::string& name, double fallback) const;
  bool has(const std::string& name) const { return scalars_.count(name) != 0; }
  void set(const std::string& name, double value);

  const std::vector<double>* schedule(const std::string& name) const;
  void set_schedule(const std::string& name, std::vector<double> values);

  void declare(const std::string& name, Constraint c);
  /// Throws InvalidParameter for any declared constraint violation.
  void validate() const;

  const std::map<std::string, double>& scalars() const noexcept { return scalars_; }
  const std::map<std::string, std::vector<double>>& schedules() const noexcept {
    return schedules_;
  }

 private:
  std::map<std::string, double> scalars_;
  std::map<std::string, std::vector<double>> schedules_;
  std::map<std::string, Constraint> constraints_;
};

void check_constraint(const std::string& name, double value, Constraint c);

}  // namespace epimn
