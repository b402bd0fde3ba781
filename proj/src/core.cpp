#include "epimn/core.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace epimn {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeElement: return "NegativeElement";
    case ErrorCode::SumOutOfTolerance: return "SumOutOfTolerance";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::CountExceedsPopulation: return "CountExceedsPopulation";
    case ErrorCode::ObservationExceedsPopulation: return "ObservationExceedsPopulation";
    case ErrorCode::DegenerateUpdate: return "DegenerateUpdate";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::ZeroExpectedCount: return "ZeroExpectedCount";
    case ErrorCode::AllWeightsZero: return "AllWeightsZero";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::HorizonCapReached: return "HorizonCapReached";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::MissingParameter: return "MissingParameter";
    case ErrorCode::UnknownFamily: return "UnknownFamily";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Data: return "Data";
    case ErrorCode::IO: return "IO";
  }
  return "Unknown";
}

ErrorCategory category(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParameter:
    case ErrorCode::MissingParameter:
    case ErrorCode::UnknownFamily:
    case ErrorCode::Config:
    case ErrorCode::IO:
      return ErrorCategory::Config;
    case ErrorCode::ShapeMismatch:
    case ErrorCode::CountExceedsPopulation:
    case ErrorCode::ObservationExceedsPopulation:
    case ErrorCode::Data:
      return ErrorCategory::Data;
    default:
      return ErrorCategory::Numerical;
  }
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

double xlogy(double y, double x) {
  if (y == 0.0) return 0.0;
  return y * std::log(x);
}

namespace {

double lgamma_threadsafe(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

constexpr std::int64_t kLogFactTable = 4096;

const std::array<double, kLogFactTable>& log_fact_table() {
  static const auto table = [] {
    std::array<double, kLogFactTable> t{};
    for (std::int64_t k = 0; k < kLogFactTable; ++k) t[k] = lgamma_threadsafe(double(k) + 1.0);
    return t;
  }();
  return table;
}

}  // namespace

double log_factorial(std::int64_t k) {
  if (k < 0) throw Error(ErrorCode::InvalidParameter, "log_factorial of a negative count");
  if (k < kLogFactTable) return log_fact_table()[static_cast<std::size_t>(k)];
  return lgamma_threadsafe(double(k) + 1.0);
}

namespace {

// Clamps tiny negatives and renormalizes a block that should sum to 1.
void normalize_simplex(Eigen::Ref<Vec> v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw Error(ErrorCode::SumOutOfTolerance, std::string(what) + " has a non-finite element");
    }
    if (v[i] < 0.0) {
      if (v[i] < -kSimplexTol) {
        std::ostringstream os;
        os << what << " element " << i << " = " << v[i] << " is negative";
        throw Error(ErrorCode::NegativeElement, os.str());
      }
      v[i] = 0.0;
    }
  }
  const double s = v.sum();
  if (std::abs(s - 1.0) > kSimplexTol) {
    std::ostringstream os;
    os << what << " sums to " << s;
    throw Error(ErrorCode::SumOutOfTolerance, os.str());
  }
  v /= s;
}

}  // namespace

ProbVector::ProbVector(Vec values) : v_(std::move(values)) {
  normalize_simplex(v_, "probability vector");
}

ProbVector::ProbVector(std::initializer_list<double> values)
    : ProbVector(Vec(Eigen::Map<const Vec>(values.begin(), Eigen::Index(values.size())))) {}

ProbVector ProbVector::vertex(Eigen::Index m, Eigen::Index i) {
  Vec v = Vec::Zero(m);
  v[i] = 1.0;
  return ProbVector(std::move(v));
}

ProbVector validate_prob_vector(std::span<const double> values) {
  return ProbVector(Vec(Eigen::Map<const Vec>(values.data(), Eigen::Index(values.size()))));
}

StochMatrix::StochMatrix(Mat values) : k_(std::move(values)) {
  if (k_.rows() != k_.cols()) throw Error(ErrorCode::ShapeMismatch, "kernel must be square");
  for (Eigen::Index i = 0; i < k_.rows(); ++i) {
    Vec row = k_.row(i).transpose();
    normalize_simplex(row, "kernel row");
    k_.row(i) = row.transpose();
  }
}

StochMatrix StochMatrix::identity(Eigen::Index m) { return StochMatrix(Mat::Identity(m, m)); }

JointMatrix::JointMatrix(Mat values) : p_(std::move(values)) {
  if (p_.rows() != p_.cols()) throw Error(ErrorCode::ShapeMismatch, "joint matrix must be square");
  Eigen::Map<Vec> flat(p_.data(), p_.size());
  normalize_simplex(flat, "joint matrix");
}

ProbVector JointMatrix::column_marginal() const { return ProbVector(Vec(p_.colwise().sum().transpose())); }
ProbVector JointMatrix::row_marginal() const { return ProbVector(Vec(p_.rowwise().sum())); }

CountVector::CountVector(IVec values) : x_(std::move(values)) {
  for (Eigen::Index i = 0; i < x_.size(); ++i) {
    if (x_[i] < 0) throw Error(ErrorCode::NegativeElement, "negative count");
  }
}

CountVector::CountVector(std::initializer_list<std::int64_t> values)
    : CountVector(IVec(Eigen::Map<const IVec>(values.begin(), Eigen::Index(values.size())))) {}

CountMatrix::CountMatrix(IMat values) : z_(std::move(values)) {
  if (z_.rows() != z_.cols()) throw Error(ErrorCode::ShapeMismatch, "count matrix must be square");
  if ((z_.array() < 0).any()) throw Error(ErrorCode::NegativeElement, "negative count");
}

double log_multinomial_coeff(std::int64_t n, const CountVector& counts) {
  const std::int64_t s = counts.total();
  if (s > n) throw Error(ErrorCode::CountExceedsPopulation, "counts exceed population");
  double r = log_factorial(n) - log_factorial(n - s);
  for (Eigen::Index i = 0; i < counts.size(); ++i) r -= log_factorial(counts[i]);
  return r;
}

double log_multinomial_pmf(const CountVector& x, const Vec& p) {
  const std::int64_t n = x.total();
  double r = log_factorial(n);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    r += xlogy(double(x[i]), p[i]) - log_factorial(x[i]);
  }
  return r;
}

double log_multinomial_pmf(const CountMatrix& z, const Mat& p) {
  const std::int64_t n = z.total();
  double r = log_factorial(n);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      r += xlogy(double(z(i, j)), p(i, j)) - log_factorial(z(i, j));
    }
  }
  return r;
}

ParamRecord::ParamRecord(std::initializer_list<std::pair<const std::string, double>> values)
    : scalars_(values) {}

double ParamRecord::get(const std::string& name) const {
  auto it = scalars_.find(name);
  if (it == scalars_.end()) throw Error(ErrorCode::MissingParameter, "parameter '" + name + "' not set");
  return it->second;
}

double ParamRecord::get_or(const std::string& name, double fallback) const {
  auto it = scalars_.find(name);
  return it == scalars_.end() ? fallback : it->second;
}

void ParamRecord::set(const std::string& name, double value) { scalars_[name] = value; }

const std::vector<double>* ParamRecord::schedule(const std::string& name) const {
  auto it = schedules_.find(name);
  return it == schedules_.end() ? nullptr : &it->second;
}

void ParamRecord::set_schedule(const std::string& name, std::vector<double> values) {
  schedules_[name] = std::move(values);
}

void ParamRecord::declare(const std::string& name, Constraint c) { constraints_[name] = c; }

void check_constraint(const std::string& name, double value, Constraint c) {
  bool ok = std::isfinite(value);
  switch (c) {
    case Constraint::Real: break;
    case Constraint::NonNegative: ok = ok && value >= 0.0; break;
    case Constraint::Positive: ok = ok && value > 0.0; break;
    case Constraint::UnitInterval: ok = ok && value >= 0.0 && value <= 1.0; break;
  }
  if (!ok) {
    std::ostringstream os;
    os << "parameter '" << name << "' = " << value << " violates its constraint";
    throw Error(ErrorCode::InvalidParameter, os.str());
  }
}

void ParamRecord::validate() const {
  for (const auto& [name, c] : constraints_) {
    if (auto it = scalars_.find(name); it != scalars_.end()) check_constraint(name, it->second, c);
    if (auto it = schedules_.find(name); it != schedules_.end()) {
      for (double v : it->second) check_constraint(name, v, c);
    }
  }
}

}  // namespace epimn
