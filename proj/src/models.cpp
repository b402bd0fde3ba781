#include "epimn/models.hpp"

#include <cmath>

namespace epimn {

void ModelSpec::validate() const {
  if (m < 2) throw Error(ErrorCode::Config, "model needs at least two compartments");
  if (n < 1) throw Error(ErrorCode::Config, "population size must be positive");
  if (pi0.size() != m) throw Error(ErrorCode::ShapeMismatch, "pi0 length differs from compartment count");
  if (!kernel.eval) throw Error(ErrorCode::Config, "model has no kernel");
  theta.validate();
}

ModelSpec make_model(KernelSpec kernel, std::int64_t n, ProbVector pi0, ParamRecord theta) {
  ModelSpec spec;
  spec.m = int(pi0.size());
  spec.n = n;
  spec.pi0 = std::move(pi0);
  spec.kernel = std::move(kernel);
  spec.theta = std::move(theta);
  spec.validate();
  return spec;
}

double param_at(const ParamRecord& theta, const std::string& name, int t) {
  if (const auto* s = theta.schedule(name); s != nullptr && !s->empty()) {
    const auto idx = std::min<std::size_t>(std::size_t(std::max(t, 1) - 1), s->size() - 1);
    return (*s)[idx];
  }
  return theta.get(name);
}

namespace {

double nonneg(const ParamRecord& theta, const char* name) {
  const double v = theta.get(name);
  check_constraint(name, v, Constraint::NonNegative);
  return v;
}

double step_size(const ParamRecord& theta) {
  const double h = theta.get_or("h", 1.0);
  check_constraint("h", h, Constraint::Positive);
  return h;
}

Mat seir_matrix(double beta, double rho, double gamma, double h, double infective_share) {
  Mat k = Mat::Zero(4, 4);
  const double stay_s = std::exp(-h * beta * infective_share);
  const double stay_e = std::exp(-h * rho);
  const double stay_i = std::exp(-h * gamma);
  k(0, 0) = stay_s;
  k(0, 1) = 1.0 - stay_s;
  k(1, 1) = stay_e;
  k(1, 2) = 1.0 - stay_e;
  k(2, 2) = stay_i;
  k(2, 3) = 1.0 - stay_i;
  k(3, 3) = 1.0;
  return k;
}

void require_size(const ProbVector& eta, int m, const char* family) {
  if (eta.size() != m) {
    throw Error(ErrorCode::ShapeMismatch, std::string(family) + " kernel expects " + std::to_string(m) +
                                              " compartments");
  }
}

}  // namespace

StochMatrix seir_kernel(int /*t*/, const ProbVector& eta, const ParamRecord& theta) {
  require_size(eta, 4, "seir");
  return StochMatrix(seir_matrix(nonneg(theta, "beta"), nonneg(theta, "rho"), nonneg(theta, "gamma"),
                                 step_size(theta), eta[2]));
}

double ebola_beta_t(int t, double beta, double lambda, double t_star) {
  if (double(t) < t_star) return beta;
  return beta * std::exp(-lambda * (double(t) - t_star));
}

StochMatrix ebola_kernel(int t, const ProbVector& eta, const ParamRecord& theta) {
  require_size(eta, 4, "ebola");
  const double beta_t =
      ebola_beta_t(t, nonneg(theta, "beta"), nonneg(theta, "lambda"), nonneg(theta, "t_star"));
  return StochMatrix(
      seir_matrix(beta_t, nonneg(theta, "rho"), nonneg(theta, "gamma"), step_size(theta), eta[2]));
}

StochMatrix covid_kernel(int t, const ProbVector& eta, const ParamRecord& theta) {
  using namespace covid;
  require_size(eta, kCompartments, "covid");
  const double beta = param_at(theta, "beta", t);
  const double f = param_at(theta, "f", t);
  check_constraint("beta", beta, Constraint::NonNegative);
  check_constraint("f", f, Constraint::UnitInterval);
  const double h = step_size(theta);
  const double p_inf = 1.0 - std::exp(-h * beta * (eta[I1W] + eta[I2W]));
  const double p_c = 1.0 - std::exp(-h * 2.0 * nonneg(theta, "rho"));
  const double p_r = 1.0 - std::exp(-h * 2.0 * nonneg(theta, "gamma"));

  Mat k = Mat::Zero(kCompartments, kCompartments);
  k(S, S) = 1.0 - p_inf;
  k(S, E1W) = (1.0 - f) * p_inf;
  k(S, E1T) = f * p_inf;
  auto advance = [&k](int from, int to, double p) {
    k(from, from) = 1.0 - p;
    k(from, to) = p;
  };
  advance(E1W, E2W, p_c);
  advance(E2W, I1W, p_c);
  advance(I1W, I2W, p_r);
  advance(I2W, R, p_r);
  advance(E1T, E2T, p_c);
  advance(E2T, I1T, p_c);
  advance(I1T, I2T, p_r);
  advance(I2T, R, p_r);
  k(R, R) = 1.0;
  return StochMatrix(std::move(k));
}

KernelSpec kernel_family(const std::string& family) {
  if (family == "seir") return {family, seir_kernel};
  if (family == "ebola") return {family, ebola_kernel};
  if (family == "covid") return {family, covid_kernel};
  throw Error(ErrorCode::UnknownFamily, "unknown model family '" + family + "'");
}

int family_compartments(const std::string& family) {
  if (family == "seir" || family == "ebola") return 4;
  if (family == "covid") return covid::kCompartments;
  throw Error(ErrorCode::UnknownFamily, "unknown model family '" + family + "'");
}

std::vector<std::string> family_compartment_names(const std::string& family) {
  if (family == "seir" || family == "ebola") return {"S", "E", "I", "R"};
  if (family == "covid") return {"S", "E1W", "E2W", "I1W", "I2W", "E1T", "E2T", "I1T", "I2T", "R"};
  throw Error(ErrorCode::UnknownFamily, "unknown model family '" + family + "'");
}

std::vector<std::string> known_families() { return {"seir", "ebola", "covid"}; }

void declare_family_constraints(const std::string& family, ParamRecord& theta) {
  theta.declare("h", Constraint::Positive);
  theta.declare("rho", Constraint::NonNegative);
  theta.declare("gamma", Constraint::NonNegative);
  theta.declare("beta", Constraint::NonNegative);
  if (family == "ebola") {
    theta.declare("lambda", Constraint::NonNegative);
    theta.declare("t_star", Constraint::NonNegative);
  }
  if (family == "covid") {
    theta.declare("f", Constraint::UnitInterval);
    theta.declare("sigma_V", Constraint::NonNegative);
    theta.declare("kappa", Constraint::NonNegative);
    theta.declare("q_W", Constraint::UnitInterval);
    theta.declare("q_T", Constraint::UnitInterval);
  }
  theta.declare("q23", Constraint::UnitInterval);
  theta.declare("q34", Constraint::UnitInterval);
}

}  // namespace epimn
