#include <doctest.h>

#include <cmath>

#include "epimn/filter.hpp"
#include "epimn/oracle.hpp"
#include "epimn/simulate.hpp"
#include "epimn/experiments.hpp"
#include "test_util.hpp"

using namespace epimn;
using namespace epimn::testing;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an epimn::Error");
  return ErrorCode::IO;
}

// Independent evaluation of the binomial cdf by summing the pmf.
double binom_cdf(std::int64_t k, std::int64_t n, double p) {
  double s = 0.0;
  for (std::int64_t j = 0; j <= k; ++j) s += std::exp(oracle::log_binomial_pmf(j, n, p));
  return s;
}

}  // namespace

TEST_CASE("predict x") {
  const ProbVector pi{0.3, 0.7};
  CHECK(predict_x(pi, StochMatrix::identity(2)).values() == pi.values());
  Mat k(2, 2);
  k << 0.9, 0.1, 0.0, 1.0;
  const ProbVector out = predict_x(ProbVector{1.0, 0.0}, StochMatrix(k));
  CHECK(out[0] == doctest::Approx(0.9));
  CHECK(out[1] == doctest::Approx(0.1));
}

TEST_CASE("update x worked example") {
  const UpdateResultX r = update_x(ProbVector{0.5, 0.5}, CountVector{1, 0}, Vec((Vec(2) << 0.5, 0.0).finished()), 2);
  CHECK(std::exp(r.log_w) == doctest::Approx(0.375).epsilon(1e-14));
  CHECK(r.pi_filt[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(r.pi_filt[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("update x corner cases") {
  const ProbVector pi{0.2, 0.3, 0.5};
  const UpdateResultX missing = update_x(pi, CountVector::zeros(3), Vec::Zero(3), 40);
  CHECK(missing.log_w == 0.0);
  CHECK(missing.pi_filt.values() == pi.values());

  const CountVector y{10, 5, 25};
  const UpdateResultX full = update_x(pi, y, Vec::Ones(3), 40);
  CHECK(max_abs(full.pi_filt.values(), Vec(y.values().cast<double>() / 40.0)) < 1e-15);
  CHECK(full.log_w == doctest::Approx(log_multinomial_pmf(y, pi.values())).epsilon(1e-13));

  CHECK(code_of([&] { update_x(pi, CountVector{41, 0, 0}, Vec::Ones(3), 40); }) ==
        ErrorCode::ObservationExceedsPopulation);
  CHECK(code_of([&] { update_x(pi, CountVector{10, 5, 20}, Vec::Ones(3), 40); }) == ErrorCode::DegenerateUpdate);
}

TEST_CASE("predict and update z") {
  const ProbVector pi{0.3, 0.7};
  const JointMatrix p = predict_z(pi, StochMatrix::identity(2));
  CHECK(p(0, 0) == doctest::Approx(0.3));
  CHECK(p(1, 1) == doctest::Approx(0.7));
  CHECK(p(0, 1) == 0.0);

  Rng rng(5);
  const StochMatrix k = random_kernel(rng, 3);
  const ProbVector pi3(random_simplex(rng, 3));
  const JointMatrix p3 = predict_z(pi3, k);
  CHECK(max_abs(p3.row_marginal().values(), pi3.values()) < 1e-15);
  CHECK(std::abs(p3.total() - 1.0) < 1e-14);

  const UpdateResultZ missing = update_z(p3, CountMatrix::zeros(3), Mat::Zero(3, 3), 30);
  CHECK(missing.log_w == 0.0);
  CHECK(max_abs(missing.p_filt.values(), p3.values()) == 0.0);

  IMat yz(2, 2);
  yz << 3, 1, 0, 6;
  const UpdateResultZ full = update_z(p, CountMatrix(yz), Mat::Ones(2, 2), 10);
  CHECK(max_abs(full.p_filt.values(), Mat(yz.cast<double>() / 10.0)) < 1e-15);
}

TEST_CASE("one step matches enumeration") {
  Rng rng(21);
  for (int rep = 0; rep < 30; ++rep) {
    const int m = 2 + rep % 2;
    const std::int64_t n = 2 + rep % 5;
    const StochMatrix k = random_kernel(rng, m);
    const ProbVector pi(random_simplex(rng, m));
    const ModelSpec spec = constant_model(k, n, pi);

    const Vec q = Vec::NullaryExpr(m, [&] { return sample_uniform(rng); });
    const LatentTrajectory traj = simulate_latent(spec, 1, rng());
    ObservationsX ox{simulate_obs_x(traj, {q}, rng()), {q}};
    const oracle::ExactFilterResult ex = oracle::exact_filter_x(spec, ox, oracle::EtaMode::MeanField);
    const FilterTraceX fx = filter_x(spec, ox);
    const oracle::StateEnumeration& st = ex.states;
    CHECK(max_abs(ex.predicted[0], oracle::multinomial_pmf(fx.steps[0].pi_pred, st)) < 1e-12);
    CHECK(std::abs(ex.log_w[0] - fx.steps[0].log_w) < 1e-12);
    const Vec shifted = ex.mean_x[1];
    const MarginalSummary ms = filtered_mean_and_ci(fx, 1);
    CHECK(max_abs(shifted, ms.mean) < 1e-12);

    const Mat qz = Mat::NullaryExpr(m, m, [&] { return sample_uniform(rng); });
    ObservationsZ oz{simulate_obs_z(traj, {qz}, rng()), {qz}};
    const oracle::ExactFilterResult ez = oracle::exact_filter_z(spec, oz, oracle::EtaMode::MeanField);
    const FilterTraceZ fz = filter_z(spec, oz);
    CHECK(std::abs(ez.log_w[0] - fz.steps[0].log_w) < 1e-12);
    CHECK(max_abs(ez.mean_z[0], Mat(fz.steps[0].p_filt.values() * double(n))) < 1e-12);
    CHECK(max_abs(ez.mean_x[1], Vec(fz.steps[0].pi_filt.values() * double(n))) < 1e-12);
  }
}

TEST_CASE("filter with all data missing is the prediction chain") {
  const ModelSpec spec = make_model(kernel_family("seir"), 1000, ProbVector{0.95, 0.0, 0.05, 0.0},
                                    {{"beta", 0.6}, {"rho", 0.3}, {"gamma", 0.2}, {"h", 1.0}});
  const int horizon = 200;
  const FilterTraceX fx = filter_x(spec, ObservationsX::missing(4, horizon));
  const FilterTraceZ fz = filter_z(spec, ObservationsZ::missing(4, horizon));
  CHECK(fx.loglik == 0.0);
  CHECK(fz.loglik == 0.0);
  ProbVector pi = spec.pi0;
  for (int t = 1; t <= horizon; ++t) {
    pi = predict_x(pi, spec.kernel, t, spec.theta);
    CHECK(fx.filtered(t).values() == pi.values());
    CHECK(max_abs(fz.filtered(t).values(), pi.values()) < 1e-14);
    CHECK(fx.steps[std::size_t(t - 1)].log_w == 0.0);
  }
}

TEST_CASE("trace invariants on an ebola run") {
  EbolaSimConfig cfg;
  cfg.n = 5000;
  cfg.horizon = 200;
  cfg.x0 = {4990, 5, 5, 0};
  const EbolaSynthetic syn = simulate_ebola(cfg, 3);
  const ModelSpec spec = ebola_model(syn.data, cfg.theta);
  CHECK(spec.pi0[2] == 0.001);
  const ObservationsZ obs = ebola_observations(syn.data, cfg.theta);
  const FilterTraceZ tr = filter_z(spec, obs);
  REQUIRE(tr.horizon() == 200);
  double cum = 0.0;
  for (const FilterStepZ& s : tr.steps) {
    CHECK(std::isfinite(s.log_w));
    cum += s.log_w;
    CHECK(s.cumulative_loglik == cum);
    CHECK(std::abs(s.p_filt.total() - 1.0) < 1e-10);
    CHECK(s.p_filt.values().minCoeff() >= 0.0);
    CHECK(max_abs(s.pi_filt.values(), s.p_filt.column_marginal().values()) < 1e-12);
  }
  CHECK(tr.loglik == cum);
  CHECK(tr.loglik == doctest::Approx(loglik_z(spec, obs)));
}

TEST_CASE("factorial terms toggle") {
  const ProbVector pi{0.4, 0.6};
  const CountVector y{3, 2};
  const Vec q = Vec::Constant(2, 0.5);
  const double with = update_x(pi, y, q, 20, true).log_w;
  const double without = update_x(pi, y, q, 20, false).log_w;
  const double terms = log_factorial(20) - log_factorial(3) - log_factorial(2) - log_factorial(15);
  CHECK(with - without == doctest::Approx(terms));
}

TEST_CASE("credible intervals") {
  CHECK(binomial_quantile(100, 0.5, 0.025) == 40);
  CHECK(binomial_quantile(100, 0.5, 0.975) == 60);
  for (std::int64_t n : {5, 37, 400}) {
    for (double p : {0.01, 0.3, 0.77}) {
      for (double prob : {0.025, 0.5, 0.975}) {
        const std::int64_t k = binomial_quantile(n, p, prob);
        CHECK(binom_cdf(k, n, p) >= prob - 1e-12);
        if (k > 0) CHECK(binom_cdf(k - 1, n, p) < prob);
      }
    }
  }

  const ModelSpec spec = constant_model(StochMatrix::identity(3), 30, ProbVector{0.2, 0.3, 0.5});
  ObservationsX obs{{CountVector{6, 9, 15}}, {Vec::Ones(3)}};
  const MarginalSummary full = filtered_mean_and_ci(filter_x(spec, obs), 1);
  CHECK(full.lower == full.mean);
  CHECK(full.upper == full.mean);

  ObservationsX partial{{CountVector{2, 0, 0}}, {Vec((Vec(3) << 0.5, 0.0, 0.0).finished())}};
  const FilterTraceX tr = filter_x(spec, partial);
  const MarginalSummary ms = filtered_mean_and_ci(tr, 1);
  const std::int64_t rest = tr.steps[0].remaining;
  for (int i = 0; i < 3; ++i) {
    const double p = tr.steps[0].residual[i];
    CHECK(ms.lower[i] == double(partial.y[0][i] + binomial_quantile(rest, p, 0.025)));
    CHECK(ms.upper[i] == double(partial.y[0][i] + binomial_quantile(rest, p, 0.975)));
  }
}

TEST_CASE("observation validation") {
  ObservationsX bad{{CountVector{1, 2}}, {Vec::Constant(2, 1.5)}};
  CHECK_THROWS_AS(bad.validate(2), Error);
  ObservationsZ shape{{CountMatrix::zeros(3)}, {Mat::Zero(3, 3)}};
  CHECK_THROWS_AS(shape.validate(2), Error);
}
