#include <doctest.h>

#include <cmath>

#include "epimn/models.hpp"
#include "test_util.hpp"

using namespace epimn;
using epimn::testing::random_simplex;

namespace {

ParamRecord seir_theta(double beta, double rho, double gamma) {
  return {{"beta", beta}, {"rho", rho}, {"gamma", gamma}, {"h", 1.0}};
}

void check_stochastic(const StochMatrix& k) {
  for (Eigen::Index i = 0; i < k.size(); ++i) {
    CHECK(std::abs(k.values().row(i).sum() - 1.0) < 1e-12);
    for (Eigen::Index j = 0; j < k.size(); ++j) {
      CHECK(k(i, j) >= 0.0);
      CHECK(k(i, j) <= 1.0);
    }
  }
}

}  // namespace

TEST_CASE("seir kernel entries") {
  const ProbVector no_inf{0.5, 0.5, 0.0, 0.0};
  const StochMatrix k0 = seir_kernel(1, no_inf, seir_theta(0.2, 0.2, 0.143));
  CHECK(k0(0, 0) == 1.0);
  CHECK(k0(0, 1) == 0.0);

  const ProbVector all_inf{0.0, 0.0, 1.0, 0.0};
  const StochMatrix k1 = seir_kernel(1, all_inf, seir_theta(0.2, 0.2, 0.143));
  CHECK(k1(0, 0) == doctest::Approx(0.8187).epsilon(1e-4));
  CHECK(k1(2, 3) == doctest::Approx(0.1333).epsilon(1e-3));
  CHECK(k1(1, 2) == doctest::Approx(1.0 - std::exp(-0.2)));
  CHECK(k1(3, 3) == 1.0);
}

TEST_CASE("ebola kernel schedule") {
  ParamRecord theta = seir_theta(0.2, 0.2, 0.143);
  theta.set("lambda", 0.2);
  theta.set("t_star", 130.0);
  const ProbVector eta{0.3, 0.2, 0.4, 0.1};

  CHECK(ebola_beta_t(135, 0.2, 0.2, 130.0) == doctest::Approx(0.2 * std::exp(-1.0)));
  CHECK(ebola_beta_t(135, 0.2, 0.2, 130.0) == doctest::Approx(0.0736).epsilon(1e-3));
  CHECK(ebola_beta_t(129, 0.2, 0.2, 130.0) == 0.2);

  const Mat before = ebola_kernel(50, eta, theta).values();
  CHECK(before == seir_kernel(50, eta, theta).values());

  theta.set("lambda", 0.0);
  for (int t : {1, 130, 200, 400}) CHECK(ebola_kernel(t, eta, theta).values() == seir_kernel(t, eta, theta).values());
}

TEST_CASE("covid kernel structure") {
  using namespace covid;
  ParamRecord theta{{"beta", 0.6}, {"rho", 0.2}, {"gamma", 0.2}, {"h", 1.0}, {"f", 0.0}};
  Vec e = Vec::Constant(kCompartments, 0.1);
  const ProbVector eta(e);

  const StochMatrix k = covid_kernel(1, eta, theta);
  CHECK(k(S, E1T) == 0.0);
  CHECK(k(R, R) == 1.0);
  CHECK(k(E1W, E2W) == doctest::Approx(1.0 - std::exp(-0.4)));
  CHECK(k(I1W, I2W) == doctest::Approx(1.0 - std::exp(-0.4)));

  Vec quiet = Vec::Zero(kCompartments);
  quiet[S] = 0.5;
  quiet[I1T] = 0.5;
  const StochMatrix kq = covid_kernel(1, ProbVector(quiet), theta);
  CHECK(kq(S, S) == 1.0);

  theta.set("f", 0.25);
  const StochMatrix kf = covid_kernel(1, eta, theta);
  const double p = 1.0 - std::exp(-0.6 * 0.2);
  CHECK(kf(S, E1W) == doctest::Approx(0.75 * p));
  CHECK(kf(S, E1T) == doctest::Approx(0.25 * p));

  theta.set_schedule("f", {0.5, 0.0});
  CHECK(covid_kernel(1, eta, theta)(S, E1T) > 0.0);
  CHECK(covid_kernel(5, eta, theta)(S, E1T) == 0.0);
}

TEST_CASE("kernel rows are stochastic for random inputs") {
  Rng rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    ParamRecord theta = seir_theta(3.0 * sample_uniform(rng), 2.0 * sample_uniform(rng), 2.0 * sample_uniform(rng));
    theta.set("h", 0.1 + sample_uniform(rng));
    theta.set("lambda", sample_uniform(rng));
    theta.set("t_star", 10.0);
    theta.set("f", sample_uniform(rng));
    const int t = 1 + int(sample_uniform(rng) * 30);
    check_stochastic(seir_kernel(t, ProbVector(random_simplex(rng, 4)), theta));
    check_stochastic(ebola_kernel(t, ProbVector(random_simplex(rng, 4)), theta));
    check_stochastic(covid_kernel(t, ProbVector(random_simplex(rng, covid::kCompartments)), theta));
  }
}

TEST_CASE("seir depends on eta only through the infective share") {
  const ParamRecord theta = seir_theta(0.5, 0.2, 0.1);
  const ProbVector a{0.7, 0.1, 0.2, 0.0};
  const ProbVector b{0.1, 0.3, 0.2, 0.4};
  CHECK(seir_kernel(1, a, theta).values() == seir_kernel(7, b, theta).values());
}

TEST_CASE("family registry") {
  CHECK(kernel_family("ebola").family == "ebola");
  CHECK(family_compartments("covid") == 10);
  CHECK(family_compartment_names("seir").size() == 4);
  CHECK_THROWS_AS(kernel_family("sir"), Error);
  try {
    kernel_family("sir");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownFamily);
  }
}

TEST_CASE("parameter validation") {
  ParamRecord theta = seir_theta(-0.1, 0.2, 0.1);
  CHECK_THROWS_AS(seir_kernel(1, ProbVector{1.0, 0.0, 0.0, 0.0}, theta), Error);
  theta = seir_theta(0.1, 0.2, 0.1);
  theta.set("h", 0.0);
  CHECK_THROWS_AS(seir_kernel(1, ProbVector{1.0, 0.0, 0.0, 0.0}, theta), Error);
  CHECK_THROWS_AS(seir_kernel(1, ProbVector{1.0, 0.0, 0.0}, seir_theta(0.1, 0.1, 0.1)), Error);
}

TEST_CASE("model spec validation") {
  CHECK_THROWS_AS(make_model(kernel_family("seir"), 0, ProbVector{1.0, 0.0, 0.0, 0.0}, seir_theta(0.1, 0.1, 0.1)),
                  Error);
  const ModelSpec ok = make_model(kernel_family("seir"), 10, ProbVector{1.0, 0.0, 0.0, 0.0}, seir_theta(0.1, 0.1, 0.1));
  CHECK(ok.m == 4);
}
