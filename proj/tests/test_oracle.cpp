#include <doctest.h>

#include <cmath>

#include "epimn/oracle.hpp"
#include "test_util.hpp"

using namespace epimn;
using namespace epimn::testing;
namespace orc = epimn::oracle;

namespace {

double choose(std::int64_t n, std::int64_t k) {
  double c = 1.0;
  for (std::int64_t j = 1; j <= k; ++j) c = c * double(n - k + j) / double(j);
  return c;
}

}  // namespace

TEST_CASE("enumeration sizes") {
  const orc::StateEnumeration s22 = orc::enumerate_states(2, 2);
  REQUIRE(s22.size() == 3);
  CHECK(s22[0].values() == CountVector{0, 2}.values());
  CHECK(s22[1].values() == CountVector{1, 1}.values());
  CHECK(s22[2].values() == CountVector{2, 0}.values());
  CHECK(orc::enumerate_states(3, 2).size() == 6);
  CHECK(orc::enumerate_states(4, 10).size() == 286);

  for (int m = 1; m <= 5; ++m) {
    for (std::int64_t n = 0; n <= 8; ++n) {
      const orc::StateEnumeration st(m, n);
      CHECK(double(st.size()) == choose(n + m - 1, m - 1));
      CHECK(st.size() == std::size_t(orc::state_count(m, n)));
      for (std::size_t k = 0; k < st.size(); ++k) CHECK(st.index_of(st[k]) == k);
    }
  }
  try {
    orc::enumerate_states(10, 100);
    FAIL("expected TooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooLarge);
  }
}

TEST_CASE("count matrices") {
  const auto by_rows = orc::matrices_with_row_sums(CountVector{2, 1});
  CHECK(by_rows.size() == 6);
  for (const CountMatrix& z : by_rows) CHECK(z.row_sums().values() == CountVector{2, 1}.values());
  CHECK(orc::matrices_with_total(2, 2).size() == 10);
}

TEST_CASE("transition pmf") {
  const orc::StateEnumeration st(3, 4);
  const CountVector x{1, 2, 1};
  const Vec id = orc::exact_transition_pmf(x, StochMatrix::identity(3), st);
  CHECK(id[Eigen::Index(st.index_of(x))] == 1.0);
  CHECK(id.sum() == 1.0);

  Rng rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    const StochMatrix k = random_kernel(rng, 3);
    CHECK(std::abs(orc::exact_transition_pmf(x, k, st).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("m = 2 transition is a binomial convolution") {
  Rng rng(4);
  const std::int64_t n = 7;
  const orc::StateEnumeration st(2, n);
  for (int rep = 0; rep < 10; ++rep) {
    const StochMatrix k = random_kernel(rng, 2);
    const std::int64_t a = rep % (n + 1);
    const CountVector x{a, n - a};
    const Vec pmf = orc::exact_transition_pmf(x, k, st);
    // Next count in compartment 0: Bin(a, k00) + Bin(n - a, k10).
    for (std::int64_t c = 0; c <= n; ++c) {
      double conv = 0.0;
      for (std::int64_t u = 0; u <= std::min(a, c); ++u) {
        conv += std::exp(orc::log_binomial_pmf(u, a, k(0, 0)) + orc::log_binomial_pmf(c - u, n - a, k(1, 0)));
      }
      CHECK(std::abs(pmf[Eigen::Index(st.index_of(CountVector{c, n - c}))] - conv) < 1e-13);
    }
  }
}

TEST_CASE("multinomial pmf normalization and mean") {
  Rng rng(1);
  const orc::StateEnumeration st(4, 6);
  const ProbVector pi(random_simplex(rng, 4));
  const Vec pmf = orc::multinomial_pmf(pi, st);
  CHECK(std::abs(pmf.sum() - 1.0) < 1e-12);
  CHECK(max_abs(orc::mean_proportions(pmf, st), pi.values()) < 1e-12);
}

TEST_CASE("exact filter sanity") {
  const ModelSpec spec = constant_model(StochMatrix::identity(3), 5, ProbVector{0.2, 0.3, 0.5});
  ObservationsX obs{{CountVector{1, 1, 3}}, {Vec::Ones(3)}};
  const orc::ExactFilterResult r = orc::exact_filter_x(spec, obs, orc::EtaMode::Exact);
  const auto k = Eigen::Index(r.states.index_of(CountVector{1, 1, 3}));
  CHECK(r.posterior[1][k] == doctest::Approx(1.0));
  CHECK(r.loglik == doctest::Approx(log_multinomial_pmf(CountVector{1, 1, 3}, spec.pi0.values())));

  // One step from a multinomial prior: exact evidence equals the closed-form update weight.
  Rng rng(6);
  const ModelSpec rnd = constant_model(random_kernel(rng, 3), 5, ProbVector(random_simplex(rng, 3)));
  const Vec q = Vec::Constant(3, 0.4);
  ObservationsX one{{CountVector{1, 0, 2}}, {q}};
  const orc::ExactFilterResult ex = orc::exact_filter_x(rnd, one, orc::EtaMode::Exact);
  const double closed = update_x(predict_x(rnd.pi0, rnd.kernel_at(1, rnd.pi0)), one.y[0], q, 5).log_w;
  CHECK(std::abs(ex.log_w[0] - closed) < 1e-12);

  ObservationsX impossible{{CountVector{3, 0, 0}}, {Vec::Ones(3)}};
  const ModelSpec fixed = constant_model(StochMatrix::identity(3), 2, ProbVector{0.5, 0.5, 0.0});
  CHECK_THROWS_AS(orc::exact_filter_x(fixed, impossible, orc::EtaMode::Exact), Error);
}

TEST_CASE("exact and mean-field modes agree when the kernel ignores eta") {
  Rng rng(12);
  const ModelSpec spec = constant_model(random_kernel(rng, 3), 4, ProbVector(random_simplex(rng, 3)));
  ObservationsZ obs = ObservationsZ::missing(3, 2);
  obs.q[1] = Mat::Constant(3, 3, 0.5);
  obs.y[1] = CountMatrix::zeros(3);
  const auto a = orc::exact_filter_z(spec, obs, orc::EtaMode::Exact);
  const auto b = orc::exact_filter_z(spec, obs, orc::EtaMode::MeanField);
  CHECK(std::abs(a.loglik - b.loglik) < 1e-13);
}

TEST_CASE("mixture transition pmf") {
  Rng rng(3);
  const orc::StateEnumeration st(2, 3);
  const ProbVector pi(random_simplex(rng, 2));
  const StochMatrix k = random_kernel(rng, 2);
  const orc::MatrixPmf mix = orc::mixture_transition_pmf(orc::multinomial_pmf(pi, st), st, k);
  const JointMatrix p = predict_z(pi, k);
  double total = 0.0;
  for (const auto& [key, v] : mix) {
    IMat z(2, 2);
    z << key[0], key[1], key[2], key[3];
    CHECK(std::abs(v - std::exp(log_multinomial_pmf(CountMatrix(z), p.values()))) < 1e-13);
    total += v;
  }
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("row sum mismatch has zero probability") {
  IMat z(2, 2);
  z << 1, 0, 0, 1;
  CHECK(std::isinf(orc::log_transition_matrix_pmf(CountVector{2, 0}, StochMatrix::identity(2), CountMatrix(z))));
  CHECK(std::isinf(orc::log_binomial_pmf(3, 2, 0.5)));
  CHECK(orc::log_binomial_pmf(0, 0, 0.0) == 0.0);
}
