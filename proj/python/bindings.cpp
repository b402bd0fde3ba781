#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "epimn/experiments.hpp"
#include "epimn/io.hpp"
#include "epimn/oracle.hpp"
#include "epimn/simulate.hpp"
#include "epimn/smc.hpp"

namespace py = pybind11;
using namespace epimn;

namespace {

using IArray = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;
using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (T, m, m) stacks <-> vectors of matrices. Eigen is column major, numpy here row major.

std::vector<CountMatrix> counts_from(const IArray& a, int m) {
  if (a.ndim() != 3 || a.shape(1) != m || a.shape(2) != m) throw Error(ErrorCode::ShapeMismatch, "expected (T, m, m) counts");
  std::vector<CountMatrix> out;
  auto r = a.unchecked<3>();
  for (py::ssize_t t = 0; t < a.shape(0); ++t) {
    IMat z(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) z(i, j) = r(t, i, j);
    out.emplace_back(z);
  }
  return out;
}

std::vector<Mat> mats_from(const DArray& a, int m) {
  if (a.ndim() != 3 || a.shape(1) != m || a.shape(2) != m) throw Error(ErrorCode::ShapeMismatch, "expected (T, m, m) array");
  std::vector<Mat> out;
  auto r = a.unchecked<3>();
  for (py::ssize_t t = 0; t < a.shape(0); ++t) {
    Mat q(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) q(i, j) = r(t, i, j);
    out.push_back(std::move(q));
  }
  return out;
}

template <class T, class F>
py::array_t<T> stack(std::size_t count, int m, F get) {
  py::array_t<T> out({py::ssize_t(count), py::ssize_t(m), py::ssize_t(m)});
  auto w = out.template mutable_unchecked<3>();
  for (std::size_t t = 0; t < count; ++t) {
    const auto& v = get(t);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) w(py::ssize_t(t), i, j) = v(i, j);
  }
  return out;
}

template <class T, class F>
py::array_t<T> rows(std::size_t count, int m, F get) {
  py::array_t<T> out({py::ssize_t(count), py::ssize_t(m)});
  auto w = out.template mutable_unchecked<2>();
  for (std::size_t t = 0; t < count; ++t) {
    const auto& v = get(t);
    for (int i = 0; i < m; ++i) w(py::ssize_t(t), i) = v[i];
  }
  return out;
}

ObservationsZ obs_z(const ModelSpec& spec, const IArray& y, const DArray& q) {
  ObservationsZ obs{counts_from(y, spec.m), mats_from(q, spec.m)};
  obs.validate(spec.m);
  return obs;
}

ObservationsX obs_x(const ModelSpec& spec, const IArray& y, const DArray& q) {
  if (y.ndim() != 2 || q.ndim() != 2 || y.shape(1) != spec.m || q.shape(1) != spec.m || y.shape(0) != q.shape(0))
    throw Error(ErrorCode::ShapeMismatch, "expected (T, m) counts and reporting");
  ObservationsX obs;
  auto ry = y.unchecked<2>();
  auto rq = q.unchecked<2>();
  for (py::ssize_t t = 0; t < y.shape(0); ++t) {
    IVec v(spec.m);
    Vec p(spec.m);
    for (int i = 0; i < spec.m; ++i) {
      v[i] = ry(t, i);
      p[i] = rq(t, i);
    }
    obs.y.emplace_back(v);
    obs.q.push_back(p);
  }
  obs.validate(spec.m);
  return obs;
}

ModelSpec make(const std::string& family, std::int64_t n, std::optional<std::vector<double>> pi0,
               std::optional<std::vector<std::int64_t>> x0, const std::map<std::string, double>& theta,
               const std::map<std::string, std::vector<double>>& schedules) {
  io::json j{{"family", family}, {"n", n}, {"theta", theta}, {"schedules", schedules}};
  if (pi0) j["pi0"] = *pi0;
  if (x0) j["x0"] = *x0;
  return io::model_from_json(j);
}

EbolaData ebola_data(std::int64_t n, const IArray& y, const DArray& reported, double t_star,
                     std::optional<std::vector<double>> pi0) {
  EbolaData d;
  d.n = n;
  d.t_star = t_star;
  d.pi0 = pi0 ? ProbVector(Eigen::Map<const Vec>(pi0->data(), Eigen::Index(pi0->size()))) : EbolaData::default_pi0(n);
  d.y = counts_from(y, 4);
  d.reported = mats_from(reported, 4);
  return d;
}

py::dict em_to_dict(const EMFit& f) {
  py::dict d;
  d["theta"] = f.theta.to_vec();
  d["loglik"] = f.loglik;
  d["iterations"] = f.iterations;
  d["converged"] = f.converged;
  d["loglik_trail"] = f.loglik_trail;
  d["max_decrease"] = f.max_decrease;
  d["violations"] = f.violations;
  d["backtracks"] = f.backtracks;
  d["stalled"] = f.stalled;
  return d;
}

}  // namespace

PYBIND11_MODULE(_epimn, m) {
  m.doc() = "Multinomial filtering and smoothing for compartmental epidemic models";

  static py::exception<Error> error(m, "EpimnError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const char* cat = category(e.code()) == ErrorCategory::Config ? "config"
                        : category(e.code()) == ErrorCategory::Data ? "data"
                                                                    : "numerical";
      PyErr_SetObject(error.ptr(), py::make_tuple(e.what(), to_string(e.code()), cat).ptr());
    }
  });

  py::class_<ModelSpec>(m, "Model")
      .def(py::init(&make), py::arg("family"), py::arg("n"), py::arg("pi0") = py::none(), py::arg("x0") = py::none(),
           py::arg("theta") = std::map<std::string, double>{},
           py::arg("schedules") = std::map<std::string, std::vector<double>>{})
      .def_readonly("m", &ModelSpec::m)
      .def_readonly("n", &ModelSpec::n)
      .def_property_readonly("family", [](const ModelSpec& s) { return s.kernel.family; })
      .def_property_readonly("pi0", [](const ModelSpec& s) { return s.pi0.values(); })
      .def_property_readonly("theta", [](const ModelSpec& s) { return s.theta.scalars(); })
      .def(
          "kernel",
          [](const ModelSpec& s, int t, const Vec& eta) { return s.kernel_at(t, ProbVector(eta)).values(); },
          py::arg("t"), py::arg("eta"))
      .def("to_json", [](const ModelSpec& s) { return io::model_to_json(s).dump(); });

  m.def("families", &known_families);
  m.def("compartment_names", &family_compartment_names, py::arg("family"));

  m.def(
      "simulate",
      [](const ModelSpec& spec, int horizon, std::uint64_t seed, std::optional<std::vector<std::int64_t>> x0) {
        LatentTrajectory traj;
        if (x0) {
          traj = simulate_latent(spec, CountVector(Eigen::Map<const IVec>(x0->data(), Eigen::Index(x0->size()))),
                                 horizon, seed);
        } else {
          traj = simulate_latent(spec, horizon, seed);
        }
        py::dict d;
        d["x"] = rows<std::int64_t>(traj.x.size(), spec.m, [&](std::size_t t) { return traj.x[t].values(); });
        d["z"] = stack<std::int64_t>(traj.z.size(), spec.m, [&](std::size_t t) { return traj.z[t].values(); });
        return d;
      },
      py::arg("model"), py::arg("horizon"), py::arg("seed"), py::arg("x0") = py::none(),
      "Latent path: x is (T+1, m), z is (T, m, m).");

  m.def(
      "thin_z",
      [](const IArray& z, const DArray& q, std::uint64_t seed) {
        const int mm = int(z.shape(1));
        LatentTrajectory traj;
        traj.z = counts_from(z, mm);
        const std::vector<CountMatrix> y = simulate_obs_z(traj, mats_from(q, mm), seed);
        return stack<std::int64_t>(y.size(), mm, [&](std::size_t t) { return y[t].values(); });
      },
      py::arg("z"), py::arg("q"), py::arg("seed"), "Binomial thinning of transition counts.");

  m.def(
      "filter_z",
      [](const ModelSpec& spec, const IArray& y, const DArray& q, bool factorials) {
        FilterOptions opts;
        opts.include_factorials = factorials;
        const FilterTraceZ tr = filter_z(spec, obs_z(spec, y, q), opts);
        const auto T = tr.steps.size();
        py::dict d;
        d["loglik"] = tr.loglik;
        std::vector<double> lw;
        for (const auto& s : tr.steps) lw.push_back(s.log_w);
        d["log_w"] = lw;
        d["pi_filt"] = rows<double>(T + 1, spec.m, [&](std::size_t t) { return tr.filtered(int(t)).values(); });
        d["p_pred"] = stack<double>(T, spec.m, [&](std::size_t t) { return tr.steps[t].p_pred.values(); });
        d["p_filt"] = stack<double>(T, spec.m, [&](std::size_t t) { return tr.steps[t].p_filt.values(); });
        const SmoothTraceZ sm = smooth_z(tr);
        d["p_smooth"] = stack<double>(T, spec.m, [&](std::size_t t) { return sm.p_smooth[t].values(); });
        d["pi_smooth"] = rows<double>(T, spec.m, [&](std::size_t t) { return sm.pi_smooth[t].values(); });
        return d;
      },
      py::arg("model"), py::arg("y"), py::arg("q"), py::arg("factorials") = true,
      "Transition-count filter and smoother. Missing entries are y = 0, q = 0.");

  m.def(
      "filter_x",
      [](const ModelSpec& spec, const IArray& y, const DArray& q, bool factorials) {
        FilterOptions opts;
        opts.include_factorials = factorials;
        const FilterTraceX tr = filter_x(spec, obs_x(spec, y, q), opts);
        const auto T = tr.steps.size();
        py::dict d;
        d["loglik"] = tr.loglik;
        std::vector<double> lw;
        for (const auto& s : tr.steps) lw.push_back(s.log_w);
        d["log_w"] = lw;
        d["pi_filt"] = rows<double>(T + 1, spec.m, [&](std::size_t t) { return tr.filtered(int(t)).values(); });
        const SmoothTraceX sm = smooth_x(tr, spec);
        d["pi_smooth"] = rows<double>(T + 1, spec.m, [&](std::size_t t) { return sm.pi_smooth[t].values(); });
        return d;
      },
      py::arg("model"), py::arg("y"), py::arg("q"), py::arg("factorials") = true,
      "Occupancy filter and smoother. Missing entries are y = 0, q = 0.");

  m.def(
      "exact_loglik_z",
      [](const ModelSpec& spec, const IArray& y, const DArray& q, bool mean_field) {
        return oracle::exact_filter_z(spec, obs_z(spec, y, q), mean_field ? oracle::EtaMode::MeanField
                                                                          : oracle::EtaMode::Exact)
            .loglik;
      },
      py::arg("model"), py::arg("y"), py::arg("q"), py::arg("mean_field") = false,
      "Exact log-likelihood by state enumeration; small n and m only.");

  py::class_<EbolaData>(m, "EbolaData")
      .def(py::init(&ebola_data), py::arg("n"), py::arg("y"), py::arg("reported"), py::arg("t_star") = 130.0,
           py::arg("pi0") = py::none())
      .def_static("from_series", &EbolaData::from_series, py::arg("n"), py::arg("cases"), py::arg("deaths"),
                  py::arg("t_star") = 130.0)
      .def_readonly("n", &EbolaData::n)
      .def_readonly("t_star", &EbolaData::t_star)
      .def_property_readonly("horizon", &EbolaData::horizon)
      .def_property_readonly("y", [](const EbolaData& d) {
        return stack<std::int64_t>(d.y.size(), 4, [&](std::size_t t) { return d.y[t].values(); });
      });

  m.def(
      "simulate_ebola",
      [](std::uint64_t seed, std::int64_t n, int horizon, double t_star, std::optional<std::vector<std::int64_t>> x0,
         std::int64_t min_infections) {
        EbolaSimConfig c;
        c.n = n;
        c.horizon = horizon;
        c.t_star = t_star;
        if (x0) c.x0 = *x0;
        c.min_infections = min_infections;
        return simulate_ebola(c, seed).data;
      },
      py::arg("seed"), py::arg("n") = kEbolaPopulation, py::arg("horizon") = 0, py::arg("t_star") = 130.0,
      py::arg("x0") = py::none(), py::arg("min_infections") = 0);

  m.attr("EBOLA_PARAM_NAMES") = EbolaParams::names();
  m.def(
      "ebola_loglik", [](const EbolaData& d, const Vec& theta) { return ebola_loglik(d, EbolaParams::from_vec(theta)); },
      py::arg("data"), py::arg("theta"), "theta = (beta, lambda, rho, gamma, q23, q34).");

  m.def(
      "em_fit",
      [](const EbolaData& d, const Vec& start, double tolerance, int max_iters, bool safeguard) {
        EMOptions o;
        o.tolerance = tolerance;
        o.max_iters = max_iters;
        o.safeguard = safeguard;
        return em_to_dict(em_fit(d, EbolaParams::from_vec(start), o));
      },
      py::arg("data"), py::arg("start"), py::arg("tolerance") = 1e-6, py::arg("max_iters") = 500,
      py::arg("safeguard") = true);

  m.def(
      "profile_em",
      [](const EbolaData& d, const std::vector<double>& beta_grid, const std::vector<double>& lambda_grid,
         const Vec& start, int threads) {
        const ProfileFit f = profile_em(d, beta_grid, lambda_grid, EbolaParams::from_vec(start), {}, threads);
        py::dict out = em_to_dict(f.best);
        py::array_t<double> ll({py::ssize_t(beta_grid.size()), py::ssize_t(lambda_grid.size())});
        auto w = ll.mutable_unchecked<2>();
        for (std::size_t k = 0; k < f.grid.size(); ++k)
          w(py::ssize_t(k / lambda_grid.size()), py::ssize_t(k % lambda_grid.size())) = f.grid[k].loglik;
        out["grid_loglik"] = ll;
        return out;
      },
      py::arg("data"), py::arg("beta_grid"), py::arg("lambda_grid"), py::arg("start"), py::arg("threads") = 1);

  m.def(
      "mcmc",
      [](const EbolaData& d, const std::string& prior, int iterations, int burn_in, std::uint64_t seed,
         std::optional<Vec> init) {
        MCMCConfig c;
        c.iterations = iterations;
        c.burn_in = burn_in;
        c.seed = seed;
        const PriorSpec p = PriorSpec::preset(prior);
        const MCMCOutput o = init ? mcmc_run(d, p, c, EbolaParams::from_vec(*init)) : mcmc_run(d, p, c);
        py::array_t<double> s({py::ssize_t(o.samples.size()), py::ssize_t(o.names.size())});
        auto w = s.mutable_unchecked<2>();
        for (std::size_t k = 0; k < o.samples.size(); ++k)
          for (std::size_t i = 0; i < o.names.size(); ++i) w(py::ssize_t(k), py::ssize_t(i)) = o.samples[k][Eigen::Index(i)];
        py::dict out;
        out["names"] = o.names;
        out["samples"] = s;
        out["log_post"] = o.log_post;
        out["acceptance_rate"] = o.acceptance_rate;
        out["r0"] = o.r0;
        return out;
      },
      py::arg("data"), py::arg("prior"), py::arg("iterations"), py::arg("burn_in"), py::arg("seed"),
      py::arg("init") = py::none());

  m.def(
      "smc",
      [](const ModelSpec& spec, const IArray& y, const DArray& q, double sigma_v, double beta0, int n_part, int runs,
         std::uint64_t seed, int threads) {
        SMCRunConfig c;
        c.sigma_v = sigma_v;
        c.beta0 = beta0;
        c.n_part = n_part;
        c.runs = runs;
        c.seed = seed;
        c.threads = threads;
        const SMCRunsResult r = smc_runs(spec, obs_z(spec, y, q), c);
        py::dict out;
        std::vector<std::vector<double>> beta;
        for (const auto& d : r.draws) beta.push_back(d.beta_tilde);
        out["beta"] = beta;
        out["loglik"] = r.loglik;
        out["ess"] = r.ess;
        return out;
      },
      py::arg("model"), py::arg("y"), py::arg("q"), py::arg("sigma_v"), py::arg("beta0"), py::arg("n_part"),
      py::arg("runs"), py::arg("seed"), py::arg("threads") = 1, "Particle filter over beta_t with backward draws.");
}
