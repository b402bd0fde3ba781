#include "epimn/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace epimn::io {

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IO, "cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::int64_t to_int(const std::string& s, const fs::path& path) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::Data, path.string() + ": expected an integer, got '" + s + "'");
  }
}

double to_double(const std::string& s, const fs::path& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::Data, path.string() + ": expected a number, got '" + s + "'");
  }
}

int index_in(std::int64_t v, int m, const fs::path& path) {
  if (v < 1 || v > m) throw Error(ErrorCode::Data, path.string() + ": compartment index out of range");
  return int(v - 1);
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return k;
  throw Error(ErrorCode::Data, "missing CSV column '" + name + "'");
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IO, "cannot read " + path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split(line);
    if (first) {
      t.header = std::move(cells);
      first = false;
      continue;
    }
    if (cells.size() != t.header.size()) throw Error(ErrorCode::Data, path.string() + ": ragged row");
    t.rows.push_back(std::move(cells));
  }
  if (first) throw Error(ErrorCode::Data, path.string() + ": missing header");
  return t;
}

void write_obs_x(const fs::path& path, const ObservationsX& obs) {
  auto out = open_out(path);
  out << "t,i,y,q\n";
  for (std::size_t t = 0; t < obs.y.size(); ++t)
    for (Eigen::Index i = 0; i < obs.y[t].size(); ++i)
      if (obs.q[t][i] > 0.0) out << t + 1 << ',' << i + 1 << ',' << obs.y[t][i] << ',' << obs.q[t][i] << '\n';
}

void write_obs_z(const fs::path& path, const ObservationsZ& obs) {
  auto out = open_out(path);
  out << "t,i,j,y,q\n";
  for (std::size_t t = 0; t < obs.y.size(); ++t)
    for (Eigen::Index i = 0; i < obs.y[t].size(); ++i)
      for (Eigen::Index j = 0; j < obs.y[t].size(); ++j)
        if (obs.q[t](i, j) > 0.0)
          out << t + 1 << ',' << i + 1 << ',' << j + 1 << ',' << obs.y[t](i, j) << ',' << obs.q[t](i, j) << '\n';
}

ObservationsX read_obs_x(const fs::path& path, int m, int horizon) {
  const CsvTable t = read_csv(path);
  const auto ct = t.column("t"), ci = t.column("i"), cy = t.column("y"), cq = t.column("q");
  int tmax = 0;
  for (const auto& r : t.rows) tmax = std::max<int>(tmax, int(to_int(r[ct], path)));
  ObservationsX obs = ObservationsX::missing(m, horizon < 0 ? tmax : horizon);
  std::vector<IVec> y(obs.y.size(), IVec::Zero(m));
  for (const auto& r : t.rows) {
    const auto tt = to_int(r[ct], path);
    if (tt < 1 || tt > obs.horizon()) throw Error(ErrorCode::Data, path.string() + ": time index out of range");
    const int i = index_in(to_int(r[ci], path), m, path);
    const auto k = std::size_t(tt - 1);
    y[k][i] = to_int(r[cy], path);
    obs.q[k][i] = to_double(r[cq], path);
  }
  for (std::size_t k = 0; k < y.size(); ++k) obs.y[k] = CountVector(y[k]);
  obs.validate(m);
  return obs;
}

ObservationsZ read_obs_z(const fs::path& path, int m, int horizon) {
  const CsvTable t = read_csv(path);
  const auto ct = t.column("t"), ci = t.column("i"), cj = t.column("j"), cy = t.column("y"), cq = t.column("q");
  int tmax = 0;
  for (const auto& r : t.rows) tmax = std::max<int>(tmax, int(to_int(r[ct], path)));
  ObservationsZ obs = ObservationsZ::missing(m, horizon < 0 ? tmax : horizon);
  std::vector<IMat> y(obs.y.size(), IMat::Zero(m, m));
  for (const auto& r : t.rows) {
    const auto tt = to_int(r[ct], path);
    if (tt < 1 || tt > obs.horizon()) throw Error(ErrorCode::Data, path.string() + ": time index out of range");
    const int i = index_in(to_int(r[ci], path), m, path);
    const int j = index_in(to_int(r[cj], path), m, path);
    const auto k = std::size_t(tt - 1);
    y[k](i, j) = to_int(r[cy], path);
    obs.q[k](i, j) = to_double(r[cq], path);
  }
  for (std::size_t k = 0; k < y.size(); ++k) obs.y[k] = CountMatrix(y[k]);
  obs.validate(m);
  return obs;
}

void write_latent(const fs::path& path, const LatentTrajectory& traj, const std::vector<std::string>& names) {
  auto out = open_out(path);
  out << 't';
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t t = 0; t < traj.x.size(); ++t) {
    out << t;
    for (Eigen::Index i = 0; i < traj.x[t].size(); ++i) out << ',' << traj.x[t][i];
    out << '\n';
  }
}

void write_transitions(const fs::path& path, const LatentTrajectory& traj) {
  auto out = open_out(path);
  out << "t,i,j,z\n";
  for (std::size_t t = 0; t < traj.z.size(); ++t)
    for (Eigen::Index i = 0; i < traj.z[t].size(); ++i)
      for (Eigen::Index j = 0; j < traj.z[t].size(); ++j)
        if (traj.z[t](i, j) != 0) out << t + 1 << ',' << i + 1 << ',' << j + 1 << ',' << traj.z[t](i, j) << '\n';
}

void write_filter_trace(const fs::path& path, const FilterTraceX& trace) {
  auto out = open_out(path);
  out << "t,compartment,pi_pred,pi_filt,mean,lower,upper,log_w\n";
  for (int t = 1; t <= trace.horizon(); ++t) {
    const FilterStepX& st = trace.steps[std::size_t(t - 1)];
    const MarginalSummary ms = filtered_mean_and_ci(trace, t);
    for (Eigen::Index i = 0; i < st.pi_filt.size(); ++i) {
      out << t << ',' << i + 1 << ',' << st.pi_pred[i] << ',' << st.pi_filt[i] << ',' << ms.mean[i] << ','
          << ms.lower[i] << ',' << ms.upper[i] << ',' << st.log_w << '\n';
    }
  }
}

void write_filter_trace(const fs::path& path, const FilterTraceZ& trace) {
  auto out = open_out(path);
  out << "t,compartment,pi_pred,pi_filt,mean,lower,upper,log_w\n";
  for (int t = 1; t <= trace.horizon(); ++t) {
    const FilterStepZ& st = trace.steps[std::size_t(t - 1)];
    const ProbVector pred = st.p_pred.column_marginal();
    const MarginalSummary ms = filtered_mean_and_ci(trace, t);
    for (Eigen::Index i = 0; i < st.pi_filt.size(); ++i) {
      out << t << ',' << i + 1 << ',' << pred[i] << ',' << st.pi_filt[i] << ',' << ms.mean[i] << ',' << ms.lower[i]
          << ',' << ms.upper[i] << ',' << st.log_w << '\n';
    }
  }
}

void write_smooth_trace(const fs::path& path, const SmoothTraceX& trace) {
  auto out = open_out(path);
  out << "t,compartment,pi_smooth,mean\n";
  for (int s = 0; s <= trace.horizon(); ++s) {
    const ProbVector& p = trace.pi_smooth[std::size_t(s)];
    for (Eigen::Index i = 0; i < p.size(); ++i) out << s << ',' << i + 1 << ',' << p[i] << ',' << double(trace.n) * p[i] << '\n';
  }
}

void write_smooth_trace(const fs::path& path, const SmoothTraceZ& trace) {
  auto out = open_out(path);
  out << "t,i,j,p_smooth,mean\n";
  for (int s = 1; s <= trace.horizon(); ++s) {
    const JointMatrix& p = trace.at(s);
    for (Eigen::Index i = 0; i < p.size(); ++i)
      for (Eigen::Index j = 0; j < p.size(); ++j)
        out << s << ',' << i + 1 << ',' << j + 1 << ',' << p(i, j) << ',' << double(trace.n) * p(i, j) << '\n';
  }
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IO, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

ModelSpec model_from_json(const json& j) {
  try {
    const std::string family = j.at("family").get<std::string>();
    const KernelSpec kernel = kernel_family(family);
    const int m = family_compartments(family);
    const auto n = j.at("n").get<std::int64_t>();
    Vec pi(m);
    if (j.contains("x0")) {
      const auto x0 = j.at("x0").get<std::vector<std::int64_t>>();
      if (int(x0.size()) != m) throw Error(ErrorCode::Config, "x0 has wrong length");
      for (int i = 0; i < m; ++i) pi[i] = double(x0[std::size_t(i)]) / double(n);
    } else if (j.contains("pi0")) {
      const auto p = j.at("pi0").get<std::vector<double>>();
      if (int(p.size()) != m) throw Error(ErrorCode::Config, "pi0 has wrong length");
      for (int i = 0; i < m; ++i) pi[i] = p[std::size_t(i)];
    } else {
      pi = Vec::Zero(m);
      pi[0] = 1.0 - 1.0 / double(n);
      pi[1] = 1.0 / double(n);
    }
    ParamRecord theta;
    declare_family_constraints(family, theta);
    if (j.contains("theta"))
      for (const auto& [k, v] : j.at("theta").items()) theta.set(k, v.get<double>());
    if (j.contains("schedules"))
      for (const auto& [k, v] : j.at("schedules").items()) theta.set_schedule(k, v.get<std::vector<double>>());
    ProbVector pi0;
    try {
      pi0 = ProbVector(pi);
    } catch (const Error& e) {
      throw Error(ErrorCode::Config, std::string("initial distribution: ") + e.what());
    }
    return make_model(kernel, n, std::move(pi0), std::move(theta));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("model config: ") + e.what());
  }
}

json model_to_json(const ModelSpec& spec) {
  json j;
  j["family"] = spec.kernel.family;
  j["n"] = spec.n;
  j["pi0"] = std::vector<double>(spec.pi0.values().data(), spec.pi0.values().data() + spec.pi0.size());
  j["theta"] = spec.theta.scalars();
  if (!spec.theta.schedules().empty()) j["schedules"] = spec.theta.schedules();
  return j;
}

ReportingSpec reporting_from_json(const json& j, int m) {
  try {
    ReportingSpec r;
    r.z_form = j.value("form", std::string("z")) == "z";
    if (r.z_form) {
      r.q_z = Mat::Zero(m, m);
      for (const auto& e : j.at("entries")) {
        const int i = e.at("i").get<int>(), k = e.at("j").get<int>();
        if (i < 1 || i > m || k < 1 || k > m) throw Error(ErrorCode::Config, "reporting entry out of range");
        r.q_z(i - 1, k - 1) = e.at("q").get<double>();
        check_constraint("q", r.q_z(i - 1, k - 1), Constraint::UnitInterval);
      }
    } else {
      const auto q = j.at("q").get<std::vector<double>>();
      if (int(q.size()) != m) throw Error(ErrorCode::Config, "q has wrong length");
      r.q_x = Eigen::Map<const Vec>(q.data(), m);
      for (int i = 0; i < m; ++i) check_constraint("q", r.q_x[i], Constraint::UnitInterval);
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("reporting config: ") + e.what());
  }
}

}  // namespace epimn::io
