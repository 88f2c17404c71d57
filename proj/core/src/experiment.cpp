#include "pme/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace pme {

namespace {

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(key);
    return x;
  } catch (...) {
    throw std::invalid_argument("bad numeric value for '" + key + "': " + v);
  }
}

int to_int(const std::string& v, const std::string& key) {
  double x = to_double(v, key);
  if (x != std::floor(x)) throw std::invalid_argument("expected integer for '" + key + "'");
  return static_cast<int>(x);
}

// Fixed geometry of the topology-change experiments. The constants are
// illustrative; acceptance is on topology events, not field values.
struct Disk {
  Vec c;
  double r;
  double amp;
};
const Disk kDisks[] = {
    {{0.0, 0.0}, 0.14, 1.0},   {{0.32, 0.0}, 0.14, 1.0}, {{-0.32, 0.0}, 0.14, 1.0},
    {{0.0, 0.32}, 0.14, 1.0},  {{0.0, -0.32}, 0.14, 1.0},
};
constexpr double kAnnulusInner = 0.15;
constexpr double kAnnulusOuter = 0.45;
constexpr double kAnnulusAmp = 1.0;

}  // namespace

double ExperimentSpec::effective_theta() const {
  if (theta >= 0.0) return theta;
  return problem == Problem::Barenblatt ? 1.0 : 0.5;
}

double ExperimentSpec::start_time() const {
  if (t0 >= 0.0) return t0;
  if (problem == Problem::Barenblatt) return setup_bp_experiment(m, dim, kappa, r).second;
  return 0.0;
}

std::vector<double> ExperimentSpec::dt_list() const {
  if (!dt_schedule.empty()) return dt_schedule;
  double span = T - start_time();
  if (dt > 0.0) {
    int n = std::max(1, static_cast<int>(std::round(span / dt)));
    return std::vector<double>(n, dt);
  }
  if (steps <= 0) return {};
  if (span <= 0.0) throw std::invalid_argument("time window is empty");
  return std::vector<double>(steps, span / steps);
}

XmeshOptions ExperimentSpec::xmesh_options() const {
  XmeshOptions o;
  o.theta = effective_theta();
  o.m = m;
  o.kappa = kappa;
  o.outer_tol = outer_tol;
  o.newton_tol = newton_tol;
  o.eta_tol_rel = eta_tol_rel;
  o.alpha = alpha;
  o.max_outer = max_outer;
  o.max_newton = max_newton;
  return o;
}

ExperimentSpec parse_spec(std::istream& in) {
  ExperimentSpec spec;
  spec.T = -1.0;
  std::string line, section;
  int lineno = 0;
  bool lo_set[2] = {false, false}, hi_set[2] = {false, false};

  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw std::invalid_argument("bad section at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("expected key=value at line " + std::to_string(lineno));
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    std::string full = section + "." + key;

    if (full == "problem.type") {
      static const std::map<std::string, Problem> kinds = {
          {"barenblatt", Problem::Barenblatt}, {"waiting_time", Problem::WaitingTime},
          {"disks", Problem::Disks},           {"annulus", Problem::Annulus},
          {"custom_initial", Problem::CustomInitial}};
      auto it = kinds.find(value);
      if (it == kinds.end()) throw std::invalid_argument("unknown problem type: " + value);
      spec.problem = it->second;
    } else if (full == "problem.mode") {
      if (value == "xmesh") spec.mode = Mode::Xmesh;
      else if (value == "baseline") spec.mode = Mode::Baseline;
      else throw std::invalid_argument("unknown mode: " + value);
    } else if (full == "problem.m") spec.m = to_double(value, full);
    else if (full == "problem.kappa") spec.kappa = to_double(value, full);
    else if (full == "problem.theta") spec.theta = to_double(value, full);
    else if (full == "problem.dim") spec.dim = to_int(value, full);
    else if (full == "problem.gamma") spec.gamma = to_double(value, full);
    else if (full == "problem.r") spec.r = to_double(value, full);
    else if (full == "mesh.xmin") { spec.lo[0] = to_double(value, full); lo_set[0] = true; }
    else if (full == "mesh.xmax") { spec.hi[0] = to_double(value, full); hi_set[0] = true; }
    else if (full == "mesh.ymin") { spec.lo[1] = to_double(value, full); lo_set[1] = true; }
    else if (full == "mesh.ymax") { spec.hi[1] = to_double(value, full); hi_set[1] = true; }
    else if (full == "mesh.h") spec.h = to_double(value, full);
    else if (full == "time.t0") spec.t0 = (value == "auto") ? -1.0 : to_double(value, full);
    else if (full == "time.T") spec.T = to_double(value, full);
    else if (full == "time.steps") spec.steps = to_int(value, full);
    else if (full == "time.dt") spec.dt = to_double(value, full);
    else if (full == "time.dt_schedule") {
      std::istringstream ss(value);
      double d;
      while (ss >> d) spec.dt_schedule.push_back(d);
      if (!ss.eof()) throw std::invalid_argument("bad dt_schedule");
    } else if (full == "tolerances.outer_tol") spec.outer_tol = to_double(value, full);
    else if (full == "tolerances.newton_tol") spec.newton_tol = to_double(value, full);
    else if (full == "tolerances.eta_tol") spec.eta_tol_rel = to_double(value, full);
    else if (full == "tolerances.alpha") spec.alpha = to_double(value, full);
    else if (full == "tolerances.max_outer") spec.max_outer = to_int(value, full);
    else if (full == "tolerances.max_newton") spec.max_newton = to_int(value, full);
    else if (full == "outputs.snapshot_every") spec.snapshot_every = to_int(value, full);
    else if (full == "outputs.metrics_path") spec.metrics_path = value;
    else if (full == "outputs.snapshot_dir") spec.snapshot_dir = value;
    else throw std::invalid_argument("unknown key '" + full + "' at line " + std::to_string(lineno));
  }

  if (spec.dim != 1 && spec.dim != 2) throw std::invalid_argument("dim must be 1 or 2");
  if (spec.theta >= 0.0 && spec.theta > 1.0) throw std::invalid_argument("theta must be in [0,1]");
  (void)lo_set;
  (void)hi_set;
  return spec;
}

ExperimentSpec parse_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open spec file: " + path);
  return parse_spec(in);
}

Mesh build_spec_mesh(const ExperimentSpec& spec) {
  return build_structured_mesh(spec.dim, spec.lo, spec.hi, spec.h);
}

namespace {

double cap(double rho, double radius, double amp, double m) {
  double arg = 1.0 - (rho / radius) * (rho / radius);
  if (arg <= 0.0) return 0.0;
  return amp * std::pow(arg, 1.0 / m);
}

double manufactured_heat(const ExperimentSpec& spec, const Vec& x, double t) {
  double u = std::cos(M_PI * x[0]);
  if (spec.dim == 2) u *= std::cos(M_PI * x[1]);
  return 2.0 + u * std::exp(-spec.dim * M_PI * M_PI * spec.kappa * t);
}

}  // namespace

NodalField make_initial_condition(const ExperimentSpec& spec, const Mesh& mesh) {
  NodalField U(mesh.num_nodes(), 0.0);
  const auto& X = mesh.ref_coords();
  switch (spec.problem) {
    case Problem::Barenblatt: {
      auto [p, t0] = setup_bp_experiment(spec.m, spec.dim, spec.kappa, spec.r);
      double t = spec.start_time();
      for (int i = 0; i < mesh.num_nodes(); ++i) U[i] = barenblatt_u(p, X[i], t);
      break;
    }
    case Problem::WaitingTime: {
      if (spec.dim != 1) throw std::invalid_argument("waiting_time requires dim=1");
      for (int i = 0; i < mesh.num_nodes(); ++i)
        U[i] = waiting_time_u0(X[i][0], spec.m, spec.gamma);
      break;
    }
    case Problem::Disks: {
      for (int i = 0; i < mesh.num_nodes(); ++i) {
        for (const auto& d : kDisks) {
          double rho = norm(X[i] - d.c);
          U[i] = std::max(U[i], cap(rho, d.r, d.amp, spec.m));
        }
      }
      break;
    }
    case Problem::Annulus: {
      double rc = 0.5 * (kAnnulusInner + kAnnulusOuter);
      double w = 0.5 * (kAnnulusOuter - kAnnulusInner);
      for (int i = 0; i < mesh.num_nodes(); ++i)
        U[i] = cap(norm(X[i]) - rc, w, kAnnulusAmp, spec.m);
      break;
    }
    case Problem::CustomInitial: {
      double t = spec.start_time();
      for (int i = 0; i < mesh.num_nodes(); ++i) U[i] = manufactured_heat(spec, X[i], t);
      break;
    }
  }
  return U;
}

std::function<double(const Vec&, double)> exact_solution(const ExperimentSpec& spec) {
  if (spec.problem == Problem::Barenblatt) {
    auto [p, t0] = setup_bp_experiment(spec.m, spec.dim, spec.kappa, spec.r);
    return [p](const Vec& x, double t) { return barenblatt_u(p, x, t); };
  }
  if (spec.problem == Problem::CustomInitial) {
    ExperimentSpec copy = spec;
    return [copy](const Vec& x, double t) { return manufactured_heat(copy, x, t); };
  }
  return {};
}

namespace {

// Interface position readout for 1D waiting-time runs: the rightmost node of
// the empty region that touches the phase.
double interface_position_1d(const Mesh& mesh, const TimeState& s) {
  double pos = -std::numeric_limits<double>::infinity();
  for (int p = 0; p < mesh.num_nodes(); ++p) {
    if (s.U[p] > 0.0) continue;
    bool touches = false;
    for (int j : mesh.node_neighbors(p))
      if (s.U[j] > 0.0) touches = true;
    if (touches) pos = std::max(pos, s.X[p][0]);
  }
  return pos;
}

std::vector<int> interface_nodes(const Mesh& mesh, const NodalField& U) {
  std::vector<int> out;
  for (int p = 0; p < mesh.num_nodes(); ++p) {
    if (U[p] > 0.0) continue;
    for (int j : mesh.node_neighbors(p)) {
      if (U[j] > 0.0) {
        out.push_back(p);
        break;
      }
    }
  }
  return out;
}

}  // namespace

RunResult run_simulation(const ExperimentSpec& spec) {
  RunResult res{build_spec_mesh(spec)};
  const Mesh& mesh = res.mesh;
  const double t0 = spec.start_time();

  std::function<double(double)> radius;  // analytic interface radius, if any
  if (spec.problem == Problem::Barenblatt) {
    auto [p, tb] = setup_bp_experiment(spec.m, spec.dim, spec.kappa, spec.r);
    radius = [p](double t) { return barenblatt_interface_radius(p, t); };
  }

  auto push_state_metrics = [&](const TimeState& s) {
    res.masses.push_back(integrate_field(mesh, s.X, s.U));
    res.min_u.push_back(*std::min_element(s.U.begin(), s.U.end()));
    double f = std::numeric_limits<double>::quiet_NaN();
    if (radius) {
      auto gamma = interface_nodes(mesh, s.U);
      if (!gamma.empty()) f = metric_interface_error(s.X, gamma, radius(s.t), spec.h);
    }
    res.fr.push_back(f);
  };

  TimeState state{make_initial_condition(spec, mesh), mesh.ref_coords(), t0};
  res.states.push_back(state);
  push_state_metrics(state);

  const bool track_tw = spec.problem == Problem::WaitingTime && spec.dim == 1;
  double tw_pos0 = track_tw ? interface_position_1d(mesh, state) : 0.0;

  XmeshOptions opts = spec.xmesh_options();
  for (double dt : spec.dt_list()) {
    try {
      if (spec.mode == Mode::Xmesh) {
        auto [next, report] = xmesh_step(mesh, res.states.back(), dt, opts);
        res.states.push_back(std::move(next));
        res.reports.push_back(report);
      } else {
        auto next = baseline_step(mesh, res.states.back(), dt, opts);
        StepReport report;
        report.mass_before = res.masses.back();
        report.mass_after = integrate_field(mesh, next.X, next.U);
        res.states.push_back(std::move(next));
        res.reports.push_back(report);
      }
    } catch (const std::exception& ex) {
      res.error = ex.what();
      break;
    }
    push_state_metrics(res.states.back());

    if (track_tw) {
      double disp = interface_position_1d(mesh, res.states.back()) - tw_pos0;
      if (std::isnan(res.measured_tw)) {
        res.min_interface_displacement = std::min(res.min_interface_displacement, disp);
        if (disp > spec.h) res.measured_tw = res.states.back().t;
      }
    }
  }
  return res;
}

int count_components(const Mesh& mesh, const std::vector<char>& member) {
  std::vector<char> visited(mesh.num_nodes(), 0);
  int components = 0;
  for (int start = 0; start < mesh.num_nodes(); ++start) {
    if (!member[start] || visited[start]) continue;
    ++components;
    std::deque<int> work{start};
    visited[start] = 1;
    while (!work.empty()) {
      int p = work.front();
      work.pop_front();
      for (int j : mesh.node_neighbors(p)) {
        if (member[j] && !visited[j]) {
          visited[j] = 1;
          work.push_back(j);
        }
      }
    }
  }
  return components;
}

int positive_phase_components(const Mesh& mesh, const NodalField& U) {
  std::vector<char> member(mesh.num_nodes(), 0);
  for (int p = 0; p < mesh.num_nodes(); ++p) member[p] = U[p] > 0.0;
  return count_components(mesh, member);
}

int interface_components(const Mesh& mesh, const NodalField& U) {
  std::vector<char> member(mesh.num_nodes(), 0);
  for (int p : interface_nodes(mesh, U)) member[p] = 1;
  return count_components(mesh, member);
}

void write_metrics_csv(std::ostream& os, const RunResult& result) {
  os << "t,step,xmesh_iters,mass,mass_rel_var,f_r,min_U,flattened_count\n";
  auto mr = metric_mass_variation(result.masses);
  for (size_t i = 0; i < result.states.size(); ++i) {
    const StepReport* rep = (i > 0) ? &result.reports[i - 1] : nullptr;
    os << fmt(result.states[i].t) << "," << i << "," << (rep ? rep->xmesh_iters : 0) << ","
       << fmt(result.masses[i]) << "," << fmt(mr[i]) << "," << fmt(result.fr[i]) << ","
       << fmt(result.min_u[i]) << "," << (rep ? rep->flattened_elements : 0) << "\n";
  }
}

std::string summary_json(const RunResult& result) {
  auto mr = metric_mass_variation(result.masses);
  double max_abs_mr = 0.0;
  for (double v : mr) max_abs_mr = std::max(max_abs_mr, std::abs(v));
  double max_fr = 0.0, sum_fr = 0.0;
  int fr_count = 0;
  for (double v : result.fr) {
    if (std::isnan(v)) continue;
    max_fr = std::max(max_fr, v);
    sum_fr += v;
    ++fr_count;
  }
  double min_u = 0.0;
  if (!result.min_u.empty()) min_u = *std::min_element(result.min_u.begin(), result.min_u.end());
  int flattened = 0;
  for (const auto& r : result.reports) flattened += r.flattened_elements;

  std::string out = "{";
  out += "\"steps_completed\":" + std::to_string(result.reports.size());
  out += ",\"final_mass_variation\":" + fmt(mr.empty() ? 0.0 : mr.back());
  out += ",\"max_abs_mass_variation\":" + fmt(max_abs_mr);
  if (fr_count > 0) {
    out += ",\"max_fr\":" + fmt(max_fr);
    out += ",\"mean_fr\":" + fmt(sum_fr / fr_count);
  }
  out += ",\"min_U\":" + fmt(min_u);
  out += ",\"total_flattened\":" + std::to_string(flattened);
  if (!std::isnan(result.measured_tw)) out += ",\"measured_tw\":" + fmt(result.measured_tw);
  if (!result.error.empty()) {
    out += ",\"error\":\"" + result.error + "\"";
  }
  out += "}";
  return out;
}

StudyResult convergence_study(const ExperimentSpec& spec_template,
                              const std::vector<double>& h_values) {
  auto exact = exact_solution(spec_template);
  if (!exact) throw std::invalid_argument("convergence study needs a closed-form solution");

  double base_dt = 0.0;
  {
    auto dts = spec_template.dt_list();
    if (dts.empty()) throw std::invalid_argument("convergence study needs a time schedule");
    base_dt = dts.front();
  }

  StudyResult study;
  for (double h : h_values) {
    ExperimentSpec spec = spec_template;
    spec.h = h;
    spec.dt_schedule.clear();
    spec.dt = 0.0;
    double span = spec.T - spec.start_time();
    double dt = base_dt * h / spec_template.h;
    spec.steps = std::max(1, static_cast<int>(std::round(span / dt)));

    auto result = run_simulation(spec);
    if (!result.ok()) throw std::runtime_error("study run failed at h=" + fmt(h) + ": " + result.error);

    std::vector<Snapshot> series;
    series.reserve(result.states.size());
    for (const auto& s : result.states) series.push_back({&s.U, &s.X, s.t});
    study.rows.push_back({h, metric_l2_spacetime(result.mesh, series, exact)});
  }

  // Least-squares slope of log(error) against log(h).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = static_cast<int>(study.rows.size());
  for (const auto& row : study.rows) {
    double x = std::log(row.h), y = std::log(row.l2_error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  if (n >= 2) study.fitted_rate = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return study;
}

}  // namespace pme
