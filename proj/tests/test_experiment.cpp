#include <cmath>
#include <sstream>

#include "doctest.h"
#include "pme/experiment.hpp"

using namespace pme;

namespace {

ExperimentSpec spec_from(const std::string& text) {
  std::istringstream in(text);
  return parse_spec(in);
}

}  // namespace

TEST_CASE("spec parsing round trip") {
  ExperimentSpec spec = spec_from(R"(
[problem]
type = barenblatt
mode = xmesh
m = 2
kappa = 1.5
dim = 2
r = 0.15

[mesh]
xmin = -0.5
xmax = 0.5
ymin = -0.5
ymax = 0.5
h = 0.05

[time]
t0 = auto
T = 0.01
steps = 10

[tolerances]
outer_tol = 1e-9
alpha = 0.5

[outputs]
snapshot_every = 2
)");
  CHECK(spec.problem == Problem::Barenblatt);
  CHECK(spec.mode == Mode::Xmesh);
  CHECK(spec.m == 2.0);
  CHECK(spec.kappa == 1.5);
  CHECK(spec.lo[0] == -0.5);
  CHECK(spec.hi[1] == 0.5);
  CHECK(spec.h == 0.05);
  CHECK(spec.T == 0.01);
  CHECK(spec.steps == 10);
  CHECK(spec.outer_tol == 1e-9);
  CHECK(spec.alpha == 0.5);
  CHECK(spec.snapshot_every == 2);
  CHECK(spec.t0 < 0.0);
  CHECK(spec.start_time() == doctest::Approx(setup_bp_experiment(2.0, 2, 1.5, 0.15).second));
  CHECK(spec.dt_list().size() == 10);
}

TEST_CASE("spec parsing rejects bad input") {
  CHECK_THROWS_AS(spec_from("[problem]\ntype = frobnicate\n"), std::invalid_argument);
  CHECK_THROWS_AS(spec_from("[problem]\nbogus_key = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(spec_from("[problem]\nm = not_a_number\n"), std::invalid_argument);
  CHECK_THROWS_AS(spec_from("[time]\nsteps = 2.5\n"), std::invalid_argument);
  CHECK_THROWS_AS(spec_from("no equals sign here\n"), std::invalid_argument);
  CHECK_THROWS_AS(spec_from("[problem]\ndim = 3\n"), std::invalid_argument);
}

TEST_CASE("theta defaults depend on the problem") {
  ExperimentSpec bp;
  bp.problem = Problem::Barenblatt;
  CHECK(bp.effective_theta() == 1.0);
  ExperimentSpec wt;
  wt.problem = Problem::WaitingTime;
  CHECK(wt.effective_theta() == 0.5);
  wt.theta = 0.75;
  CHECK(wt.effective_theta() == 0.75);
}

TEST_CASE("initial conditions respect their supports") {
  SUBCASE("barenblatt vanishes outside the initial radius") {
    ExperimentSpec spec;
    spec.problem = Problem::Barenblatt;
    spec.m = 1.0;
    spec.lo = {-0.4, -0.4};
    spec.hi = {0.4, 0.4};
    spec.h = 0.05;
    Mesh mesh = build_spec_mesh(spec);
    NodalField U = make_initial_condition(spec, mesh);
    for (int i = 0; i < mesh.num_nodes(); ++i) {
      double rho = norm(mesh.coords()[i]);
      if (rho > 0.15) CHECK(U[i] == 0.0);
      if (rho < 0.14) CHECK(U[i] > 0.0);
    }
  }
  SUBCASE("waiting time is supported on [-pi, 0]") {
    ExperimentSpec spec;
    spec.problem = Problem::WaitingTime;
    spec.dim = 1;
    spec.lo = {-M_PI, 0.0};
    spec.hi = {M_PI, 0.0};
    spec.h = M_PI / 40.0;
    Mesh mesh = build_spec_mesh(spec);
    NodalField U = make_initial_condition(spec, mesh);
    for (int i = 0; i < mesh.num_nodes(); ++i) {
      if (mesh.coords()[i][0] > 0.0) CHECK(U[i] == 0.0);
    }
  }
  SUBCASE("disks are pairwise disjoint") {
    ExperimentSpec spec;
    spec.problem = Problem::Disks;
    spec.m = 2.0;
    spec.lo = {-0.7, -0.7};
    spec.hi = {0.7, 0.7};
    spec.h = 0.05;
    Mesh mesh = build_spec_mesh(spec);
    NodalField U = make_initial_condition(spec, mesh);
    CHECK(positive_phase_components(mesh, U) == 5);
  }
  SUBCASE("annulus has a two-component interface") {
    ExperimentSpec spec;
    spec.problem = Problem::Annulus;
    spec.m = 2.0;
    spec.lo = {-0.7, -0.7};
    spec.hi = {0.7, 0.7};
    spec.h = 0.04;
    Mesh mesh = build_spec_mesh(spec);
    NodalField U = make_initial_condition(spec, mesh);
    CHECK(positive_phase_components(mesh, U) == 1);
    CHECK(interface_components(mesh, U) == 2);
  }
}

TEST_CASE("zero steps echoes the initial state") {
  ExperimentSpec spec;
  spec.problem = Problem::Barenblatt;
  spec.m = 1.0;
  spec.lo = {-0.3, -0.3};
  spec.hi = {0.3, 0.3};
  spec.h = 0.05;
  spec.T = spec.start_time();
  spec.steps = 0;
  RunResult res = run_simulation(spec);
  CHECK(res.ok());
  CHECK(res.states.size() == 1);
  CHECK(res.reports.empty());
  CHECK(res.masses.size() == 1);
}

TEST_CASE("component counting on a constructed pattern") {
  Mesh mesh = build_structured_mesh(1, {0.0, 0.0}, {1.0, 0.0}, 0.1);
  NodalField U(mesh.num_nodes(), 0.0);
  U[1] = U[2] = 1.0;
  U[6] = U[7] = U[8] = 1.0;
  CHECK(positive_phase_components(mesh, U) == 2);
  std::vector<char> member(mesh.num_nodes(), 1);
  CHECK(count_components(mesh, member) == 1);
}

TEST_CASE("short runs: baseline goes negative, xmesh does not") {
  ExperimentSpec spec;
  spec.problem = Problem::Barenblatt;
  spec.m = 2.0;
  spec.lo = {-0.3, -0.3};
  spec.hi = {0.3, 0.3};
  spec.h = 0.04;
  spec.steps = 5;
  spec.T = spec.start_time() * 6.0;

  SUBCASE("baseline") {
    spec.mode = Mode::Baseline;
    RunResult res = run_simulation(spec);
    REQUIRE(res.ok());
    double min_u = 0.0;
    for (double v : res.min_u) min_u = std::min(min_u, v);
    CHECK(min_u < 0.0);
  }
  SUBCASE("xmesh") {
    spec.mode = Mode::Xmesh;
    RunResult res = run_simulation(spec);
    REQUIRE(res.ok());
    for (double v : res.min_u) CHECK(v >= 0.0);
    for (const auto& rep : res.reports) CHECK(!rep.lagrange_active_at_end);
  }
}

TEST_CASE("metrics CSV is deterministic and monotone in time") {
  ExperimentSpec spec;
  spec.problem = Problem::Barenblatt;
  spec.m = 1.0;
  spec.lo = {-0.3, -0.3};
  spec.hi = {0.3, 0.3};
  spec.h = 0.05;
  spec.steps = 3;
  spec.T = spec.start_time() * 4.0;

  RunResult a = run_simulation(spec);
  RunResult b = run_simulation(spec);
  REQUIRE(a.ok());
  std::ostringstream csv_a, csv_b;
  write_metrics_csv(csv_a, a);
  write_metrics_csv(csv_b, b);
  CHECK(csv_a.str() == csv_b.str());

  std::istringstream in(csv_a.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,step,xmesh_iters,mass,mass_rel_var,f_r,min_U,flattened_count");
  double prev_t = -1.0;
  int prev_step = -1, rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    double t = std::stod(line);
    int step = std::stoi(line.substr(line.find(',') + 1));
    CHECK(t > prev_t);
    CHECK(step == prev_step + 1);
    prev_t = t;
    prev_step = step;
    ++rows;
  }
  CHECK(rows == 4);

  std::string summary = summary_json(a);
  CHECK(summary.find("\"max_abs_mass_variation\"") != std::string::npos);
  CHECK(summary.find("\"min_U\"") != std::string::npos);
  CHECK(summary.find("\"steps_completed\":3") != std::string::npos);
}

TEST_CASE("failed steps preserve the partial series") {
  ExperimentSpec spec;
  spec.problem = Problem::Barenblatt;
  spec.m = 1.0;
  spec.lo = {-0.3, -0.3};
  spec.hi = {0.3, 0.3};
  spec.h = 0.05;
  spec.steps = 3;
  spec.T = spec.start_time() * 4.0;
  spec.max_outer = 0;  // the first interface move is forbidden, so the step stalls

  RunResult res = run_simulation(spec);
  CHECK(!res.ok());
  CHECK(res.error.find("stalled") != std::string::npos);
  CHECK(res.states.size() == 1);
  std::string summary = summary_json(res);
  CHECK(summary.find("\"error\"") != std::string::npos);
}

TEST_CASE("heat-equation convergence study reaches second order") {
  // m = 0 baseline with the smooth manufactured solution; standard P1 rate.
  ExperimentSpec spec;
  spec.problem = Problem::CustomInitial;
  spec.mode = Mode::Baseline;
  spec.m = 0.0;
  spec.kappa = 1.0;
  spec.theta = 0.5;
  spec.dim = 1;
  spec.lo = {0.0, 0.0};
  spec.hi = {1.0, 0.0};
  spec.h = 0.1;
  spec.t0 = 0.0;
  spec.T = 0.02;
  spec.steps = 8;

  StudyResult study = convergence_study(spec, {0.1, 0.05, 0.025});
  REQUIRE(study.rows.size() == 3);
  CHECK(study.rows[2].l2_error < study.rows[0].l2_error);
  CHECK(study.fitted_rate == doctest::Approx(2.0).epsilon(0.1));
}
