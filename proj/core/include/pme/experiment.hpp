#ifndef PME_EXPERIMENT_HPP
#define PME_EXPERIMENT_HPP

#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "pme/analytic.hpp"
#include "pme/mesh.hpp"
#include "pme/xmesh.hpp"

namespace pme {

enum class Problem { Barenblatt, WaitingTime, Disks, Annulus, CustomInitial };
enum class Mode { Xmesh, Baseline };

// Declarative description of a run, parsed from an INI-style key-value file.
struct ExperimentSpec {
  Problem problem = Problem::Barenblatt;
  Mode mode = Mode::Xmesh;
  double m = 1.0;
  double kappa = 1.0;
  // Defaults to 1 for Barenblatt runs and 1/2 elsewhere unless set.
  double theta = -1.0;
  int dim = 2;
  double gamma = 0.05;  // waiting-time profile parameter
  double r = 0.15;      // Barenblatt initial interface radius

  Vec lo{0.0, 0.0};
  Vec hi{1.0, 1.0};
  double h = 0.05;

  double t0 = -1.0;  // < 0: problem-dependent default (Barenblatt recipe, else 0)
  double T = -1.0;
  int steps = 0;      // uniform schedule; ignored when dt or dt_schedule given
  double dt = 0.0;    // uniform step size; 0 means "derive from steps"
  std::vector<double> dt_schedule;

  // Defaults mirror XmeshOptions; keep the two in sync.
  double outer_tol = 1e-10;
  double newton_tol = 1e-12;
  double eta_tol_rel = 1e-9;
  double alpha = 0.6;
  int max_outer = 100;
  int max_newton = 50;

  int snapshot_every = 0;  // 0: no snapshots
  std::string metrics_path;
  std::string snapshot_dir;

  double effective_theta() const;
  double start_time() const;
  std::vector<double> dt_list() const;
  XmeshOptions xmesh_options() const;
};

// Throws std::invalid_argument on malformed input or unknown keys.
ExperimentSpec parse_spec(std::istream& in);
ExperimentSpec parse_spec_file(const std::string& path);

Mesh build_spec_mesh(const ExperimentSpec& spec);

// Nodal interpolation of the problem's closed-form initial condition; nodes
// outside the support are exactly 0.
NodalField make_initial_condition(const ExperimentSpec& spec, const Mesh& mesh);

// Closed-form solution for problems that have one (Barenblatt, the
// manufactured smooth case); empty otherwise.
std::function<double(const Vec&, double)> exact_solution(const ExperimentSpec& spec);

struct RunResult {
  Mesh mesh;
  std::vector<TimeState> states;    // initial state first
  std::vector<StepReport> reports;  // one per step
  std::vector<double> masses;       // per state
  std::vector<double> fr;           // per state; NaN when no analytic radius
  std::vector<double> min_u;        // per state
  double measured_tw = std::numeric_limits<double>::quiet_NaN();
  double min_interface_displacement = 0.0;  // most retrograde motion seen (1D)
  std::string error;                        // non-empty if a step aborted the run

  bool ok() const { return error.empty(); }
};

RunResult run_simulation(const ExperimentSpec& spec);

// Connected components of `member` nodes in the mesh adjacency graph.
int count_components(const Mesh& mesh, const std::vector<char>& member);
int positive_phase_components(const Mesh& mesh, const NodalField& U);
int interface_components(const Mesh& mesh, const NodalField& U);

// Metrics CSV: t,step,xmesh_iters,mass,mass_rel_var,f_r,min_U,flattened_count
// with shortest round-trip number formatting (byte-stable across reruns).
void write_metrics_csv(std::ostream& os, const RunResult& result);
// Flat JSON summary footer (final mass variation, max f_r, flattened count,
// measured waiting time when applicable).
std::string summary_json(const RunResult& result);

struct StudyRow {
  double h = 0.0;
  double l2_error = 0.0;
};
struct StudyResult {
  std::vector<StudyRow> rows;
  double fitted_rate = 0.0;  // least-squares slope of log(error) vs log(h)
};

// Re-runs the spec across mesh sizes with dt scaled proportionally to h.
StudyResult convergence_study(const ExperimentSpec& spec_template,
                              const std::vector<double>& h_values);

}  // namespace pme

#endif
