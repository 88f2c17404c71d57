// Experiment runner. Subcommands:
//   run <spec>            execute one simulation, write metrics and snapshots
//   study <spec> --h ...  mesh-refinement study with dt scaled with h
//   toy1d ...             the 4-node transport benchmark
// Exit codes: 0 ok, 1 solver failure, 2 bad input.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pme/experiment.hpp"
#include "pme/toy1d.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSolver = 1;
constexpr int kExitBadInput = 2;

std::filesystem::path output_root() {
  if (const char* root = std::getenv("PME_OUTPUT_ROOT")) return root;
  return ".";
}

std::filesystem::path resolve_output(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p;
  return output_root() / p;
}

int cmd_run(const std::string& spec_path) {
  pme::ExperimentSpec spec;
  try {
    spec = pme::parse_spec_file(spec_path);
  } catch (const std::exception& ex) {
    std::cerr << "spec error: " << ex.what() << "\n";
    return kExitBadInput;
  }

  pme::RunResult result = pme::run_simulation(spec);

  if (!spec.metrics_path.empty()) {
    auto path = resolve_output(spec.metrics_path);
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream os(path);
    if (!os) {
      std::cerr << "cannot write metrics to " << path << "\n";
      return kExitBadInput;
    }
    pme::write_metrics_csv(os, result);
  } else {
    pme::write_metrics_csv(std::cout, result);
  }

  if (spec.snapshot_every > 0 && !spec.snapshot_dir.empty()) {
    auto dir = resolve_output(spec.snapshot_dir);
    std::filesystem::create_directories(dir);
    for (size_t i = 0; i < result.states.size(); i += spec.snapshot_every) {
      const auto& s = result.states[i];
      std::ofstream os(dir / ("state_" + std::to_string(i) + ".txt"));
      pme::write_snapshot(os, result.mesh, s.X, s.t, {{"u", &s.U}});
    }
  }

  std::cout << pme::summary_json(result) << "\n";
  if (!result.ok()) {
    std::cerr << "run aborted: " << result.error << "\n";
    return kExitSolver;
  }
  return kExitOk;
}

int cmd_study(const std::string& spec_path, const std::vector<double>& h_values) {
  pme::ExperimentSpec spec;
  try {
    spec = pme::parse_spec_file(spec_path);
  } catch (const std::exception& ex) {
    std::cerr << "spec error: " << ex.what() << "\n";
    return kExitBadInput;
  }
  if (h_values.empty()) {
    std::cerr << "study needs at least one --h value\n";
    return kExitBadInput;
  }

  pme::StudyResult study;
  try {
    study = pme::convergence_study(spec, h_values);
  } catch (const std::invalid_argument& ex) {
    std::cerr << "study error: " << ex.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& ex) {
    std::cerr << "study failed: " << ex.what() << "\n";
    return kExitSolver;
  }

  std::cout << "h,l2_error\n";
  for (const auto& row : study.rows) std::cout << row.h << "," << row.l2_error << "\n";
  std::cout << "fitted_rate," << study.fitted_rate << "\n";
  return kExitOk;
}

int cmd_toy1d(double a, double b, double v, double dt, const std::string& model) {
  pme::ToySetup setup;
  setup.a = a;
  setup.b = b;
  setup.v = v;
  setup.dt = dt;
  if (model == "same_node") {
    setup.velocity_model = pme::VelocityModel::SameNode;
  } else if (model == "target_shifted") {
    setup.velocity_model = pme::VelocityModel::TargetShifted;
  } else {
    std::cerr << "unknown velocity model: " << model << "\n";
    return kExitBadInput;
  }

  try {
    pme::ToySolution sol = pme::solve_toy(setup);
    std::cout << "U1=" << sol.U1 << " dx=" << sol.dx << " iters=" << sol.newton_iters << "\n";
  } catch (const std::invalid_argument& ex) {
    std::cerr << ex.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& ex) {
    std::cerr << ex.what() << "\n";
    return kExitSolver;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-element porous-medium solver with interface-tracking mesh deformation"};
  app.require_subcommand(1);

  std::string spec_path;
  auto* run = app.add_subcommand("run", "execute one simulation from a spec file");
  run->add_option("spec", spec_path, "spec file path")->required();

  std::string study_path;
  std::vector<double> h_values;
  auto* study = app.add_subcommand("study", "mesh-refinement study");
  study->add_option("spec", study_path, "spec template path")->required();
  study->add_option("--h", h_values, "mesh sizes to sweep");

  double a = 1.0, b = 0.0, v = 1.0, dt = 0.1;
  std::string model = "same_node";
  auto* toy = app.add_subcommand("toy1d", "4-node transport benchmark");
  toy->add_option("--a", a, "left slope");
  toy->add_option("--b", b, "right slope (0: one-phase)");
  toy->add_option("--v", v, "transport speed");
  toy->add_option("--dt", dt, "time step");
  toy->add_option("--model", model, "same_node or target_shifted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (run->parsed()) return cmd_run(spec_path);
    if (study->parsed()) return cmd_study(study_path, h_values);
    if (toy->parsed()) return cmd_toy1d(a, b, v, dt, model);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitSolver;
  }
  return kExitBadInput;
}
