#ifndef PME_XMESH_HPP
#define PME_XMESH_HPP

#include <optional>
#include <unordered_map>
#include <vector>

#include "pme/fem.hpp"
#include "pme/mesh.hpp"
#include "pme/solver.hpp"

namespace pme {

// The frozen interface description of one time step: the empty-region nodes
// adjacent to the phase, computed once and kept for all mesh updates.
struct InterfacePlan {
  std::vector<int> gamma_nodes;
  bool frozen = false;
};

struct StepReport {
  int xmesh_iters = 0;
  double final_residual = 0.0;
  bool lagrange_active_at_end = false;
  double mass_before = 0.0;
  double mass_after = 0.0;
  int flattened_elements = 0;
  int nonmonotone_eta = 0;  // bisections whose coarse scan saw >1 sign change
};

struct XmeshOptions {
  double theta = 0.5;
  double m = 1.0;
  double kappa = 1.0;
  VelocityModel velocity_model = VelocityModel::TargetShifted;
  // On R scaled by the previous state's mass. Every surviving multiplier is
  // bounded by the converged R, and their sum is the step's mass drift, so
  // this tolerance directly budgets mass conservation over a run.
  double outer_tol = 1e-10;
  double newton_tol = 1e-12;
  int max_outer = 100;
  int max_newton = 50;
  double alpha = 0.6;  // displacement cap on eta
  // Bisection tolerance relative to h. Interface nodes must land on their
  // residual roots to far below outer_tol or the multipliers never vanish
  // and the outer loop floors out above tolerance.
  double eta_tol_rel = 1e-9;
  bool reset_to_reference = true;  // start each step from the reference mesh
};

// Splits nodes on sign(U): gamma nodes are the U<=0 nodes adjacent to a U>0
// node. Throws "phase vanished" when no node is positive. A nonzero
// positive_floor treats values at or below it as empty, which filters the
// tiny mass dribble a converged state carries outside the phase.
InterfacePlan localize_interface(const Mesh& mesh, const NodalField& U,
                                 double positive_floor = 0.0);

struct EtaResult {
  double eta = 0.0;
  bool nonmonotone = false;
  // True when no root exists but the residual still falls toward eta = 1:
  // the returned eta is the profile minimum, not a balance point.
  bool descent = false;
};

// Root of r(phi_p) along the edge p -> j, with U^p forced to 0. Returns
// nullopt when the endpoint residuals share a sign.
std::optional<EtaResult> solve_eta(const Mesh& mesh, const StepContext& ctx,
                                   const TimeState& prev, const NodalField& U, int p, int j,
                                   const std::vector<Vec>& X, double tol_eta);

struct UpdateStats {
  int flattened = 0;
  int nonmonotone = 0;
  int descents = 0;        // moves taken at the profile minimum, not a root
  int member_targets = 0;  // moves whose target is a fellow interface node
  // Chosen target per gamma node (only nodes with a non-empty candidate set).
  std::unordered_map<int, int> targets;
};

// One interface-update pass: per gamma node, gather candidate translations
// toward its non-interface neighbors, pick the minimal-norm one, cap by
// alpha, then apply moves node-by-node with inverted-element repair after
// each. All candidates are computed from the same input coordinates.
// member_fallback (optional, per-node) admits fellow interface nodes as
// fallback targets for the flagged nodes; meant for deadlocked nodes only.
std::vector<Vec> update_interface(const Mesh& mesh, const InterfacePlan& plan,
                                  const StepContext& ctx, const TimeState& prev,
                                  const NodalField& U, const std::vector<Vec>& X,
                                  const XmeshOptions& opts, UpdateStats& stats,
                                  const std::vector<char>* member_fallback = nullptr);

// One full time step of the mesh-deforming fixed point: solve on the initial
// guess mesh, freeze the interface node set, then alternate interface updates
// and constrained solves until the multiplier-free residual norm meets the
// tolerance. Throws "xmesh stalled" past max_outer.
std::pair<TimeState, StepReport> xmesh_step(const Mesh& mesh, const TimeState& prev, double dt,
                                            const XmeshOptions& opts);

// Classical fixed-mesh step: plain Newton on the signed PME, no constraints,
// no mesh motion.
TimeState baseline_step(const Mesh& mesh, const TimeState& prev, double dt,
                        const XmeshOptions& opts);

}  // namespace pme

#endif
