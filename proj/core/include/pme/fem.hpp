#ifndef PME_FEM_HPP
#define PME_FEM_HPP

#include <unordered_map>
#include <vector>

#include <Eigen/SparseCore>

#include "pme/mesh.hpp"

namespace pme {

// Converged solution of one time step: nodal values, node coordinates, time.
struct TimeState {
  NodalField U;
  std::vector<Vec> X;
  double t = 0.0;
};

enum class VelocityModel {
  SameNode,       // W^p = (X_new(p) - X_prev(p)) / dt for every node
  TargetShifted,  // empty-region nodes use X_prev(q_p^0) instead of X_prev(p)
};

// Per-step parameters of the ALE theta-scheme residual.
struct StepContext {
  double theta = 0.5;
  double dt = 0.0;
  double m = 1.0;
  double kappa = 1.0;
  VelocityModel velocity_model = VelocityModel::TargetShifted;
  // Targets q_p^0 recorded on the initial-guess mesh; absent entry means
  // q_p^0 = p.
  std::unordered_map<int, int> targets_q0;
  // Flag per node: p in Q_{u_n} (nodal value exactly 0 at t_n).
  std::vector<char> empty_region;

  bool in_empty_region(int p) const {
    return !empty_region.empty() && empty_region[p] != 0;
  }
};

// Interval-constant mesh velocity of node p for the move X_prev -> X_new.
Vec mesh_velocity(const StepContext& ctx, const std::vector<Vec>& X_prev,
                  const std::vector<Vec>& X_new, int p);

// Residual of the theta-scheme weak form, one entry per basis function:
//   r_i = (u_{n+1}, phi_i)_{X_new} - (u_n, phi_i)_{X_prev}
//       + dt*theta  *[ (kappa|u_{n+1}|^m grad u_{n+1} + u_{n+1} w, grad phi_i) ]_{X_new}
//       + dt*(1-th) *[ (kappa|u_n|^m grad u_n + u_n w, grad phi_i) ]_{X_prev}
// Homogeneous Neumann conditions are natural (no boundary rows).
// Throws "inverted mesh" on a negative element measure.
NodalField assemble_residual(const Mesh& mesh, const StepContext& ctx,
                             const TimeState& prev, const NodalField& U_new,
                             const std::vector<Vec>& X_new);

// d r_i / d U_new^j, same sparsity as the node adjacency.
Eigen::SparseMatrix<double> assemble_jacobian(const Mesh& mesh, const StepContext& ctx,
                                              const TimeState& prev, const NodalField& U_new,
                                              const std::vector<Vec>& X_new);

// Single residual entry r_p, integrating only the patch of elements around p.
// Unlike assemble_residual this tolerates inverted elements (signed-measure
// integration) so it stays continuous while scanning candidate node
// positions.
double residual_entry(const Mesh& mesh, const StepContext& ctx, const TimeState& prev,
                      const NodalField& U_new, const std::vector<Vec>& X_new, int p);

// Exact integral of the P1 interpolant of U over the mesh at coordinates X.
double integrate_field(const Mesh& mesh, const std::vector<Vec>& X, const NodalField& U);
double integrate_field(const Mesh& mesh, const NodalField& U);

}  // namespace pme

#endif
