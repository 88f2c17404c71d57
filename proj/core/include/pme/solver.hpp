#ifndef PME_SOLVER_HPP
#define PME_SOLVER_HPP

#include <map>

#include <Eigen/SparseCore>

#include "pme/fem.hpp"
#include "pme/mesh.hpp"

namespace pme {

// Result of a non-negativity-constrained Newton solve at fixed mesh.
// Nodes in the active set carry a strictly positive multiplier and are pinned
// to exactly 0; the mass gap of the solve equals the multiplier sum.
struct ConstrainedSolution {
  NodalField U;
  std::map<int, double> lambda;
  int newton_iters = 0;
  bool converged = false;
  double final_eps = 0.0;
};

struct NewtonOptions {
  double tol = 1e-12;
  int max_iters = 50;
  // false: plain Newton on the unconstrained residual (baseline mode), the
  // active set machinery is disabled and negative values pass through.
  bool enforce_nonnegative = true;
  // false: on budget exhaustion return the best iterate seen (converged set
  // to false) instead of throwing. The active set can cycle on a mesh caught
  // mid-update; the caller's next mesh update usually breaks the cycle.
  bool throw_on_divergence = true;
};

// Active-set Newton-Raphson for the nonlinear step residual. The first
// iteration runs unconstrained; afterwards D = {i | U^i < 0 or lambda^i > 0}
// (strict comparisons). Multipliers are recovered as the residual values at
// the pinned rows. Throws "newton diverged" past max_iters and "singular
// system" on a failed factorization.
ConstrainedSolution solve_constrained(const Mesh& mesh, const StepContext& ctx,
                                      const TimeState& prev, const std::vector<Vec>& X_new,
                                      const NodalField& U_guess, const NewtonOptions& opts);

// Direct sparse solve (LU). Throws "singular system".
Eigen::VectorXd solve_linear(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b);

}  // namespace pme

#endif
