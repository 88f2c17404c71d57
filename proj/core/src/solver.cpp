#include "pme/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <Eigen/SparseLU>

namespace pme {

namespace {

Eigen::VectorXd try_lu(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b, bool& ok) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success) {
    ok = false;
    return {};
  }
  Eigen::VectorXd x = lu.solve(b);
  ok = lu.info() == Eigen::Success && x.allFinite();
  if (!ok) return x;
  // One pass of iterative refinement. The factorization noise left in the
  // residual rows otherwise floors the outer iteration of a deforming-mesh
  // step above its tolerance once the system grows to a few thousand rows.
  Eigen::VectorXd r = b - A * x;
  Eigen::VectorXd dx = lu.solve(r);
  if (lu.info() == Eigen::Success && dx.allFinite()) x += dx;
  return x;
}

}  // namespace

Eigen::VectorXd solve_linear(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b) {
  bool ok = false;
  Eigen::VectorXd x = try_lu(A, b, ok);
  if (ok) return x;
  // Exactly coincident nodes (a flattening repair can snap one node onto
  // another) make two rows exactly dependent. A diagonal shift far below the
  // assembly scale restores a factorizable system without moving the solution
  // beyond solver noise.
  double scale = 0.0;
  for (int c = 0; c < A.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, c); it; ++it)
      scale = std::max(scale, std::abs(it.value()));
  Eigen::SparseMatrix<double> eye(A.rows(), A.cols());
  eye.setIdentity();
  for (double rel = 1e-12; rel <= 1e-8; rel *= 100.0) {
    Eigen::SparseMatrix<double> shifted = A + (rel * scale) * eye;
    x = try_lu(shifted, b, ok);
    if (ok) return x;
  }
  throw std::runtime_error("singular system");
}

namespace {

std::vector<int> active_set(const NodalField& U, const std::map<int, double>& lambda) {
  std::vector<int> D;
  for (int i = 0; i < static_cast<int>(U.size()); ++i)
    if (U[i] < 0.0) D.push_back(i);
  for (const auto& [i, l] : lambda)
    if (l > 0.0) D.push_back(i);
  std::sort(D.begin(), D.end());
  D.erase(std::unique(D.begin(), D.end()), D.end());
  return D;
}

}  // namespace

ConstrainedSolution solve_constrained(const Mesh& mesh, const StepContext& ctx,
                                      const TimeState& prev, const std::vector<Vec>& X_new,
                                      const NodalField& U_guess, const NewtonOptions& opts) {
  const int n = mesh.num_nodes();
  NodalField U = U_guess;
  std::map<int, double> lambda;
  std::set<std::vector<int>> seen_sets;
  double eps = std::numeric_limits<double>::infinity();
  ConstrainedSolution best;
  best.final_eps = std::numeric_limits<double>::infinity();

  for (int j = 0; j < opts.max_iters; ++j) {
    std::vector<int> D;
    if (opts.enforce_nonnegative && j > 0) D = active_set(U, lambda);

    bool damp = !seen_sets.insert(D).second && j > 1;

    auto H = assemble_jacobian(mesh, ctx, prev, U, X_new);
    auto G = assemble_residual(mesh, ctx, prev, U, X_new);

    Eigen::VectorXd Uj = Eigen::Map<const Eigen::VectorXd>(U.data(), n);
    Eigen::VectorXd rhs = H * Uj - Eigen::Map<const Eigen::VectorXd>(G.data(), n);

    // Reduced system: pinned rows become identity rows with zero right-hand
    // side, which is algebraically the H^FF block solve.
    Eigen::SparseMatrix<double, Eigen::RowMajor> Hrow = H;
    for (int i : D) {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Hrow, i); it; ++it)
        it.valueRef() = (it.col() == i) ? 1.0 : 0.0;
      rhs(i) = 0.0;
    }
    Eigen::SparseMatrix<double> A = Hrow;
    Eigen::VectorXd Unext;
    // A diverging iterate can overflow the assembly and leave nothing to
    // factorize; in tolerant mode that ends the solve at the best iterate.
    try {
      Unext = solve_linear(A, rhs);
    } catch (const std::runtime_error&) {
      if (!opts.throw_on_divergence && std::isfinite(best.final_eps)) return best;
      throw;
    }

    if (damp) Unext = Uj + 0.5 * (Unext - Uj);
    for (int i : D) Unext(i) = 0.0;

    // Backtracking on the free-row residual norm. The active set can keep
    // reshuffling without ever repeating exactly, in which case full steps
    // feed on each other and blow up; the best of the halved steps keeps the
    // iteration bounded without affecting converging passes.
    const double eps_prev = eps;
    NodalField U_best;
    std::vector<double> r_best;
    double eps_best = std::numeric_limits<double>::infinity();
    double step = 1.0;
    for (int bt = 0; bt < 4; ++bt, step *= 0.5) {
      Eigen::VectorXd Ut = Uj + step * (Unext - Uj);
      for (int i : D) Ut(i) = 0.0;
      NodalField U_trial(Ut.data(), Ut.data() + n);
      auto r = assemble_residual(mesh, ctx, prev, U_trial, X_new);
      double e2 = 0.0;
      for (int i = 0; i < n; ++i)
        if (!std::binary_search(D.begin(), D.end(), i)) e2 += r[i] * r[i];
      double e = std::sqrt(e2);
      if (!std::isfinite(e)) e = std::numeric_limits<double>::infinity();
      // bt == 0 seeds the best trial so a run of NaN residuals still leaves
      // a defined iterate; the divergence handling cleans up afterwards.
      if (bt == 0 || e < eps_best) {
        eps_best = e;
        U_best = std::move(U_trial);
        r_best = std::move(r);
      }
      if (e <= eps_prev) break;
    }
    U = std::move(U_best);
    auto& r = r_best;

    lambda.clear();
    for (int i : D) lambda[i] = r[i];
    eps = eps_best;

    bool ok = eps <= opts.tol;
    if (ok && opts.enforce_nonnegative) {
      // Negatives below the solver tolerance are factorization noise in the
      // empty region, not constraint violations; chasing them stalls Newton.
      for (int i = 0; i < n && ok; ++i)
        if (U[i] < -opts.tol) ok = false;
      for (const auto& [i, l] : lambda)
        if (l < -opts.tol) ok = false;
    }
    if (ok) {
      // Magnitudes below the solver tolerance are factorization noise; the
      // interface logic relies on exact zeros in the empty region.
      if (opts.enforce_nonnegative)
        for (int i = 0; i < n; ++i)
          if (U[i] < opts.tol) U[i] = 0.0;
      // A pinned node whose multiplier has converged to a non-positive value
      // has left the active set; it stays at exactly 0 with no multiplier.
      std::erase_if(lambda, [](const auto& kv) { return kv.second <= 0.0; });
      return ConstrainedSolution{std::move(U), std::move(lambda), j + 1, true, eps};
    }
    if (eps < best.final_eps) {
      best.U = U;
      best.lambda = lambda;
      best.newton_iters = j + 1;
      best.final_eps = eps;
    }
  }
  if (!opts.throw_on_divergence) return best;
  std::ostringstream msg;
  msg << "newton diverged (eps=" << eps << ")";
  throw std::runtime_error(msg.str());
}

}  // namespace pme
