#include "pme/xmesh.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pme {

InterfacePlan localize_interface(const Mesh& mesh, const NodalField& U, double positive_floor) {
  InterfacePlan plan;
  bool any_positive = false;
  for (int p = 0; p < mesh.num_nodes(); ++p) {
    if (U[p] > positive_floor) {
      any_positive = true;
      continue;
    }
    for (int j : mesh.node_neighbors(p)) {
      if (U[j] > positive_floor) {
        plan.gamma_nodes.push_back(p);
        break;
      }
    }
  }
  if (!any_positive) throw std::runtime_error("phase vanished");
  plan.frozen = true;
  return plan;
}

namespace {

double eta_residual(const Mesh& mesh, const StepContext& ctx, const TimeState& prev,
                    const NodalField& U_tilde, std::vector<Vec>& X, int p, const Vec& base,
                    const Vec& v, double eta) {
  X[p] = base + eta * v;
  double r = residual_entry(mesh, ctx, prev, U_tilde, X, p);
  X[p] = base;
  return r;
}

}  // namespace

std::optional<EtaResult> solve_eta(const Mesh& mesh, const StepContext& ctx,
                                   const TimeState& prev, const NodalField& U, int p, int j,
                                   const std::vector<Vec>& X, double tol_eta) {
  NodalField U_tilde = U;
  U_tilde[p] = 0.0;
  std::vector<Vec> Xw = X;
  const Vec base = X[p];
  const Vec v = X[j] - X[p];
  const double vlen = norm(v);
  if (vlen == 0.0) return std::nullopt;

  auto eval = [&](double eta) {
    double r = eta_residual(mesh, ctx, prev, U_tilde, Xw, p, base, v, eta);
    if (std::isnan(r)) throw std::runtime_error("invalid patch");
    return r;
  };

  // Coarse scan: picks the bracket nearest eta = 0. The residual can jump
  // when a patch element flattens, so interior sign changes count even when
  // the endpoints agree in sign. The last point stops just short of eta = 1:
  // toward a positive node the collapsing elements drive the flux term hard
  // negative (up to the measure bound), and sampling short of coincidence
  // keeps the patch geometry well defined.
  constexpr int kScan = 8;
  static constexpr double kEtaMax = 1.0 - 1e-6;
  auto scan_pt = [](int i) { return std::min(static_cast<double>(i) / kScan, kEtaMax); };
  double rv[kScan + 1];
  for (int i = 0; i <= kScan; ++i) rv[i] = eval(scan_pt(i));

  // An identically zero profile means the patch carries no phase at all;
  // there is no crossing to find and no move to make.
  if (std::all_of(rv, rv + kScan + 1, [](double r) { return r == 0.0; }))
    return std::nullopt;

  int changes = 0, first = -1;
  for (int i = 0; i < kScan; ++i) {
    if ((rv[i] > 0.0) != (rv[i + 1] > 0.0) || rv[i] == 0.0) {
      ++changes;
      if (first < 0) first = i;
    }
  }
  if (first < 0) {
    if (rv[kScan] == 0.0) return EtaResult{kEtaMax, false};
    // No crossing, but the profile of a node with excess (r(0) > 0) nearly
    // reaches zero at the far end: the root lies just past the edge, so the
    // node merges onto the neighbor and the next solve sheds the remainder.
    // A mild decline does not qualify; merging on one would park the node at
    // a position far from any balance point.
    if (rv[0] > 0.0 && rv[kScan] < 0.2 * rv[0]) {
      EtaResult d;
      d.eta = kEtaMax;
      d.descent = true;
      return d;
    }
    return std::nullopt;
  }
  EtaResult res;
  res.nonmonotone = changes > 1;
  double a = scan_pt(first);
  double b = scan_pt(first + 1);
  double ra = rv[first];
  if (ra == 0.0) {
    res.eta = a;
    return res;
  }

  const double tol_interval = tol_eta / vlen;
  for (int it = 0; it < 60 && (b - a) > tol_interval; ++it) {
    double mid = 0.5 * (a + b);
    double rm = eval(mid);
    if (rm == 0.0) {
      a = b = mid;
      break;
    }
    if ((rm > 0.0) == (ra > 0.0)) {
      a = mid;
      ra = rm;
    } else {
      b = mid;
    }
  }
  res.eta = 0.5 * (a + b);
  return res;
}

std::vector<Vec> update_interface(const Mesh& mesh, const InterfacePlan& plan,
                                  const StepContext& ctx, const TimeState& prev,
                                  const NodalField& U, const std::vector<Vec>& X,
                                  const XmeshOptions& opts, UpdateStats& stats,
                                  const std::vector<char>* member_fallback) {
  std::vector<char> in_gamma(mesh.num_nodes(), 0);
  for (int p : plan.gamma_nodes) in_gamma[p] = 1;

  const double tol_eta = opts.eta_tol_rel * mesh.mesh_size();
  struct Move {
    int p, target;
    Vec v;
  };
  std::vector<Move> moves;

  // Candidate displacements are all computed from the same input coordinates.
  for (int p : plan.gamma_nodes) {
    double best_norm = 0.0;
    int best_j = -1;
    double best_eta = 0.0;
    bool best_descent = false;
    // Non-member neighbors are the normal targets. Where the member set runs
    // two rings deep a node can have roots only toward fellow members; those
    // are admitted as a second choice, but only for nodes flagged as
    // deadlocked, since members are themselves in motion and moving onto
    // them too eagerly piles nodes up at arbitrary positions.
    const int passes = (member_fallback && (*member_fallback)[p]) ? 2 : 1;
    for (int pass = 0; pass < passes && best_j < 0; ++pass) {
      for (int j : mesh.node_neighbors(p)) {
        if (in_gamma[j] != pass) continue;
        auto res = solve_eta(mesh, ctx, prev, U, p, j, X, tol_eta);
        if (!res) continue;
        if (res->nonmonotone) ++stats.nonmonotone;
        double len = res->eta * norm(X[j] - X[p]);
        if (best_j < 0 || len < best_norm) {
          best_norm = len;
          best_j = j;
          best_eta = res->eta;
          best_descent = res->descent;
        }
      }
    }
    if (best_j < 0) continue;
    if (best_descent) ++stats.descents;
    if (in_gamma[best_j]) ++stats.member_targets;
    stats.targets[p] = best_j;
    double eta_eff = std::min({best_eta, opts.alpha, 0.999});
    moves.push_back({p, best_j, eta_eff * (X[best_j] - X[p])});
  }

  std::vector<Vec> X_out = X;
  for (const auto& mv : moves) {
    X_out[mv.p] = X_out[mv.p] + mv.v;
    auto flat = fix_inverted_elements(mesh, X_out, mv.p, mv.target);
    stats.flattened += static_cast<int>(flat.size());
  }
  return X_out;
}

namespace {

double outer_residual(const Mesh& mesh, const StepContext& ctx, const TimeState& prev,
                      const NodalField& U, const std::vector<Vec>& X) {
  auto r = assemble_residual(mesh, ctx, prev, U, X);
  double s = 0.0;
  for (double v : r) s += v * v;
  return std::sqrt(s);
}

StepContext make_context(const TimeState& prev, double dt, const XmeshOptions& opts) {
  StepContext ctx;
  ctx.theta = opts.theta;
  ctx.dt = dt;
  ctx.m = opts.m;
  ctx.kappa = opts.kappa;
  ctx.velocity_model = opts.velocity_model;
  ctx.empty_region.assign(prev.U.size(), 0);
  for (size_t i = 0; i < prev.U.size(); ++i)
    if (prev.U[i] == 0.0) ctx.empty_region[i] = 1;
  return ctx;
}

}  // namespace

std::pair<TimeState, StepReport> xmesh_step(const Mesh& mesh, const TimeState& prev, double dt,
                                            const XmeshOptions& opts) {
  StepContext ctx = make_context(prev, dt, opts);
  StepReport report;
  report.mass_before = integrate_field(mesh, prev.X, prev.U);

  // Divergence is tolerated mid-step: the active set can cycle on a mesh
  // caught mid-update, and the next interface update usually breaks the
  // cycle. Acceptance still requires the full residual to meet the tolerance.
  NewtonOptions nopts{opts.newton_tol, opts.max_newton, true, false};
  const double tol_scaled = opts.outer_tol * std::max(report.mass_before, 1e-300);

  std::vector<Vec> X = opts.reset_to_reference ? mesh.ref_coords() : prev.X;
  auto sol = solve_constrained(mesh, ctx, prev, X, prev.U, nopts);
  // The floor keeps the mass dribble a solve leaves outside the phase (many
  // decades below genuine interface-ring values) from inflating the node set
  // into a band several rings thick, which would starve its members of
  // non-member targets to move toward.
  double u0max = 0.0;
  for (double v : sol.U) u0max = std::max(u0max, v);
  InterfacePlan plan = localize_interface(mesh, sol.U, 1e-6 * u0max);
  std::vector<char> in_plan(mesh.num_nodes(), 0);
  for (int p : plan.gamma_nodes) in_plan[p] = 1;

  double R = outer_residual(mesh, ctx, prev, sol.U, X);
  int k = 0;
  int k_last_extend = 0;
  std::vector<char> member_fallback;  // non-empty for one pass after a deadlock
  while (R > tol_scaled) {
    if (k >= opts.max_outer) {
      report.xmesh_iters = k;
      report.final_residual = R;
      report.lagrange_active_at_end = !sol.lambda.empty();
      std::ostringstream msg;
      msg << "xmesh stalled (R=" << R << ")";
      throw std::runtime_error(msg.str());
    }
    UpdateStats stats;
    X = update_interface(mesh, plan, ctx, prev, sol.U, X, opts, stats,
                         member_fallback.empty() ? nullptr : &member_fallback);
    member_fallback.clear();
    if (ctx.velocity_model == VelocityModel::TargetShifted)
      for (const auto& [p, q] : stats.targets)
        ctx.targets_q0.emplace(p, q);  // q_p^0 from the node's first update pass
    report.flattened_elements += stats.flattened;
    report.nonmonotone_eta += stats.nonmonotone;

    sol = solve_constrained(mesh, ctx, prev, X, sol.U, nopts);
    double R_new = outer_residual(mesh, ctx, prev, sol.U, X);
    ++k;

    // A plateau with pinned nodes outside the interface set means the set was
    // localized one ring too far out: the solution on the initial-guess mesh
    // spreads past the true support whenever the interface moves much less
    // than h in one step. Those nodes sit on the interface in all but name,
    // so they join the set and get moved onto it like any other member.
    if (R_new > tol_scaled && R_new > 0.9 * R && k - k_last_extend >= 2) {
      // Only nodes right against the bulk of the phase qualify; stray pinned
      // nodes further out carry multipliers fed by mass dribble, not by a
      // misplaced interface, and clear once the genuine misfit is fixed.
      double umax = 0.0;
      for (double v : sol.U) umax = std::max(umax, v);
      const double bulk = 1e-3 * umax;
      // R collects several multipliers, so a node can hold the iteration
      // above tolerance with a multiplier somewhat below it; the per-node
      // threshold sits below the convergence threshold accordingly.
      const double lam_floor = 0.1 * tol_scaled;
      bool extended = false;
      for (const auto& [i, l] : sol.lambda) {
        if (l <= lam_floor || in_plan[i]) continue;
        bool against_bulk = false;
        for (int j : mesh.node_neighbors(i))
          if (sol.U[j] > bulk) {
            against_bulk = true;
            break;
          }
        if (against_bulk) {
          plan.gamma_nodes.push_back(i);
          in_plan[i] = 1;
          extended = true;
        }
      }
      // No candidates is not by itself a stall: the residual can bounce for a
      // pass or two while nodes settle. Before giving up, flag the members
      // still carrying a multiplier for a one-pass member-to-member move,
      // which unsticks nodes whose only roots lie toward fellow members. The
      // iteration budget is the backstop.
      if (extended) {
        std::sort(plan.gamma_nodes.begin(), plan.gamma_nodes.end());
        k_last_extend = k;
      } else {
        member_fallback.assign(mesh.num_nodes(), 0);
        bool any = false;
        for (const auto& [i, l] : sol.lambda)
          if (l > lam_floor && in_plan[i]) {
            member_fallback[i] = 1;
            any = true;
          }
        if (!any) member_fallback.clear();
        k_last_extend = k;
      }
    }
    R = R_new;
  }

  report.xmesh_iters = k;
  report.final_residual = R;
  // Multipliers at or below the converged residual are within the mass budget
  // the tolerance already grants; only larger ones count as active.
  report.lagrange_active_at_end = false;
  for (const auto& [i, l] : sol.lambda)
    if (l > tol_scaled) report.lagrange_active_at_end = true;

  TimeState next{std::move(sol.U), std::move(X), prev.t + dt};
  report.mass_after = integrate_field(mesh, next.X, next.U);
  return {std::move(next), report};
}

TimeState baseline_step(const Mesh& mesh, const TimeState& prev, double dt,
                        const XmeshOptions& opts) {
  StepContext ctx = make_context(prev, dt, opts);
  ctx.velocity_model = VelocityModel::SameNode;  // fixed mesh, w = 0
  NewtonOptions nopts{opts.newton_tol, opts.max_newton, false};
  auto sol = solve_constrained(mesh, ctx, prev, prev.X, prev.U, nopts);
  return TimeState{std::move(sol.U), prev.X, prev.t + dt};
}

}  // namespace pme
