#include "pme/fem.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Sparse>

namespace pme {

namespace {

struct QuadPoint {
  double w;
  std::array<double, 3> bary;
};

// Degree-4 exact rules (3-point Gauss in 1D, 6-point symmetric rule on the
// triangle); weights sum to 1 and multiply the element measure.
const QuadPoint kQuad1D[] = {
    {5.0 / 18.0, {0.5 * (1.0 - std::sqrt(0.6)), 0.5 * (1.0 + std::sqrt(0.6)), 0.0}},
    {8.0 / 18.0, {0.5, 0.5, 0.0}},
    {5.0 / 18.0, {0.5 * (1.0 + std::sqrt(0.6)), 0.5 * (1.0 - std::sqrt(0.6)), 0.0}},
};

constexpr double kTriA1 = 0.816847572980459, kTriB1 = 0.091576213509771;
constexpr double kTriA2 = 0.108103018168070, kTriB2 = 0.445948490915965;
constexpr double kTriW1 = 0.109951743655322, kTriW2 = 0.223381589678011;
const QuadPoint kQuad2D[] = {
    {kTriW1, {kTriA1, kTriB1, kTriB1}}, {kTriW1, {kTriB1, kTriA1, kTriB1}},
    {kTriW1, {kTriB1, kTriB1, kTriA1}}, {kTriW2, {kTriA2, kTriB2, kTriB2}},
    {kTriW2, {kTriB2, kTriA2, kTriB2}}, {kTriW2, {kTriB2, kTriB2, kTriA2}},
};

struct ElementGeometry {
  double measure;      // true signed measure, used for inversion detection
  double measure_eff;  // clamped from below, used for quadrature
  std::array<Vec, 3> grad;  // constant P1 basis gradients (clamped measure)
};

// Flattened elements stay in the weak form: their measure (the Jacobian
// determinant) is bounded from below, which turns them into stiff couplings
// between the nodes they pile onto the interface instead of decoupled
// degrees of freedom. The bound is chosen large enough that the resulting
// matrix entries stay within direct-solver accuracy at the solver tolerance.
ElementGeometry element_geometry(const Mesh& mesh, const std::vector<Vec>& X, int e) {
  const auto& el = mesh.element(e);
  const double clamp = 1e-6 * std::pow(mesh.mesh_size(), mesh.dim());
  ElementGeometry g{};
  if (mesh.dim() == 1) {
    double L = X[el[1]][0] - X[el[0]][0];
    g.measure = L;
    double Le = std::max(L, clamp);
    g.measure_eff = Le;
    g.grad[0] = {-1.0 / Le, 0.0};
    g.grad[1] = {1.0 / Le, 0.0};
  } else {
    const Vec& a = X[el[0]];
    const Vec& b = X[el[1]];
    const Vec& c = X[el[2]];
    double twoA = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    g.measure = 0.5 * twoA;
    double twoAe = std::max(twoA, 2.0 * clamp);
    g.measure_eff = 0.5 * twoAe;
    g.grad[0] = {(b[1] - c[1]) / twoAe, (c[0] - b[0]) / twoAe};
    g.grad[1] = {(c[1] - a[1]) / twoAe, (a[0] - c[0]) / twoAe};
    g.grad[2] = {(a[1] - b[1]) / twoAe, (b[0] - a[0]) / twoAe};
  }
  return g;
}

double measure_floor(const Mesh& mesh) {
  double h = mesh.mesh_size();
  return 1e-10 * std::pow(h, mesh.dim());
}

double signed_pow(double u, double m) { return std::pow(std::abs(u), m); }

// Adds mass_coeff * (u, phi_i) + flux_coeff * (kappa|u|^m grad u + u w, grad phi_i)
// over element e into out[global node].
void accumulate_element(const Mesh& mesh, const std::vector<Vec>& X, const NodalField& U,
                        const std::vector<Vec>& W, double m, double kappa,
                        double mass_coeff, double flux_coeff, int e, double floor_,
                        bool allow_inverted, NodalField& out) {
  auto g = element_geometry(mesh, X, e);
  if (!allow_inverted && g.measure < -floor_) throw std::runtime_error("inverted mesh");

  const auto& el = mesh.element(e);
  const int nn = mesh.nodes_per_element();
  const QuadPoint* quad = (mesh.dim() == 1) ? kQuad1D : kQuad2D;
  const int nq = (mesh.dim() == 1) ? 3 : 6;

  Vec grad_u{0.0, 0.0};
  for (int k = 0; k < nn; ++k) grad_u = grad_u + U[el[k]] * g.grad[k];

  for (int q = 0; q < nq; ++q) {
    double u_q = 0.0;
    Vec w_q{0.0, 0.0};
    for (int k = 0; k < nn; ++k) {
      u_q += U[el[k]] * quad[q].bary[k];
      w_q = w_q + quad[q].bary[k] * W[el[k]];
    }
    double scale = quad[q].w * g.measure_eff;
    double diff = kappa * signed_pow(u_q, m);
    for (int i = 0; i < nn; ++i) {
      double v = mass_coeff * u_q * quad[q].bary[i];
      if (flux_coeff != 0.0)
        v += flux_coeff * (diff * dot(grad_u, g.grad[i]) + u_q * dot(w_q, g.grad[i]));
      out[el[i]] += scale * v;
    }
  }
}

std::vector<Vec> velocity_field(const Mesh& mesh, const StepContext& ctx,
                                const std::vector<Vec>& X_prev,
                                const std::vector<Vec>& X_new) {
  std::vector<Vec> W(mesh.num_nodes());
  for (int p = 0; p < mesh.num_nodes(); ++p) W[p] = mesh_velocity(ctx, X_prev, X_new, p);
  return W;
}

}  // namespace

Vec mesh_velocity(const StepContext& ctx, const std::vector<Vec>& X_prev,
                  const std::vector<Vec>& X_new, int p) {
  int anchor = p;
  if (ctx.velocity_model == VelocityModel::TargetShifted && ctx.in_empty_region(p)) {
    auto it = ctx.targets_q0.find(p);
    if (it == ctx.targets_q0.end()) {
      // An empty-region node with no anchor yet carries no phase, so its
      // displacement is pure rezoning. Its same-node velocity would be a
      // large artifact (and the row sum of the transport term is zero for
      // any velocity, so this costs no mass).
      return Vec{};
    }
    anchor = it->second;
  }
  return (1.0 / ctx.dt) * (X_new[p] - X_prev[anchor]);
}

NodalField assemble_residual(const Mesh& mesh, const StepContext& ctx,
                             const TimeState& prev, const NodalField& U_new,
                             const std::vector<Vec>& X_new) {
  NodalField r(mesh.num_nodes(), 0.0);
  auto W = velocity_field(mesh, ctx, prev.X, X_new);
  double floor_ = measure_floor(mesh);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    accumulate_element(mesh, X_new, U_new, W, ctx.m, ctx.kappa, 1.0, ctx.dt * ctx.theta, e,
                       floor_, false, r);
    accumulate_element(mesh, prev.X, prev.U, W, ctx.m, ctx.kappa, -1.0,
                       ctx.dt * (1.0 - ctx.theta), e, floor_, false, r);
  }
  return r;
}

double residual_entry(const Mesh& mesh, const StepContext& ctx, const TimeState& prev,
                      const NodalField& U_new, const std::vector<Vec>& X_new, int p) {
  NodalField r(mesh.num_nodes(), 0.0);
  // The velocity only matters on the patch but is cheap to evaluate lazily.
  std::vector<Vec> W(mesh.num_nodes(), Vec{0.0, 0.0});
  double floor_ = measure_floor(mesh);
  for (int e : mesh.node_elements(p)) {
    const auto& el = mesh.element(e);
    for (int k = 0; k < mesh.nodes_per_element(); ++k)
      W[el[k]] = mesh_velocity(ctx, prev.X, X_new, el[k]);
    accumulate_element(mesh, X_new, U_new, W, ctx.m, ctx.kappa, 1.0, ctx.dt * ctx.theta, e,
                       floor_, true, r);
    accumulate_element(mesh, prev.X, prev.U, W, ctx.m, ctx.kappa, -1.0,
                       ctx.dt * (1.0 - ctx.theta), e, floor_, true, r);
  }
  return r[p];
}

Eigen::SparseMatrix<double> assemble_jacobian(const Mesh& mesh, const StepContext& ctx,
                                              const TimeState& prev, const NodalField& U_new,
                                              const std::vector<Vec>& X_new) {
  const int n = mesh.num_nodes();
  const int nn = mesh.nodes_per_element();
  auto W = velocity_field(mesh, ctx, prev.X, X_new);
  double floor_ = measure_floor(mesh);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh.num_elements()) * nn * nn);

  const QuadPoint* quad = (mesh.dim() == 1) ? kQuad1D : kQuad2D;
  const int nq = (mesh.dim() == 1) ? 3 : 6;
  const double c = ctx.dt * ctx.theta;

  for (int e = 0; e < mesh.num_elements(); ++e) {
    auto g = element_geometry(mesh, X_new, e);
    if (g.measure < -floor_) throw std::runtime_error("inverted mesh");
    const auto& el = mesh.element(e);

    Vec grad_u{0.0, 0.0};
    for (int k = 0; k < nn; ++k) grad_u = grad_u + U_new[el[k]] * g.grad[k];

    for (int q = 0; q < nq; ++q) {
      double u_q = 0.0;
      Vec w_q{0.0, 0.0};
      for (int k = 0; k < nn; ++k) {
        u_q += U_new[el[k]] * quad[q].bary[k];
        w_q = w_q + quad[q].bary[k] * W[el[k]];
      }
      double scale = quad[q].w * g.measure_eff;
      double um = signed_pow(u_q, ctx.m);
      // |u|^{m-1} is clamped away from 0 for m < 1 only; the residual itself
      // is never clamped.
      double au = std::abs(u_q);
      if (ctx.m < 1.0 && au < 1e-12) au = 1e-12;
      double dum = ctx.m * std::pow(au, ctx.m - 1.0) * ((u_q > 0.0) - (u_q < 0.0));

      for (int i = 0; i < nn; ++i) {
        double gi_gu = dot(grad_u, g.grad[i]);
        double wi = dot(w_q, g.grad[i]);
        for (int j = 0; j < nn; ++j) {
          double v = quad[q].bary[j] * quad[q].bary[i];  // mass
          v += c * ctx.kappa * (dum * quad[q].bary[j] * gi_gu + um * dot(g.grad[j], g.grad[i]));
          v += c * quad[q].bary[j] * wi;  // convection
          trip.emplace_back(el[i], el[j], scale * v);
        }
      }
    }
  }

  Eigen::SparseMatrix<double> H(n, n);
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

double integrate_field(const Mesh& mesh, const std::vector<Vec>& X, const NodalField& U) {
  double total = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto& el = mesh.element(e);
    double s = 0.0;
    for (int k = 0; k < mesh.nodes_per_element(); ++k) s += U[el[k]];
    total += signed_measure(mesh, X, e) * s / mesh.nodes_per_element();
  }
  return total;
}

double integrate_field(const Mesh& mesh, const NodalField& U) {
  return integrate_field(mesh, mesh.coords(), U);
}

}  // namespace pme
