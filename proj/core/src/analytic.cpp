#include "pme/analytic.hpp"

#include <cmath>
#include <stdexcept>

namespace pme {

BarenblattParams BarenblattParams::make(double m, int d, double kappa, double C) {
  BarenblattParams p;
  p.m = m;
  p.d = d;
  p.kappa = kappa;
  p.C = C;
  p.alpha = d / (m * d + 2.0);
  p.beta = p.alpha / d;
  p.k = m * p.alpha / (2.0 * kappa * d);
  return p;
}

double barenblatt_u(const BarenblattParams& p, const Vec& x, double t) {
  double r2 = x[0] * x[0] + (p.d == 2 ? x[1] * x[1] : 0.0);
  double arg = p.C - p.k * r2 * std::pow(t, -2.0 * p.beta);
  if (arg <= 0.0) return 0.0;
  return std::pow(t, -p.alpha) * std::pow(arg, 1.0 / p.m);
}

double barenblatt_interface_radius(const BarenblattParams& p, double t) {
  return std::sqrt(p.C / p.k) * std::pow(t, p.beta);
}

double barenblatt_interface_speed(const BarenblattParams& p, double t) {
  return p.beta * std::sqrt(p.C / p.k) * std::pow(t, p.beta - 1.0);
}

std::pair<BarenblattParams, double> setup_bp_experiment(double m, int d, double kappa, double r) {
  BarenblattParams p = BarenblattParams::make(m, d, kappa, 1.0);
  double t0 = std::pow(p.k * r * r, 1.0 / (p.alpha * m + 2.0 * p.beta));
  p.C = std::pow(t0, p.alpha * m);
  return {p, t0};
}

double waiting_time_u0(double x, double m, double gamma) {
  if (x < -M_PI || x > 0.0) return 0.0;
  double s2 = std::sin(x) * std::sin(x);
  return std::pow((1.0 - gamma) * s2 + gamma * s2 * s2, 1.0 / m);
}

double waiting_time_analytic(double m, double gamma) {
  return 1.0 / (2.0 * (m + 2.0) * (1.0 - gamma));
}

double metric_interface_error(const std::vector<Vec>& X, const std::vector<int>& gamma_nodes,
                              double f_t, double h) {
  if (gamma_nodes.empty()) return 0.0;
  double s = 0.0;
  for (int p : gamma_nodes) s += std::abs(norm(X[p]) - f_t) / h;
  return s / gamma_nodes.size();
}

std::vector<double> metric_mass_variation(const std::vector<double>& masses) {
  std::vector<double> out(masses.size());
  if (masses.empty()) return out;
  double m0 = masses.front();
  for (size_t i = 0; i < masses.size(); ++i) out[i] = (masses[i] - m0) / m0;
  return out;
}

namespace {

// Same degree-4 rules as the assembly, restated so the metric stays an
// independent route.
struct QP {
  double w;
  double b0, b1, b2;
};
const QP kQ1[] = {
    {5.0 / 18.0, 0.5 * (1 - std::sqrt(0.6)), 0.5 * (1 + std::sqrt(0.6)), 0.0},
    {8.0 / 18.0, 0.5, 0.5, 0.0},
    {5.0 / 18.0, 0.5 * (1 + std::sqrt(0.6)), 0.5 * (1 - std::sqrt(0.6)), 0.0},
};
const QP kQ2[] = {
    {0.109951743655322, 0.816847572980459, 0.091576213509771, 0.091576213509771},
    {0.109951743655322, 0.091576213509771, 0.816847572980459, 0.091576213509771},
    {0.109951743655322, 0.091576213509771, 0.091576213509771, 0.816847572980459},
    {0.223381589678011, 0.108103018168070, 0.445948490915965, 0.445948490915965},
    {0.223381589678011, 0.445948490915965, 0.108103018168070, 0.445948490915965},
    {0.223381589678011, 0.445948490915965, 0.445948490915965, 0.108103018168070},
};

}  // namespace

double l2_error(const Mesh& mesh, const std::vector<Vec>& X, const NodalField& U,
                const std::function<double(const Vec&, double)>& exact, double t) {
  const QP* q = (mesh.dim() == 1) ? kQ1 : kQ2;
  const int nq = (mesh.dim() == 1) ? 3 : 6;
  double total = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto& el = mesh.element(e);
    double A = signed_measure(mesh, X, e);
    if (A <= 0.0) continue;
    for (int iq = 0; iq < nq; ++iq) {
      double b[3] = {q[iq].b0, q[iq].b1, q[iq].b2};
      double uh = 0.0;
      Vec xq{0.0, 0.0};
      for (int k = 0; k < mesh.nodes_per_element(); ++k) {
        uh += b[k] * U[el[k]];
        xq = xq + b[k] * X[el[k]];
      }
      double diff = uh - exact(xq, t);
      total += q[iq].w * A * diff * diff;
    }
  }
  return std::sqrt(total);
}

double metric_l2_spacetime(const Mesh& mesh, const std::vector<Snapshot>& series,
                           const std::function<double(const Vec&, double)>& exact) {
  if (series.size() < 2) throw std::invalid_argument("need at least two snapshots");
  std::vector<double> sq(series.size());
  for (size_t i = 0; i < series.size(); ++i) {
    double e = l2_error(mesh, *series[i].X, *series[i].U, exact, series[i].t);
    sq[i] = e * e;
  }
  double total = 0.0;
  for (size_t i = 0; i + 1 < series.size(); ++i)
    total += 0.5 * (sq[i] + sq[i + 1]) * (series[i + 1].t - series[i].t);
  return std::sqrt(total);
}

double convergence_bound_exponent(double m) {
  return (m * m + 6.0 * m + 8.0) / (6.0 * m * m + 14.0 * m + 8.0);
}

}  // namespace pme
