#ifndef PME_ANALYTIC_HPP
#define PME_ANALYTIC_HPP

#include <functional>
#include <vector>

#include "pme/mesh.hpp"

namespace pme {

// Self-similar compactly supported solution u(x,t) = t^-a ((C - k|x|^2 t^-2b)^+)^(1/m).
struct BarenblattParams {
  double m = 1.0;
  int d = 2;
  double kappa = 1.0;
  double C = 1.0;
  double alpha = 0.0;
  double beta = 0.0;
  double k = 0.0;

  static BarenblattParams make(double m, int d, double kappa, double C);
};

double barenblatt_u(const BarenblattParams& p, const Vec& x, double t);
double barenblatt_interface_radius(const BarenblattParams& p, double t);
// Radial interface speed f'(t).
double barenblatt_interface_speed(const BarenblattParams& p, double t);

// Experiment recipe: kappa = 1, initial interface radius r, t0 = (k r^2)^(1/(alpha m + 2 beta)),
// C = t0^(alpha m). Returns the parameters and the start time t0.
std::pair<BarenblattParams, double> setup_bp_experiment(double m, int d, double kappa, double r);

// Initially stationary 1D profile supported on [-pi, 0].
double waiting_time_u0(double x, double m, double gamma);
// Closed-form waiting time, valid for gamma in [0, 1/4].
double waiting_time_analytic(double m, double gamma);

// Mean distance of interface nodes from the analytic radius f_t, in units of h.
double metric_interface_error(const std::vector<Vec>& X, const std::vector<int>& gamma_nodes,
                              double f_t, double h);

// (mass(t) - mass(t0)) / mass(t0) for every entry.
std::vector<double> metric_mass_variation(const std::vector<double>& masses);

struct Snapshot {
  const NodalField* U;
  const std::vector<Vec>* X;
  double t;
};

// Space-time L2 error: element quadrature in space, trapezoid in time.
double metric_l2_spacetime(const Mesh& mesh, const std::vector<Snapshot>& series,
                           const std::function<double(const Vec&, double)>& exact);

// L2 error of one snapshot (space only).
double l2_error(const Mesh& mesh, const std::vector<Vec>& X, const NodalField& U,
                const std::function<double(const Vec&, double)>& exact, double t);

// Upper-bound convergence exponent (m^2+6m+8)/(6m^2+14m+8).
double convergence_bound_exponent(double m);

}  // namespace pme

#endif
