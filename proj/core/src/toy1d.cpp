#include "pme/toy1d.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pme {

namespace {

// 3-point Gauss on [0,1]; the integrands are polynomials of degree <= 2 in
// time and space, so the quadrature is exact.
const double kGx[3] = {0.5 * (1.0 - std::sqrt(0.6)), 0.5, 0.5 * (1.0 + std::sqrt(0.6))};
const double kGw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

struct ToyState {
  const ToySetup& s;
  double U1, dx;

  std::array<double, 4> nodal(double t) const {
    const double a = s.a, b = s.b, v = s.v, dt = s.dt;
    return {a * (1.0 + v * t), U1 * t / dt, -b * (1.0 - t / dt), -2.0 * b + b * v * t};
  }
  std::array<double, 4> positions(double t) const {
    return {-1.0, 0.0, 1.0 + dx * t / s.dt, 2.0};
  }
  std::array<double, 4> velocities() const {
    double w2;
    if (s.velocity_model == VelocityModel::TargetShifted && s.b == 0.0) {
      // N2 starts in the empty region; its target on the initial guess is N1.
      w2 = (1.0 + dx - 0.0) / s.dt;
    } else {
      w2 = dx / s.dt;
    }
    return {0.0, 0.0, w2, 0.0};
  }

  // r(phi_p) of the exactly time-integrated weak form.
  double residual(int p) const {
    const double dt = s.dt, v = s.v;
    auto W = velocities();

    auto mass = [&](double t) {
      auto U = nodal(t);
      auto X = positions(t);
      double total = 0.0;
      for (int e = std::max(0, p - 1); e <= std::min(2, p); ++e) {
        double L = X[e + 1] - X[e];
        for (int q = 0; q < 3; ++q) {
          double sN = kGx[q];
          double u = U[e] * (1.0 - sN) + U[e + 1] * sN;
          double phi = (p == e) ? (1.0 - sN) : sN;
          total += kGw[q] * L * u * phi;
        }
      }
      return total;
    };

    auto flux = [&](double t) {
      auto U = nodal(t);
      auto X = positions(t);
      double total = 0.0;
      for (int e = std::max(0, p - 1); e <= std::min(2, p); ++e) {
        double L = X[e + 1] - X[e];
        double dudx = (U[e + 1] - U[e]) / L;
        double dphidx = ((p == e) ? -1.0 : 1.0) / L;
        for (int q = 0; q < 3; ++q) {
          double sN = kGx[q];
          double u = U[e] * (1.0 - sN) + U[e + 1] * sN;
          double w = W[e] * (1.0 - sN) + W[e + 1] * sN;
          double phi = (p == e) ? (1.0 - sN) : sN;
          total += kGw[q] * L * (phi * v * dudx + u * w * dphidx);
        }
      }
      return total;
    };

    double r = mass(dt) - mass(0.0);
    for (int q = 0; q < 3; ++q) r += kGw[q] * dt * flux(kGx[q] * dt);
    return r;
  }
};

}  // namespace

ToySolution solve_toy(const ToySetup& setup) {
  if (setup.a <= 0.0 || setup.b < 0.0 || setup.v <= 0.0 || setup.dt <= 0.0)
    throw std::invalid_argument("ill-posed toy setup");

  // U1 must start nonzero: at U1 = 0 with b = 0 the solution vanishes on the
  // moving elements and the residual loses all dx dependence.
  double U1 = setup.a * setup.v * setup.dt;
  double dx = (setup.b == 0.0 && setup.velocity_model == VelocityModel::SameNode) ? -2.0 / 3.0
                                                                                  : -1.0;
  auto F = [&](double u1, double d) {
    ToyState st{setup, u1, d};
    return std::array<double, 2>{st.residual(1), st.residual(2)};
  };

  auto norm2 = [](const std::array<double, 2>& f) {
    return std::sqrt(f[0] * f[0] + f[1] * f[1]);
  };

  std::string trace;
  for (int it = 0; it < 100; ++it) {
    auto f = F(U1, dx);
    double fn = norm2(f);
    trace += "iter " + std::to_string(it) + " |F|=" + std::to_string(fn) + "\n";
    if (fn <= 1e-14 * std::max(1.0, setup.a + setup.b)) return {U1, dx, it};

    const double h1 = 1e-7 * std::max(1.0, std::abs(U1));
    const double h2 = 1e-7 * std::max(1.0, std::abs(dx));
    auto f1 = F(U1 + h1, dx);
    auto f2 = F(U1, dx + h2);
    double J00 = (f1[0] - f[0]) / h1, J01 = (f2[0] - f[0]) / h2;
    double J10 = (f1[1] - f[1]) / h1, J11 = (f2[1] - f[1]) / h2;
    double det = J00 * J11 - J01 * J10;
    if (det == 0.0) break;
    double du = (J11 * f[0] - J01 * f[1]) / det;
    double dd = (-J10 * f[0] + J00 * f[1]) / det;

    double step = 1.0;
    for (int cut = 0; cut < 40; ++cut) {
      auto fn2 = norm2(F(U1 - step * du, dx - step * dd));
      if (fn2 < fn) break;
      step *= 0.5;
    }
    U1 -= step * du;
    dx -= step * dd;
  }
  throw std::runtime_error("toy Newton divergence:\n" + trace);
}

}  // namespace pme
