#ifndef PME_TOY1D_HPP
#define PME_TOY1D_HPP

#include "pme/fem.hpp"

namespace pme {

// Four-node 1D ALE transport benchmark with closed-form discrete solutions.
// Nodes sit at -1, 0, 1 + dx*t/dt, 2; the solution is advected at speed v
// and node N2 must land on the interface (U2 = 0) at t = dt. The two
// unknowns are U1 at t = dt and the displacement dx of N2.
struct ToySetup {
  double a = 1.0;   // left slope, > 0
  double b = 0.0;   // right slope, >= 0 (0: one-phase)
  double v = 1.0;   // transport speed, > 0
  double dt = 0.1;
  VelocityModel velocity_model = VelocityModel::SameNode;
};

struct ToySolution {
  double U1 = 0.0;
  double dx = 0.0;
  int newton_iters = 0;
};

// Solves the discretized weak form by a self-contained damped 2-variable
// Newton. Throws with a residual trace on divergence.
ToySolution solve_toy(const ToySetup& setup);

}  // namespace pme

#endif
