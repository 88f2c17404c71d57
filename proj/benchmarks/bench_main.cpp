#include <benchmark/benchmark.h>

#include "pme/analytic.hpp"
#include "pme/solver.hpp"
#include "pme/xmesh.hpp"

namespace {

using namespace pme;

struct Fixture {
  Mesh mesh;
  TimeState prev;
  StepContext ctx;

  explicit Fixture(double h)
      : mesh(build_structured_mesh(2, {-0.3, -0.3}, {0.3, 0.3}, h)),
        prev{{}, mesh.ref_coords(), 0.0} {
    auto [params, t0] = setup_bp_experiment(1.0, 2, 1.0, 0.15);
    prev.U.resize(mesh.num_nodes());
    for (int i = 0; i < mesh.num_nodes(); ++i)
      prev.U[i] = barenblatt_u(params, mesh.coords()[i], t0);
    prev.t = t0;
    ctx.theta = 1.0;
    ctx.dt = t0;
    ctx.m = 1.0;
    ctx.kappa = 1.0;
    ctx.velocity_model = VelocityModel::SameNode;
  }
};

void BM_AssembleResidual(benchmark::State& state) {
  Fixture f(0.6 / state.range(0));
  for (auto _ : state) {
    auto r = assemble_residual(f.mesh, f.ctx, f.prev, f.prev.U, f.mesh.coords());
    benchmark::DoNotOptimize(r.data());
  }
  state.SetItemsProcessed(state.iterations() * f.mesh.num_elements());
}
BENCHMARK(BM_AssembleResidual)->Arg(16)->Arg(32)->Arg(64);

void BM_AssembleJacobian(benchmark::State& state) {
  Fixture f(0.6 / state.range(0));
  for (auto _ : state) {
    auto H = assemble_jacobian(f.mesh, f.ctx, f.prev, f.prev.U, f.mesh.coords());
    benchmark::DoNotOptimize(H.valuePtr());
  }
  state.SetItemsProcessed(state.iterations() * f.mesh.num_elements());
}
BENCHMARK(BM_AssembleJacobian)->Arg(16)->Arg(32)->Arg(64);

void BM_ConstrainedSolve(benchmark::State& state) {
  Fixture f(0.6 / state.range(0));
  NewtonOptions opts;
  opts.tol = 1e-12;
  for (auto _ : state) {
    auto sol = solve_constrained(f.mesh, f.ctx, f.prev, f.mesh.coords(), f.prev.U, opts);
    benchmark::DoNotOptimize(sol.U.data());
  }
}
BENCHMARK(BM_ConstrainedSolve)->Arg(16)->Arg(32);

void BM_XmeshStep(benchmark::State& state) {
  Fixture f(0.6 / state.range(0));
  XmeshOptions opts;
  opts.m = 1.0;
  opts.theta = 1.0;
  for (auto _ : state) {
    auto [next, report] = xmesh_step(f.mesh, f.prev, f.ctx.dt, opts);
    benchmark::DoNotOptimize(next.U.data());
  }
}
BENCHMARK(BM_XmeshStep)->Arg(16)->Arg(32);

}  // namespace

BENCHMARK_MAIN();
