#include <random>

#include "cornerspace/steadystate.hpp"
#include "doctest.h"

using namespace cornerspace;

namespace {
Cluster base(int lx, int ly, const ModelParams& p) {
  const Geometry g = build_geometry(lx, ly, true, true);
  std::vector<SitePair> pairs;
  for (const auto& b : g.bonds) pairs.push_back({b.j, b.l});
  return build_base_cluster(g, p, pairs);
}

DensityMatrix vacuum(Index d) {
  DenseMatrix r = DenseMatrix::Zero(d, d);
  r(0, 0) = 1.0;
  return {r, "fock"};
}

DenseMatrix random_density(Index d, std::mt19937_64& gen) {
  std::normal_distribution<double> g;
  DenseMatrix a(d, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) a(i, j) = cplx(g(gen), g(gen));
  DenseMatrix r = a * a.adjoint();
  return r / r.trace();
}

ModelParams linear_cavity() {
  ModelParams p;
  p.u = 0.0;
  p.j = 0.0;
  p.n_max = 12;
  return p;
}
}  // namespace

TEST_CASE("lindblad_rhs on pure decay") {
  ModelParams p;
  p.n_max = 1;
  p.hardcore = true;
  const Cluster c = base(1, 1, p);
  const Operator zero(SparseMatrix(2, 2));
  const auto jumps = jump_operators(c.ops, p);
  DenseMatrix one = DenseMatrix::Zero(2, 2);
  one(1, 1) = 1.0;
  DenseMatrix want = DenseMatrix::Zero(2, 2);
  want(0, 0) = 1.0;
  want(1, 1) = -1.0;
  CHECK((lindblad_rhs(one, zero, jumps) - want).norm() < 1e-15);
  CHECK(lindblad_rhs(vacuum(2).matrix, zero, jumps).norm() == 0.0);
}

TEST_CASE("lindblad_rhs preserves trace and Hermiticity; generator agrees") {
  std::mt19937_64 gen(21);
  ModelParams p;
  p.n_max = 2;
  p.u = 3.0;
  const Cluster c = base(2, 1, p);
  const Operator h = assemble_hamiltonian(c.ops, c.geometry, p);
  const auto jumps = jump_operators(c.ops, p);
  const LindbladGenerator gen_op(h, jumps);
  for (int k = 0; k < 5; ++k) {
    const DenseMatrix rho = random_density(c.dim, gen);
    const DenseMatrix d = lindblad_rhs(rho, h, jumps);
    CHECK(std::abs(d.trace()) < 1e-12 * rho.norm());
    CHECK(hermiticity_defect(d) < 1e-12);
    CHECK((gen_op(0.0, rho) - d).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("linear cavity closed form from both solvers") {
  const ModelParams p = linear_cavity();
  const Cluster c = base(1, 1, p);
  const cplx alpha = p.f / cplx(p.delta_omega, 0.5 * p.gamma);
  CHECK(std::norm(alpha) == doctest::Approx(0.15841584).epsilon(1e-8));

  const Operator h = assemble_hamiltonian(c.ops, c.geometry, p);
  const DensityMatrix exact = steady_state_nullspace(h, jump_operators(c.ops, p));
  const ObservableSet obs(c);
  const ObservableRecord r1 = record_from_moments(obs.moments(exact.matrix), c.geometry);
  CHECK(std::abs(r1.n - 0.15841584) < 1e-6);
  CHECK(std::abs(r1.re_b - 0.39603960) < 1e-6);
  CHECK(std::abs(r1.re_b - alpha.real()) < 1e-6);
  CHECK(std::abs(r1.im_b - alpha.imag()) < 1e-6);
  CHECK(std::abs(*r1.g2_onsite - 1.0) < 1e-5);  // coherent state
  CHECK(std::abs(exact.matrix.trace() - 1.0) < 1e-14);

  const SteadyStateReport rep = evolve_to_steady_state(c, p, vacuum(c.dim));
  CHECK(rep.reason == Termination::converged);
  const ObservableRecord r2 = record_from_moments(obs.moments(rep.rho.matrix), c.geometry);
  CHECK(std::abs(r2.n - 0.15841584) < 1e-6);
  CHECK(std::abs(r2.re_b - 0.39603960) < 1e-6);
  CHECK(std::abs(r2.n - r1.n) < 1e-8);
  for (std::size_t k = 1; k < rep.history.size(); ++k)
    CHECK(rep.history[k].t > rep.history[k - 1].t);
}

TEST_CASE("hard-core single site two-level steady state") {
  ModelParams p;
  p.hardcore = true;
  p.n_max = 1;
  p.j = 0.0;
  const Cluster c = base(1, 1, p);
  const SteadyStateReport rep = evolve_to_steady_state(c, p, vacuum(2));
  const ObservableSet obs(c);
  const auto r = record_from_moments(obs.moments(rep.rho.matrix), c.geometry);
  CHECK(std::abs(r.n - 4.0 / 33.25) < 1e-6);
  CHECK(*r.g2_onsite == 0.0);
}

TEST_CASE("no drive relaxes to vacuum") {
  ModelParams p;
  p.n_max = 3;
  p.u = 2.0;
  p.f = 0.0;
  const Cluster c = base(2, 1, p);
  DenseMatrix start = DenseMatrix::Identity(c.dim, c.dim) / static_cast<double>(c.dim);
  SteadyStateControls ctl;
  ctl.rel_tol = 1e-8;
  const auto rep = evolve_to_steady_state(c, p, {start, "fock"}, ctl);
  CHECK(std::abs(rep.rho.matrix(0, 0) - 1.0) < 1e-6);
}

TEST_CASE("2x1 hard-core: evolution agrees with null space, restart is idempotent") {
  ModelParams p;
  p.hardcore = true;
  p.n_max = 1;
  const Cluster c = base(2, 1, p);
  const Operator h = assemble_hamiltonian(c.ops, c.geometry, p);
  const DensityMatrix exact = steady_state_nullspace(h, jump_operators(c.ops, p));
  SteadyStateControls ctl;
  ctl.rel_tol = 1e-9;
  const auto rep = evolve_to_steady_state(c, p, vacuum(c.dim), ctl);
  CHECK((rep.rho.matrix - exact.matrix).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(hermitian_eig(rep.rho.matrix).values.minCoeff() > -1e-8);

  const auto again = evolve_to_steady_state(c, p, rep.rho, ctl);
  CHECK(again.windows == 1);
  CHECK(again.reason == Termination::converged);
}

TEST_CASE("null space rejects a degenerate steady manifold and oversize input") {
  // no dissipation: every diagonal state in the H eigenbasis is stationary
  const Operator h(DenseMatrix(DenseMatrix::Identity(3, 3)));
  CHECK_THROWS_AS(steady_state_nullspace(h, {}), Error);
  CHECK_THROWS_AS(steady_state_nullspace(Operator(sparse_identity(65)), {}), Error);
}
