#include <cmath>

#include "cornerspace/steadystate.hpp"
#include "cornerspace/trajectories.hpp"
#include "doctest.h"

using namespace cornerspace;

namespace {
Cluster single_site(const ModelParams& p) {
  return build_base_cluster(build_geometry(1, 1, true, true), p, {});
}

ModelParams two_level() {
  ModelParams p;
  p.hardcore = true;
  p.n_max = 1;
  p.f = 0.0;
  p.delta_omega = 0.0;
  p.j = 0.0;
  return p;
}

TrajectoryEnsemble ensemble_from(const Operator& h, const std::vector<Operator>& jumps,
                                 const DenseMatrix& rho0, const TrajectoryConfig& cfg,
                                 const Cluster& c, const ObservableSet& obs) {
  return run_ensemble(h, jumps, hermitian_eig(rho0), cfg, &obs, c.geometry);
}
}  // namespace

TEST_CASE("stream generator is reproducible and independent of creation order") {
  StreamRng a(5, 17), b(5, 17), c(5, 18);
  for (int k = 0; k < 10; ++k) {
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
  }
  StreamRng u(1, 0);
  for (int k = 0; k < 1000; ++k) {
    const double r = u.uniform_open_closed();
    CHECK(r > 0.0);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("no jump operators keep the norm") {
  ModelParams p;
  p.n_max = 3;
  p.u = 1.0;
  const Cluster c = single_site(p);
  const Operator h = assemble_hamiltonian(c.ops, c.geometry, p);
  TrajectoryConfig cfg;
  cfg.t_relax = 0.0;
  cfg.t_sample = 5.0;
  cfg.dt = 0.002;
  Vector psi = Vector::Zero(4);
  psi[0] = 1.0;
  const auto tr = run_trajectory(h, {}, psi, cfg, 0);
  for (double n2 : tr.norms) CHECK(std::abs(n2 - 1.0) < 1e-8);
  CHECK(tr.jump_times.empty());
}

TEST_CASE("pure decay: exponential jump times and population") {
  const ModelParams p = two_level();
  const Cluster c = single_site(p);
  const Operator h = assemble_hamiltonian(c.ops, c.geometry, p);
  const auto jumps = jump_operators(c.ops, p);
  const ObservableSet obs(c);
  TrajectoryConfig cfg;
  cfg.n_trajectories = 10000;
  cfg.t_relax = 0.0;
  cfg.t_sample = 3.0;
  cfg.sample_stride = 0.25;
  cfg.dt = 0.05;
  cfg.master_seed = 2024;
  cfg.accumulate_density = false;
  DenseMatrix excited = DenseMatrix::Zero(2, 2);
  excited(1, 1) = 1.0;
  const auto ens = ensemble_from(h, jumps, excited, cfg, c, obs);

  double sum = 0.0, sum2 = 0.0;
  int jumped = 0;
  for (const auto& tr : ens.trajectories) {
    CHECK(tr.jump_times.size() <= 1);
    if (tr.jump_times.empty()) continue;
    ++jumped;
    sum += tr.jump_times[0];
    sum2 += tr.jump_times[0] * tr.jump_times[0];
  }
  // jump times are censored at t = 3; compare the truncated mean of an Exp(1)
  const double t_end = 3.0;
  const double frac = 1.0 - std::exp(-t_end);
  CHECK(std::abs(jumped / 10000.0 - frac) < 3.0 * std::sqrt(frac * (1 - frac) / 10000.0));
  const double mean = sum / jumped;
  const double var = sum2 / jumped - mean * mean;
  const double truncated_mean = (1.0 - std::exp(-t_end) * (1.0 + t_end)) / frac;
  CHECK(std::abs(mean - truncated_mean) < 3.0 * std::sqrt(var / jumped));

  const auto series = ensemble_time_series(ens);
  int checked = 0;
  for (const auto& [t, rec] : series) {
    if (t <= 0.0) continue;
    const double expect = std::exp(-t);
    const double se = std::sqrt(expect * (1 - expect) / 10000.0);
    CHECK(std::abs(rec.n - expect) < 3.0 * se);
    ++checked;
  }
  CHECK(checked >= 10);
}

TEST_CASE("observable_stats: identical and two-trajectory cases") {
  TrajectoryEnsemble ens;
  ens.geometry = build_geometry(1, 1, true, true);
  auto traj = [](double n) {
    TrajectorySamples s;
    RawMoments m;
    m.n = {n};
    m.b = {cplx(0.0)};
    m.n2 = {0.0};
    s.times = {0.0, 1.0};
    s.moments = {m, m};
    return s;
  };
  ens.trajectories = {traj(0.3), traj(0.3), traj(0.3)};
  auto r = observable_stats(ens);
  CHECK(r.n == doctest::Approx(0.3));
  CHECK(r.n_err == 0.0);
  ens.trajectories = {traj(0.2), traj(0.5)};
  r = observable_stats(ens);
  CHECK(r.n == doctest::Approx(0.35));
  CHECK(r.n_err == doctest::Approx(0.15));
}

TEST_CASE("density estimate: rank-1 projector and decay endpoint") {
  const ModelParams p = two_level();
  const Cluster c = single_site(p);
  const Operator h = assemble_hamiltonian(c.ops, c.geometry, p);
  const auto jumps = jump_operators(c.ops, p);
  const ObservableSet obs(c);
  TrajectoryConfig cfg;
  cfg.n_trajectories = 1;
  cfg.t_relax = 1.0;
  cfg.t_sample = 1.0;
  cfg.sample_stride = 1.0;
  cfg.keep_snapshots = true;
  cfg.accumulate_density = false;
  Vector psi(2);
  psi << std::sqrt(0.5), std::sqrt(0.5);
  const auto ens = ensemble_from(h, jumps, psi * psi.adjoint(), cfg, c, obs);
  REQUIRE(ens.trajectories[0].snapshots.cols() == 2);
  TrajectoryEnsemble one = ens;
  one.trajectories[0].snapshots = ens.trajectories[0].snapshots.leftCols(1);
  const DenseMatrix rho = estimate_density_matrix(one).matrix;
  CHECK((rho * rho - rho).norm() < 1e-12);

  cfg.n_trajectories = 64;
  cfg.t_relax = 30.0;
  cfg.t_sample = 5.0;
  cfg.keep_snapshots = false;
  cfg.accumulate_density = true;
  DenseMatrix excited = DenseMatrix::Zero(2, 2);
  excited(1, 1) = 1.0;
  const auto decayed = ensemble_from(h, jumps, excited, cfg, c, obs);
  CHECK(std::abs(estimate_density_matrix(decayed).matrix(0, 0) - 1.0) < 1e-9);

  TrajectoryEnsemble empty;
  CHECK_THROWS_AS(estimate_density_matrix(empty), Error);
}

TEST_CASE("driven linear cavity: trajectories agree with the null space") {
  ModelParams p;
  p.n_max = 8;
  p.j = 0.0;
  const Cluster c = single_site(p);
  const Operator h = assemble_hamiltonian(c.ops, c.geometry, p);
  const auto jumps = jump_operators(c.ops, p);
  const ObservableSet obs(c);
  const DensityMatrix exact = steady_state_nullspace(h, jumps);
  const auto want = record_from_moments(obs.moments(exact.matrix), c.geometry);

  TrajectoryConfig cfg;
  cfg.n_trajectories = 32;
  cfg.t_relax = 45.0;
  cfg.t_sample = 10.0;
  cfg.dt = 5e-4;
  cfg.master_seed = 7;
  DenseMatrix vac = DenseMatrix::Zero(c.dim, c.dim);
  vac(0, 0) = 1.0;
  const auto ens = ensemble_from(h, jumps, vac, cfg, c, obs);
  const auto got = observable_stats(ens);
  // The steady state is a coherent state, which jumps leave unchanged, so
  // every trajectory follows the same path and the standard error is
  // essentially zero. What remains is integration error.
  const double floor = 1e-7;
  CHECK(std::abs(got.n - want.n) < 3.0 * got.n_err + floor);
  CHECK(std::abs(got.re_b - want.re_b) < 3.0 * got.re_b_err + floor);
  CHECK(std::abs(got.im_b - want.im_b) < 3.0 * got.im_b_err + floor);
  const DenseMatrix rho = estimate_density_matrix(ens).matrix;
  CHECK((rho - exact.matrix).cwiseAbs().maxCoeff() < 5.0 * got.n_err + floor);
}

TEST_CASE("driven Kerr site: trajectories agree with the null space within 3 errors") {
  ModelParams p;
  p.n_max = 6;
  p.u = 4.0;
  p.j = 0.0;
  const Cluster c = single_site(p);
  const Operator h = assemble_hamiltonian(c.ops, c.geometry, p);
  const auto jumps = jump_operators(c.ops, p);
  const ObservableSet obs(c);
  const auto want =
      record_from_moments(obs.moments(steady_state_nullspace(h, jumps).matrix), c.geometry);

  TrajectoryConfig cfg;
  cfg.n_trajectories = 256;
  cfg.t_relax = 10.0;
  cfg.t_sample = 40.0;
  cfg.master_seed = 99;
  DenseMatrix vac = DenseMatrix::Zero(c.dim, c.dim);
  vac(0, 0) = 1.0;
  const auto ens = ensemble_from(h, jumps, vac, cfg, c, obs);
  const auto got = observable_stats(ens);
  CHECK(got.n_err > 0.0);
  CHECK(std::abs(got.n - want.n) < 3.0 * got.n_err);
  CHECK(std::abs(got.re_b - want.re_b) < 3.0 * got.re_b_err);
  CHECK(std::abs(*got.g2_onsite - *want.g2_onsite) < 3.0 * *got.g2_err);

  // same ensemble regardless of worker count
  TrajectoryConfig cfg2 = cfg;
  cfg2.threads = 3;
  cfg2.n_trajectories = 40;
  cfg.n_trajectories = 40;
  cfg.threads = 1;
  const auto a = ensemble_from(h, jumps, vac, cfg, c, obs);
  const auto b = ensemble_from(h, jumps, vac, cfg2, c, obs);
  CHECK(estimate_density_matrix(a).matrix == estimate_density_matrix(b).matrix);
  CHECK(observable_stats(a).n == observable_stats(b).n);
  for (std::size_t i = 0; i < a.trajectories.size(); ++i)
    CHECK(a.trajectories[i].jump_times == b.trajectories[i].jump_times);
}

TEST_CASE("spectral propagator: decay law, norm and the Kerr steady state") {
  {
    const ModelParams p = two_level();
    const Cluster c = single_site(p);
    const Operator h = assemble_hamiltonian(c.ops, c.geometry, p);
    const auto jumps = jump_operators(c.ops, p);
    const ObservableSet obs(c);
    TrajectoryConfig cfg;
    cfg.propagator = Propagator::spectral;
    cfg.n_trajectories = 4000;
    cfg.t_relax = 0.0;
    cfg.t_sample = 3.0;
    cfg.sample_stride = 0.25;
    cfg.master_seed = 11;
    cfg.accumulate_density = false;
    DenseMatrix excited = DenseMatrix::Zero(2, 2);
    excited(1, 1) = 1.0;
    const auto ens = ensemble_from(h, jumps, excited, cfg, c, obs);
    for (const auto& [t, rec] : ensemble_time_series(ens)) {
      if (t <= 0.0) continue;
      const double expect = std::exp(-t);
      CHECK(std::abs(rec.n - expect) < 3.0 * std::sqrt(expect * (1 - expect) / 4000.0));
    }
    // jump times resolve inside the stride: censored Exp(1) mean
    double sum = 0.0, sum2 = 0.0;
    int k = 0;
    for (const auto& tr : ens.trajectories)
      for (double t : tr.jump_times) {
        sum += t;
        sum2 += t * t;
        ++k;
      }
    const double frac = 1.0 - std::exp(-3.0);
    const double mean = sum / k;
    CHECK(std::abs(mean - (1.0 - std::exp(-3.0) * 4.0) / frac) <
          3.0 * std::sqrt((sum2 / k - mean * mean) / k));
  }

  ModelParams p;
  p.n_max = 6;
  p.u = 4.0;
  p.j = 0.0;
  const Cluster c = single_site(p);
  const Operator h = assemble_hamiltonian(c.ops, c.geometry, p);
  const auto jumps = jump_operators(c.ops, p);
  const ObservableSet obs(c);

  TrajectoryConfig free_cfg;
  free_cfg.propagator = Propagator::spectral;
  free_cfg.t_relax = 0.0;
  free_cfg.t_sample = 5.0;
  Vector psi = Vector::Zero(c.dim);
  psi[2] = 1.0;
  for (double n2 : run_trajectory(h, {}, psi, free_cfg, 0).norms)
    CHECK(std::abs(n2 - 1.0) < 1e-10);

  const auto want =
      record_from_moments(obs.moments(steady_state_nullspace(h, jumps).matrix), c.geometry);
  TrajectoryConfig cfg;
  cfg.propagator = Propagator::spectral;
  cfg.n_trajectories = 256;
  cfg.t_relax = 10.0;
  cfg.t_sample = 40.0;
  cfg.master_seed = 99;
  DenseMatrix vac = DenseMatrix::Zero(c.dim, c.dim);
  vac(0, 0) = 1.0;
  const auto got = observable_stats(ensemble_from(h, jumps, vac, cfg, c, obs));
  CHECK(std::abs(got.n - want.n) < 3.0 * got.n_err);
  CHECK(std::abs(got.re_b - want.re_b) < 3.0 * got.re_b_err);
  CHECK(std::abs(*got.g2_onsite - *want.g2_onsite) < 3.0 * *got.g2_err);
}
