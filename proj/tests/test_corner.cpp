#include <algorithm>
#include <random>
#include <tuple>

#include "cornerspace/corner.hpp"
#include "doctest.h"

using namespace cornerspace;

namespace {

ModelParams hardcore() {
  ModelParams p;
  p.hardcore = true;
  p.n_max = 1;
  return p;
}

RealVector random_distribution(int n, std::mt19937_64& gen, bool quantized) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = quantized ? std::floor(u(gen) * 4.0 + 1.0) : u(gen);
  double s = 0.0;
  for (double x : v) s += x;
  std::sort(v.begin(), v.end(), std::greater<>());
  RealVector out(n);
  // powers of two keep quantized products exact
  const double scale = quantized ? std::exp2(-std::ceil(std::log2(s))) : 1.0 / s;
  for (int k = 0; k < n; ++k) out[k] = v[k] * scale;
  return out;
}

std::vector<JointPair> sort_oracle(const RealVector& pa, const RealVector& pb, Index m) {
  std::vector<JointPair> all;
  for (int i = 0; i < pa.size(); ++i)
    for (int j = 0; j < pb.size(); ++j) all.push_back({i, j, pa[i] * pb[j]});
  std::sort(all.begin(), all.end(), [](const JointPair& x, const JointPair& y) {
    return std::make_tuple(-x.p, x.ra, x.rb) < std::make_tuple(-y.p, y.ra, y.rb);
  });
  all.resize(static_cast<std::size_t>(m));
  return all;
}

// Walks a schedule and keeps every solved node.
std::vector<SolvedCluster> solve_all(const MergeSchedule& s, const ModelParams& p,
                                     const SolverSettings& settings) {
  std::vector<SolvedCluster> out;
  for (const auto& node : s.nodes) {
    if (node.is_leaf()) {
      Cluster c = build_base_cluster(node.geometry, p, node.tracked_pairs);
      DenseMatrix r = DenseMatrix::Zero(c.dim, c.dim);
      r(0, 0) = 1.0;
      c.rho = DensityMatrix{r, "fock"};
      out.push_back(solve_cluster(std::move(c), p, settings, 1));
    } else {
      const auto& a = out[node.child_a].cluster;
      const auto& b = out[node.child_b].cluster;
      const Index m = node.m == 0 ? a.dim * b.dim : node.m;
      out.push_back(solve_cluster(merge_clusters(a, b, node, m, OperatorMode::exact), p, settings, 1));
    }
  }
  return out;
}

// Columns: corner states written in the node's Fock basis, for merges whose
// child A holds the leading sites (y splits, or x splits of one-row lattices).
DenseMatrix corner_isometry(const Cluster& c, const DenseMatrix& wa, const DenseMatrix& wb,
                            const Cluster& a, const Cluster& b) {
  const CornerIndex& idx = *c.corner;
  DenseMatrix w(wa.rows() * wb.rows(), c.dim);
  for (Index s = 0; s < c.dim; ++s) {
    const Vector va = wa * a.eig->vectors.col(idx.used_a[idx.a[s]]);
    const Vector vb = wb * b.eig->vectors.col(idx.used_b[idx.b[s]]);
    w.col(s) = kron(DenseMatrix(va), DenseMatrix(vb));
  }
  return w;
}

double max_abs(const DenseMatrix& m) { return m.cwiseAbs().maxCoeff(); }

SolverSettings tight() {
  SolverSettings s;
  s.direct.rel_tol = 1e-11;
  s.direct.max_time = 3000.0;
  return s;
}

}  // namespace

TEST_CASE("diagonalize_rho") {
  DensityMatrix mixed{DenseMatrix::Identity(2, 2) * 0.5, "fock"};
  const auto e = diagonalize_rho(mixed);
  CHECK(e.values[0] == doctest::Approx(0.5));
  CHECK(e.values[1] == doctest::Approx(0.5));

  DenseMatrix pure = DenseMatrix::Zero(3, 3);
  pure(1, 1) = 1.0;
  const auto ep = diagonalize_rho({pure, "fock"});
  CHECK(ep.values[0] == doctest::Approx(1.0));
  CHECK(std::abs(ep.values[1]) < 1e-15);

  DenseMatrix d = DenseMatrix::Zero(3, 3);
  d(0, 0) = 0.7;
  d(1, 1) = 0.3 + 1e-14;
  d(2, 2) = -1e-14;
  const auto ec = diagonalize_rho({d, "fock"}, 1e-8);
  CHECK(ec.values[2] == 0.0);
  CHECK(ec.values.sum() == doctest::Approx(1.0).epsilon(1e-15));

  d(1, 1) = 0.3 + 1e-3;
  d(2, 2) = -1e-3;
  CHECK_THROWS_AS(diagonalize_rho({d, "fock"}, 1e-8), Error);
}

TEST_CASE("select_top_m_pairs examples") {
  RealVector pa(2), pb(2);
  pa << 0.7, 0.3;
  pb << 0.6, 0.4;
  const auto s = select_top_m_pairs(pa, pb, 2);
  REQUIRE(s.pairs.size() == 2);
  CHECK(s.pairs[0].ra == 0);
  CHECK(s.pairs[0].rb == 0);
  CHECK(s.pairs[0].p == doctest::Approx(0.42));
  CHECK(s.pairs[1].ra == 0);
  CHECK(s.pairs[1].rb == 1);
  CHECK(s.pairs[1].p == doctest::Approx(0.28));
  CHECK_FALSE(s.degenerate_cut);

  RealVector h(2);
  h << 0.5, 0.5;
  const auto t = select_top_m_pairs(h, h, 3);
  CHECK(t.pairs[0] == JointPair{0, 0, 0.25});
  CHECK(t.pairs[1] == JointPair{0, 1, 0.25});
  CHECK(t.pairs[2] == JointPair{1, 0, 0.25});
  CHECK(t.degenerate_cut);
  CHECK(t.warning.find("degenerate") != std::string::npos);

  CHECK_THROWS_AS(select_top_m_pairs(pa, pb, 5), Error);
  RealVector up(2);
  up << 0.3, 0.7;
  CHECK_THROWS_AS(select_top_m_pairs(up, pb, 1), Error);
  RealVector big(2);
  big << 0.9, 0.9;
  CHECK_THROWS_AS(select_top_m_pairs(big, pb, 1), Error);
}

TEST_CASE("select_top_m_pairs equals the sorted product list on 1000 random cases") {
  std::mt19937_64 gen(20240611);
  std::uniform_int_distribution<int> size(1, 200);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const bool quantized = trial % 4 == 0;
    const RealVector pa = random_distribution(size(gen), gen, quantized);
    const RealVector pb = random_distribution(size(gen), gen, quantized);
    const Index full = pa.size() * pb.size();
    std::uniform_int_distribution<Index> pick(1, std::min<Index>(full, 2000));
    const Index m = trial % 10 == 0 ? full : pick(gen);
    const auto got = select_top_m_pairs(pa, pb, m);
    if (got.pairs != sort_oracle(pa, pb, m)) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("probability capture is monotone in M and bounded by one") {
  std::mt19937_64 gen(7);
  const RealVector pa = random_distribution(30, gen, false);
  const RealVector pb = random_distribution(25, gen, false);
  double prev = 0.0;
  for (Index m = 1; m <= 750; m += 7) {
    const double c = select_top_m_pairs(pa, pb, m).captured;
    CHECK(c >= prev);
    CHECK(c <= 1.0 + 1e-12);
    prev = c;
  }
  CHECK(select_top_m_pairs(pa, pb, 750).captured == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("full-M merge of 2x1 hard-core halves") {
  const ModelParams p = hardcore();
  const auto sched = plan_merge_schedule(build_geometry(2, 2, true, true),
                                         build_geometry(2, 1, true, true), {0}, 1);
  REQUIRE(sched.nodes.size() == 3);
  REQUIRE(sched.root_node().axis == MergeAxis::y);
  const auto solved = solve_all(sched, p, tight());
  const Cluster& a = solved[0].cluster;
  const Cluster& b = solved[1].cluster;
  PairSelection sel;
  const Cluster c = merge_clusters(a, b, sched.root_node(), 16, OperatorMode::exact, &sel);

  SUBCASE("initial spectrum is the sorted outer product") {
    std::vector<double> outer;
    for (Index i = 0; i < a.dim; ++i)
      for (Index j = 0; j < b.dim; ++j) outer.push_back(a.eig->values[i] * b.eig->values[j]);
    std::sort(outer.begin(), outer.end(), std::greater<>());
    const auto e = diagonalize_rho(*c.rho);
    for (Index k = 0; k < 16; ++k) CHECK(e.values[k] == doctest::Approx(outer[k]).epsilon(1e-12));
    CHECK(sel.captured == doctest::Approx(1.0).epsilon(1e-12));
  }

  const Cluster fock = build_base_cluster(c.geometry, p, sched.root_node().tracked_pairs);
  const DenseMatrix id2 = DenseMatrix::Identity(4, 4);
  const DenseMatrix w = corner_isometry(c, id2, id2, a, b);
  CHECK(max_abs(w.adjoint() * w - DenseMatrix::Identity(16, 16)) < 1e-12);

  SUBCASE("site and pair operators are the change of basis of the Fock ones") {
    for (int s = 0; s < 4; ++s) {
      CHECK(max_abs(fock.ops.sites[s].b.rotated(w) - c.ops.sites[s].b.to_dense()) < 1e-12);
      CHECK(max_abs(fock.ops.sites[s].n.rotated(w) - c.ops.sites[s].n.to_dense()) < 1e-12);
    }
    for (const auto& [key, po] : fock.ops.pairs) {
      const PairOperators* q = c.ops.find_pair(key.first, key.second);
      REQUIRE(q != nullptr);
      CHECK(max_abs(po.hop.rotated(w) - q->hop.to_dense()) < 1e-12);
      CHECK(max_abs(po.density.rotated(w) - q->density.to_dense()) < 1e-12);
    }
  }

  SUBCASE("corner Hamiltonian has the Fock spectrum") {
    const DenseMatrix hc = assemble_hamiltonian(c.ops, c.geometry, p).to_dense();
    const DenseMatrix hf = assemble_hamiltonian(fock.ops, fock.geometry, p).to_dense();
    const RealVector ec = hermitian_eig(hc).values, ef = hermitian_eig(hf).values;
    CHECK((ec - ef).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("fast mode matches exact mode at full M") {
    const Cluster f = merge_clusters(a, b, sched.root_node(), 16, OperatorMode::fast);
    const DenseMatrix hx = assemble_hamiltonian(c.ops, c.geometry, p).to_dense();
    const DenseMatrix hf = assemble_hamiltonian(f.ops, f.geometry, p, OperatorMode::fast).to_dense();
    CHECK(max_abs(hx - hf) < 1e-12);
  }
}

TEST_CASE("projection composes through two truncated merges") {
  const ModelParams p = hardcore();
  const auto sched = plan_merge_schedule(build_geometry(4, 1, true, false),
                                         build_geometry(1, 1, true, false), {3, 5}, 1);
  REQUIRE(sched.nodes.size() == 7);
  const auto solved = solve_all(sched, p, tight());
  const int root = sched.root();
  const ScheduleNode& rn = sched.root_node();
  const ScheduleNode& na = sched.nodes[rn.child_a];
  const ScheduleNode& nb = sched.nodes[rn.child_b];
  REQUIRE(solved[root].cluster.dim == 5);
  REQUIRE(solved[rn.child_a].cluster.dim == 3);

  const DenseMatrix id = DenseMatrix::Identity(2, 2);
  auto level1 = [&](const ScheduleNode& n, const SolvedCluster& sc) {
    return corner_isometry(sc.cluster, id, id, solved[n.child_a].cluster, solved[n.child_b].cluster);
  };
  const DenseMatrix wa = level1(na, solved[rn.child_a]);
  const DenseMatrix wb = level1(nb, solved[rn.child_b]);
  const DenseMatrix w = corner_isometry(solved[root].cluster, wa, wb, solved[rn.child_a].cluster,
                                        solved[rn.child_b].cluster);
  CHECK(max_abs(w.adjoint() * w - DenseMatrix::Identity(5, 5)) < 1e-12);
  const Cluster fock = build_base_cluster(rn.geometry, p, rn.tracked_pairs);
  for (int s = 0; s < 4; ++s) {
    CHECK(max_abs(fock.ops.sites[s].b.rotated(w) - solved[root].cluster.ops.sites[s].b.to_dense()) <
          1e-12);
  }
  for (const auto& [key, po] : fock.ops.pairs) {
    const PairOperators* q = solved[root].cluster.ops.find_pair(key.first, key.second);
    REQUIRE(q != nullptr);
    CHECK(max_abs(po.hop.rotated(w) - q->hop.to_dense()) < 1e-12);
  }
}

TEST_CASE("corner basis: trace preservation and positivity") {
  const ModelParams p = hardcore();
  const auto sched = plan_merge_schedule(build_geometry(2, 2, true, true),
                                         build_geometry(2, 1, true, true), {10}, 1);
  const auto solved = solve_all(sched, p, SolverSettings{});
  const Cluster& c = solved.back().cluster;
  REQUIRE(c.dim == 10);
  const Operator h = assemble_hamiltonian(c.ops, c.geometry, p);
  const auto jumps = jump_operators(c.ops, p);
  std::mt19937_64 gen(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    DenseMatrix x(10, 10);
    for (Index j = 0; j < 10; ++j)
      for (Index i = 0; i < 10; ++i) x(i, j) = cplx(g(gen), g(gen));
    DenseMatrix rho = x * x.adjoint();
    rho /= rho.trace();
    const DenseMatrix d = lindblad_rhs(rho, h, jumps);
    CHECK(std::abs(d.trace()) < 1e-12);
    CHECK(max_abs(d - d.adjoint()) < 1e-12);
  }
  for (const auto& s : solved) {
    CHECK(s.cluster.eig->values.minCoeff() >= 0.0);
    CHECK(hermitian_eig(s.cluster.rho->matrix).values.minCoeff() > -1e-8);
  }
}

TEST_CASE("pipeline at full M reproduces the null-space steady state") {
  const ModelParams p = hardcore();
  const Geometry target = build_geometry(2, 2, true, true);
  const auto sched = plan_merge_schedule(target, build_geometry(2, 1, true, true), {0}, 1);
  const auto result = run_schedule(sched, p, tight());
  const Cluster& c = result.root->cluster;
  REQUIRE(c.dim == 16);
  CHECK(result.solves.size() == 2);  // the two leaves share one solve

  std::vector<SitePair> pairs;
  for (const auto& b : target.bonds) pairs.push_back({b.j, b.l});
  Cluster fock = build_base_cluster(target, p, pairs);
  const DensityMatrix exact =
      steady_state_nullspace(assemble_hamiltonian(fock.ops, target, p), jump_operators(fock.ops, p));

  // a standalone solve of the leaf reproduces the cached child
  const SolvedCluster& half = *run_schedule(plan_merge_schedule(build_geometry(2, 1, true, true),
                                                                build_geometry(2, 1, true, true),
                                                                {0}, 1),
                                            p, tight())
                                   .root;
  const DenseMatrix id = DenseMatrix::Identity(4, 4);
  const DenseMatrix w = corner_isometry(c, id, id, half.cluster, half.cluster);
  const DenseMatrix back = w * c.rho->matrix * w.adjoint();
  CHECK(max_abs(back - exact.matrix) < 1e-6);

  fock.rho = exact;
  fock.eig = diagonalize_rho(exact);
  const ObservableRecord ref = observe(fock);
  const ObservableRecord got = result.root->report.record;
  CHECK(std::abs(got.n - ref.n) < 1e-6);
  CHECK(std::abs(got.re_b - ref.re_b) < 1e-6);
  REQUIRE(got.g2_nn.has_value());
  CHECK(std::abs(*got.g2_nn - *ref.g2_nn) < 1e-6);
}

TEST_CASE("trajectory solve of a corner agrees with the direct solve") {
  const ModelParams p = hardcore();
  const auto sched = plan_merge_schedule(build_geometry(2, 2, true, true),
                                         build_geometry(2, 1, true, true), {12}, 1);
  const auto direct = run_schedule(sched, p, tight());
  SolverSettings s = tight();
  s.direct_cap = 8;
  s.trajectories.n_trajectories = 160;
  s.trajectories.t_relax = 20.0;
  s.trajectories.t_sample = 60.0;
  const auto mc = run_schedule(sched, p, s);
  const NodeSolve& r = mc.root->report;
  CHECK(r.solver == SolverKind::mcwf);
  CHECK(r.record.has_errors);
  CHECK(std::abs(r.record.n - direct.root->report.record.n) < 4.0 * r.record.n_err + 1e-12);
  CHECK(std::abs(r.record.re_b - direct.root->report.record.re_b) < 4.0 * r.record.re_b_err + 1e-12);
  CHECK(mc.root->cluster.rho->matrix.trace().real() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(!r.spectrum.empty());

  const auto again = run_schedule(sched, p, s);
  CHECK(again.root->report.record.n == r.record.n);
}

TEST_CASE("progression caches subtrees and converge_in_m stops at the full corner") {
  const ModelParams p = hardcore();
  const Geometry target = build_geometry(4, 1, true, false);
  const Geometry base = build_geometry(1, 1, true, false);
  const auto prog = run_progression(target, base, p, {3, 4}, tight());
  REQUIRE(prog.passes.size() == 2);
  // 1x1 leaves solve once, the 2x1 node twice (M = 3 then 4), the root twice
  CHECK(prog.passes[0].solves.size() == 3);
  CHECK(prog.passes[1].solves.size() == 2);

  const auto sched = plan_merge_schedule(target, base, {0}, 1);
  const auto [root, report] = converge_in_m(sched, p, {2, 3, 4, 16}, tight());
  CHECK(report.converged);
  REQUIRE(report.nodes.size() == 2);
  // 2x1 saturates at its full dimension 4
  CHECK(report.nodes[0].attempts.back().m <= 4);
  const auto full = run_schedule(sched, p, tight());
  CHECK(std::abs(root->report.record.n - full.root->report.record.n) <
        1e-3 * full.root->report.record.n);
  CHECK_THROWS_AS(converge_in_m(sched, p, {4, 2}, tight()), Error);
}

TEST_CASE("records_agree") {
  ObservableRecord a, b;
  a.n = 0.1;
  b.n = 0.1 + 1e-5;
  CHECK(records_agree(a, b, 1e-3, 1e-6));
  b.n = 0.11;
  CHECK_FALSE(records_agree(a, b, 1e-3, 1e-6));
  a.n_err = 0.005;
  b.n_err = 0.005;
  CHECK(records_agree(a, b, 1e-3, 1e-6));
  b.n = 0.1;
  b.g2_nn = 1.0;
  CHECK_FALSE(records_agree(a, b, 1e-3, 1e-6));
}
