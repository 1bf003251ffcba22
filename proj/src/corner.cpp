#include "cornerspace/corner.hpp"

#include "cornerspace/checkpoint.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <queue>
#include <sstream>
#include <unordered_set>

namespace cornerspace {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t node_seed(std::uint64_t master, const std::string& key) {
  return StreamRng::mix(master ^ StreamRng::mix(fnv1a(key)));
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

EigenDecomposition diagonalize_rho(const DensityMatrix& rho, double clip_tol) {
  require(rho.dim() >= 1, "diagonalize_rho: empty density matrix");
  require(clip_tol >= 0.0, "diagonalize_rho: clip_tol must be non-negative");
  const double trace = rho.matrix.trace().real();
  require(std::abs(trace - 1.0) < 1e-8, "diagonalize_rho: density matrix trace is not 1",
          ErrorCode::numerical);
  EigenDecomposition e = hermitian_eig(rho.matrix, 1e-8);
  const double tol = clip_tol * trace;
  for (Index k = 0; k < e.values.size(); ++k) {
    double& p = e.values[k];
    if (p >= 0.0) continue;
    if (p < -tol) {
      fail(ErrorCode::numerical, "diagonalize_rho: eigenvalue " + format_double(p) +
                                     " is below -clip_tol; the state lost positivity");
    }
    p = 0.0;
  }
  const double sum = e.values.sum();
  require(sum > 0.0, "diagonalize_rho: spectrum has no weight", ErrorCode::numerical);
  e.values /= sum;
  return e;
}

PairSelection select_top_m_pairs(const RealVector& pa, const RealVector& pb, Index m) {
  const Index na = pa.size(), nb = pb.size();
  require(na >= 1 && nb >= 1, "select_top_m_pairs: empty probability list");
  require(m >= 1, "select_top_m_pairs: M must be >= 1");
  if (m > na * nb) {
    fail(ErrorCode::invalid_argument, "select_top_m_pairs: M = " + std::to_string(m) +
                                          " exceeds the product dimension " +
                                          std::to_string(na * nb));
  }
  auto check = [](const RealVector& p, const char* name) {
    for (Index k = 0; k < p.size(); ++k) {
      require(p[k] >= 0.0 && std::isfinite(p[k]),
              std::string("select_top_m_pairs: negative probability in ") + name);
      require(k == 0 || p[k] <= p[k - 1],
              std::string("select_top_m_pairs: probabilities not descending in ") + name);
    }
    require(p.sum() <= 1.0 + 1e-9, std::string("select_top_m_pairs: ") + name + " sums above 1");
  };
  check(pa, "A");
  check(pb, "B");

  struct Entry {
    double p;
    int i, j;
  };
  // top = largest p, then smallest (i, j)
  auto after = [](const Entry& x, const Entry& y) {
    if (x.p != y.p) return x.p < y.p;
    if (x.i != y.i) return x.i > y.i;
    return x.j > y.j;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(after)> heap(after);
  std::unordered_set<std::uint64_t> seen;
  auto push = [&](int i, int j) {
    if (i >= na || j >= nb) return;
    const std::uint64_t key = static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(nb) + j;
    if (!seen.insert(key).second) return;
    heap.push({pa[i] * pb[j], i, j});
  };
  PairSelection sel;
  sel.pairs.reserve(static_cast<std::size_t>(m));
  push(0, 0);
  while (static_cast<Index>(sel.pairs.size()) < m) {
    const Entry e = heap.top();
    heap.pop();
    sel.pairs.push_back({e.i, e.j, e.p});
    sel.captured += e.p;
    push(e.i + 1, e.j);
    push(e.i, e.j + 1);
  }
  if (!heap.empty()) {
    const double last = sel.pairs.back().p, next = heap.top().p;
    if (last > 0.0 && std::abs(last - next) < 1e-12 * last) {
      sel.degenerate_cut = true;
      int shell = 0;
      for (auto it = sel.pairs.rbegin(); it != sel.pairs.rend(); ++it) {
        if (std::abs(it->p - last) >= 1e-12 * last) break;
        ++shell;
      }
      sel.warning = "corner cut at M = " + std::to_string(m) +
                    " splits a degenerate probability shell (p = " + format_double(last) +
                    ", " + std::to_string(shell) + " selected states in the shell)";
    }
  }
  return sel;
}

Cluster merge_clusters(const Cluster& a, const Cluster& b, const ScheduleNode& node, Index m,
                       OperatorMode mode, PairSelection* selection) {
  require(a.solved() && b.solved(), "merge_clusters: children must be solved",
          ErrorCode::invalid_argument);
  require(static_cast<int>(node.embed_a.size()) == a.geometry.sites() &&
              static_cast<int>(node.embed_b.size()) == b.geometry.sites(),
          "merge_clusters: children do not match the schedule node");
  require(a.n_max == b.n_max, "merge_clusters: children use different boson cutoffs");
  const Index full = a.dim * b.dim;
  if (m == 0) m = full;
  if (m > full) {
    fail(ErrorCode::invalid_argument, "merge_clusters: M = " + std::to_string(m) +
                                          " exceeds dim_A * dim_B = " + std::to_string(full));
  }
  PairSelection sel = select_top_m_pairs(a.eig->values, b.eig->values, m);
  std::vector<std::pair<int, int>> ranks;
  ranks.reserve(sel.pairs.size());
  for (const auto& p : sel.pairs) ranks.emplace_back(p.ra, p.rb);
  auto index = CornerIndex::from_pairs(ranks);

  auto restrict = [](const EigenDecomposition& e, const std::vector<int>& used) {
    DenseMatrix v(e.vectors.rows(), static_cast<Index>(used.size()));
    for (std::size_t k = 0; k < used.size(); ++k) v.col(static_cast<Index>(k)) = e.vectors.col(used[k]);
    return v;
  };
  const DenseMatrix va = restrict(*a.eig, index->used_a);
  const DenseMatrix vb = restrict(*b.eig, index->used_b);

  const int sites = node.geometry.sites();
  std::vector<int> side(sites, -1), local(sites, -1);  // 0 = A, 1 = B
  for (int s = 0; s < static_cast<int>(node.embed_a.size()); ++s) {
    side[node.embed_a[s]] = 0;
    local[node.embed_a[s]] = s;
  }
  for (int s = 0; s < static_cast<int>(node.embed_b.size()); ++s) {
    side[node.embed_b[s]] = 1;
    local[node.embed_b[s]] = s;
  }
  for (int s = 0; s < sites; ++s) require(side[s] >= 0, "merge_clusters: embedding is not onto");

  auto lift = [&](int which, DenseMatrix factor) {
    return which == 0 ? Operator::factorized(std::move(factor), {}, index, false, true)
                      : Operator::factorized({}, std::move(factor), index, true, false);
  };

  Cluster c;
  c.geometry = node.geometry;
  c.n_max = a.n_max;
  c.dim = m;
  c.mode = mode;
  c.corner = index;
  c.ops.dim = m;
  std::vector<DenseMatrix> rb_(sites), rn_(sites);
  for (int s = 0; s < sites; ++s) {
    const Cluster& child = side[s] == 0 ? a : b;
    const DenseMatrix& v = side[s] == 0 ? va : vb;
    const SiteOperators& so = child.ops.sites[local[s]];
    rb_[s] = so.b.rotated(v);
    rn_[s] = so.n.rotated(v);
    DenseMatrix rn2 = so.n2.rotated(v);
    c.ops.sites.push_back({lift(side[s], rb_[s]), lift(side[s], rn_[s]), lift(side[s], std::move(rn2))});
  }

  const std::vector<SitePair>& wanted = mode == OperatorMode::exact ? node.tracked_pairs : node.cross_pairs;
  for (const auto& [pj, pl] : wanted) {
    const int j = std::min(pj, pl), l = std::max(pj, pl);
    if (side[j] == side[l]) {
      const Cluster& child = side[j] == 0 ? a : b;
      const DenseMatrix& v = side[j] == 0 ? va : vb;
      const int cj = local[j], cl = local[l];
      const PairOperators* cp = child.ops.find_pair(cj, cl);
      if (!cp) {
        fail(ErrorCode::internal, "merge_clusters: child " + child.geometry.label() +
                                      " does not carry pair " + std::to_string(cj) + "-" +
                                      std::to_string(cl));
      }
      DenseMatrix hop = cp->hop.rotated(v);
      if (cj > cl) hop.adjointInPlace();  // stored as b_min^dagger b_max
      c.ops.pairs[{j, l}] = {lift(side[j], std::move(hop)), lift(side[j], cp->density.rotated(v))};
    } else {
      // b_j^dagger b_l with the A factor on the left
      const int sa = side[j] == 0 ? j : l, sb = side[j] == 0 ? l : j;
      DenseMatrix left = side[j] == 0 ? DenseMatrix(rb_[sa].adjoint()) : rb_[sa];
      DenseMatrix right = side[j] == 0 ? rb_[sb] : DenseMatrix(rb_[sb].adjoint());
      Operator hop = Operator::factorized(std::move(left), std::move(right), index, false, false);
      Operator dens = Operator::factorized(rn_[sa], rn_[sb], index, false, false);
      c.ops.pairs[{j, l}] = {std::move(hop), std::move(dens)};
    }
  }

  DenseMatrix rho0 = DenseMatrix::Zero(m, m);
  for (Index s = 0; s < m; ++s) rho0(s, s) = sel.pairs[static_cast<std::size_t>(s)].p;
  if (!(sel.captured > 0.0)) fail(ErrorCode::numerical, "merge_clusters: corner carries no probability");
  rho0 /= sel.captured;
  c.rho = DensityMatrix{std::move(rho0), c.basis_tag()};

  c.provenance.leaf = false;
  c.provenance.m = static_cast<int>(m);
  c.provenance.child_a_dim = a.dim;
  c.provenance.child_b_dim = b.dim;
  c.provenance.child_a = a.basis_tag();
  c.provenance.child_b = b.basis_tag();
  c.provenance.captured_probability = sel.captured;
  if (selection) *selection = std::move(sel);
  return c;
}

std::string to_string(SolverKind k) { return k == SolverKind::direct ? "direct" : "mcwf"; }

OperatorMode SolverSettings::mode_for(Index m) const {
  if (operator_mode) return *operator_mode;
  return m > fast_mode_above ? OperatorMode::fast : OperatorMode::exact;
}

SolvedCluster solve_cluster(Cluster c, const ModelParams& params, const SolverSettings& settings,
                            std::uint64_t seed) {
  require(c.rho.has_value(), "solve_cluster: cluster has no initial density matrix");
  const auto t0 = std::chrono::steady_clock::now();
  NodeSolve rep;
  rep.geometry = c.geometry;
  rep.m = c.dim;
  rep.leaf = c.provenance.leaf;
  rep.mode = c.mode;
  rep.seed = seed;
  rep.captured_probability = c.provenance.captured_probability;
  rep.solver = settings.solver_for(c.dim);

  if (rep.solver == SolverKind::direct) {
    const SteadyStateReport r = evolve_to_steady_state(c, params, *c.rho, settings.direct);
    if (r.reason == Termination::diverged) {
      fail(ErrorCode::numerical, "steady state of " + c.geometry.label() + " at M = " +
                                     std::to_string(c.dim) + " diverged at t = " +
                                     format_double(r.elapsed));
    }
    rep.converged = r.reason == Termination::converged;
    rep.termination = to_string(r.reason);
    rep.dt = r.dt;
    c.rho = DensityMatrix{r.rho.matrix, c.basis_tag()};
    c.eig = diagonalize_rho(*c.rho, settings.clip_tol);
    rep.record = observe(c);
    const bool hard = c.n_max == 1;
    for (const auto& v : r.history) {
      TimePoint tp{v.t, v.n, std::nullopt};
      if (hard || v.n > 1e-14) tp.g2 = v.g2;
      rep.series.push_back(tp);
    }
  } else {
    const Operator h = assemble_hamiltonian(c.ops, c.geometry, params, c.mode);
    const auto jumps = jump_operators(c.ops, params);
    const ObservableSet obs(c);
    TrajectoryConfig cfg = settings.trajectories;
    cfg.master_seed = seed;
    const EigenDecomposition start = diagonalize_rho(*c.rho, settings.clip_tol);
    const TrajectoryEnsemble ens = run_ensemble(h, jumps, start, cfg, &obs, c.geometry);
    rep.dt = ens.dt;
    rep.termination = "sampled";
    rep.record = observable_stats(ens);
    for (const auto& [t, rec] : ensemble_time_series(ens)) rep.series.push_back({t, rec.n, rec.g2_onsite});
    if (cfg.accumulate_density) {
      DensityMatrix est = estimate_density_matrix(ens);
      est.basis = c.basis_tag();
      c.rho = std::move(est);
      c.eig = diagonalize_rho(*c.rho, settings.clip_tol);
    } else {
      c.rho.reset();
    }
  }
  if (c.eig) rep.spectrum = probability_spectrum(c);
  if (c.mode == OperatorMode::fast) {
    int products = 0;
    for (const auto& bond : c.geometry.bonds)
      if (!c.ops.find_pair(bond.j, bond.l)) ++products;
    if (products > 0) {
      rep.warnings.push_back("fast operator mode on " + c.geometry.label() + " at M = " +
                             std::to_string(c.dim) + ": " + std::to_string(products) +
                             " bonds use products of projected site operators");
    }
  }
  if (!rep.converged) {
    rep.warnings.push_back("steady state of " + c.geometry.label() + " at M = " +
                           std::to_string(c.dim) + " not converged (" + rep.termination + ")");
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(c), std::move(rep)};
}

namespace {
DensityMatrix meanfield_start(const ModelParams& params, int sites) {
  MeanFieldOptions o;
  o.throw_on_failure = false;
  const MeanFieldSolution mf = gutzwiller_fixed_point(params, o);
  return {meanfield_product_state(mf, sites), "fock"};
}
}  // namespace

SolvedCluster solve_brute_force(const Geometry& geom, const ModelParams& params,
                                const SolverSettings& settings) {
  std::vector<SitePair> pairs;
  for (const auto& b : geom.bonds) pairs.push_back({b.j, b.l});
  Cluster c = build_base_cluster(geom, params, pairs, settings.brute_force_cap);
  SolverSettings s = settings;
  c.rho = meanfield_start(params, geom.sites());
  const std::string key = "F" + geom.label();
  SolvedCluster out = solve_cluster(std::move(c), params, s, node_seed(s.trajectories.master_seed, key));
  out.report.brute_force = true;
  out.report.leaf = true;
  return out;
}

SolveCache::SolveCache(std::string checkpoint_dir, std::string fingerprint)
    : dir_(std::move(checkpoint_dir)), fingerprint_(std::move(fingerprint)) {
  if (!dir_.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) fail(ErrorCode::io, "cannot create checkpoint directory " + dir_ + ": " + ec.message());
  }
}

std::string SolveCache::checkpoint_path(const std::string& key) const {
  char name[40];
  std::snprintf(name, sizeof name, "%016llx.cnrs",
                static_cast<unsigned long long>(fnv1a(fingerprint_ + "|" + key)));
  return (std::filesystem::path(dir_) / name).string();
}

std::shared_ptr<const SolvedCluster> SolveCache::find(const std::string& key) {
  auto it = map_.find(key);
  if (it != map_.end()) return it->second;
  if (dir_.empty()) return nullptr;
  const std::string path = checkpoint_path(key);
  if (!std::filesystem::exists(path)) return nullptr;
  auto solved = std::make_shared<SolvedCluster>();
  solved->cluster = load_cluster(path);
  const Cluster& c = solved->cluster;
  if (!c.solved()) fail(ErrorCode::io, "checkpoint " + path + " holds an unsolved cluster");
  NodeSolve& rep = solved->report;
  rep.geometry = c.geometry;
  rep.m = c.dim;
  rep.leaf = c.provenance.leaf;
  rep.mode = c.mode;
  rep.record = observe(c);
  if (std::filesystem::exists(path + ".rec")) {
    SolveSummary sum = load_summary(path + ".rec");
    sum.record.site_n = rep.record.site_n;
    sum.record.site_b = rep.record.site_b;
    sum.record.site_g2 = rep.record.site_g2;
    sum.record.bond_g2_nn = rep.record.bond_g2_nn;
    rep.record = std::move(sum.record);
    rep.dt = sum.dt;
    rep.seed = sum.seed;
  }
  rep.spectrum = probability_spectrum(c);
  rep.captured_probability = c.provenance.captured_probability;
  rep.termination = "restored";
  rep.restored = true;
  map_[key] = solved;
  restored_.insert(key);
  return solved;
}

void SolveCache::insert(const std::string& key, std::shared_ptr<const SolvedCluster> v) {
  if (!dir_.empty() && v->cluster.solved()) {
    const std::string path = checkpoint_path(key);
    save_cluster(v->cluster, path);
    save_summary({v->report.record, v->report.dt, v->report.seed}, path + ".rec");
  }
  map_[key] = std::move(v);
}

namespace {

std::string mode_tag(OperatorMode m) { return m == OperatorMode::exact ? "x" : "f"; }

std::shared_ptr<const SolvedCluster> solve_leaf(const MergeSchedule& schedule, int i,
                                                const ModelParams& params,
                                                const SolverSettings& settings,
                                                const std::string& key) {
  const ScheduleNode& node = schedule.nodes[i];
  Cluster c = build_base_cluster(node.geometry, params, node.tracked_pairs, settings.leaf_cap);
  c.rho = meanfield_start(params, node.geometry.sites());
  auto solved = std::make_shared<SolvedCluster>(
      solve_cluster(std::move(c), params, settings, node_seed(settings.trajectories.master_seed, key)));
  solved->report.node = i;
  solved->report.leaf = true;
  return solved;
}

std::shared_ptr<const SolvedCluster> solve_merge(const MergeSchedule& schedule, int i,
                                                 const SolvedCluster& a, const SolvedCluster& b,
                                                 Index m, const ModelParams& params,
                                                 const SolverSettings& settings,
                                                 const std::string& key) {
  const ScheduleNode& node = schedule.nodes[i];
  PairSelection sel;
  Cluster merged = merge_clusters(a.cluster, b.cluster, node, m, settings.mode_for(m), &sel);
  auto solved = std::make_shared<SolvedCluster>(solve_cluster(
      std::move(merged), params, settings, node_seed(settings.trajectories.master_seed, key)));
  solved->report.node = i;
  if (sel.degenerate_cut) solved->report.warnings.push_back(sel.warning);
  return solved;
}

NodeSolve restored_report(const SolvedCluster& s, int node, const SolverSettings& settings) {
  NodeSolve r = s.report;
  r.node = node;
  r.solver = settings.solver_for(r.m);
  return r;
}

Index effective_m(int m, const Cluster& a, const Cluster& b) {
  const Index full = a.dim * b.dim;
  return m == 0 ? full : std::min<Index>(m, full);
}

}  // namespace

PipelineResult run_schedule(const MergeSchedule& schedule, const ModelParams& params,
                            const SolverSettings& settings, SolveCache* cache) {
  params.validate();
  SolveCache local;
  if (!cache) cache = &local;
  const int n = static_cast<int>(schedule.nodes.size());
  std::vector<std::shared_ptr<const SolvedCluster>> solved(n);
  std::vector<std::string> keys(n);
  PipelineResult out;
  for (int i = 0; i < n; ++i) {
    const ScheduleNode& node = schedule.nodes[i];
    if (node.is_leaf()) {
      keys[i] = "L" + node.geometry.label();
      solved[i] = cache->find(keys[i]);
      if (solved[i] && cache->consume_restored(keys[i])) out.solves.push_back(restored_report(*solved[i], i, settings));
      if (!solved[i]) {
        solved[i] = solve_leaf(schedule, i, params, settings, keys[i]);
        cache->insert(keys[i], solved[i]);
        out.solves.push_back(solved[i]->report);
      }
    } else {
      const SolvedCluster& a = *solved[node.child_a];
      const SolvedCluster& b = *solved[node.child_b];
      const Index m = effective_m(node.m, a.cluster, b.cluster);
      keys[i] = "(" + keys[node.child_a] + "+" + keys[node.child_b] + ")" + node.geometry.label() +
                "@" + std::to_string(m) + mode_tag(settings.mode_for(m));
      solved[i] = cache->find(keys[i]);
      if (solved[i] && cache->consume_restored(keys[i])) out.solves.push_back(restored_report(*solved[i], i, settings));
      if (!solved[i]) {
        solved[i] = solve_merge(schedule, i, a, b, m, params, settings, keys[i]);
        cache->insert(keys[i], solved[i]);
        out.solves.push_back(solved[i]->report);
      }
    }
  }
  for (const auto& s : out.solves)
    out.warnings.insert(out.warnings.end(), s.warnings.begin(), s.warnings.end());
  out.root = solved[schedule.root()];
  return out;
}

bool records_agree(const ObservableRecord& a, const ObservableRecord& b, double tol,
                   double floor) {
  auto close = [&](double x, double y, double ex, double ey) {
    const double d = std::abs(x - y);
    if (d <= tol * std::max({std::abs(x), std::abs(y), floor})) return true;
    const double se = std::sqrt(ex * ex + ey * ey);
    return se > 0.0 && d <= 3.0 * se;
  };
  auto close_opt = [&](const std::optional<double>& x, const std::optional<double>& y,
                       const std::optional<double>& ex, const std::optional<double>& ey) {
    if (x.has_value() != y.has_value()) return false;
    if (!x) return true;
    return close(*x, *y, ex.value_or(0.0), ey.value_or(0.0));
  };
  return close(a.n, b.n, a.n_err, b.n_err) && close(a.re_b, b.re_b, a.re_b_err, b.re_b_err) &&
         close(a.im_b, b.im_b, a.im_b_err, b.im_b_err) &&
         close_opt(a.g2_onsite, b.g2_onsite, a.g2_err, b.g2_err) &&
         close_opt(a.g2_nn, b.g2_nn, a.g2_nn_err, b.g2_nn_err);
}

ProgressionResult run_progression(const Geometry& target, const Geometry& base,
                                  const ModelParams& params, const std::vector<int>& m_list,
                                  const SolverSettings& settings, SolveCache* cache) {
  require(!m_list.empty(), "run_progression: empty M list", ErrorCode::config);
  ProgressionResult out;
  SolveCache local;
  if (!cache) cache = &local;
  bool all_converged = true;
  for (int m : m_list) {
    const MergeSchedule sched =
        plan_merge_schedule(target, base, {m}, params.n_max, settings.leaf_cap);
    PipelineResult pass = run_schedule(sched, params, settings, cache);
    for (const auto& s : pass.solves) all_converged = all_converged && s.converged;
    out.warnings.insert(out.warnings.end(), pass.warnings.begin(), pass.warnings.end());
    out.m_values.push_back(m);
    out.passes.push_back(std::move(pass));
  }
  out.converged = all_converged;
  if (out.passes.size() >= 2) {
    const auto& last = out.passes.back().root->report.record;
    const auto& prev = out.passes[out.passes.size() - 2].root->report.record;
    if (!records_agree(prev, last, settings.obs_tol, settings.obs_floor)) {
      out.converged = false;
      out.warnings.push_back("root observables still change between M = " +
                             std::to_string(m_list[m_list.size() - 2]) + " and M = " +
                             std::to_string(m_list.back()) + " beyond obs_tol");
    }
  }
  return out;
}

std::pair<std::shared_ptr<const SolvedCluster>, ConvergenceReport> converge_in_m(
    const MergeSchedule& schedule, const ModelParams& params, const std::vector<int>& m_list,
    const SolverSettings& settings) {
  params.validate();
  require(!m_list.empty(), "converge_in_m: empty M list", ErrorCode::config);
  for (std::size_t k = 1; k < m_list.size(); ++k) {
    require(m_list[k] > m_list[k - 1] && m_list[k - 1] > 0,
            "converge_in_m: M list must be positive and strictly ascending", ErrorCode::config);
  }
  ConvergenceReport report;
  const int n = static_cast<int>(schedule.nodes.size());
  std::vector<std::shared_ptr<const SolvedCluster>> solved(n);
  std::map<std::string, std::shared_ptr<const SolvedCluster>> by_shape;
  for (int i = 0; i < n; ++i) {
    const ScheduleNode& node = schedule.nodes[i];
    const std::string shape = node.geometry.label();
    if (auto it = by_shape.find(shape); it != by_shape.end()) {
      solved[i] = it->second;
      continue;
    }
    if (node.is_leaf()) {
      solved[i] = solve_leaf(schedule, i, params, settings, "L" + shape);
      report.leaves.push_back(solved[i]->report);
      report.converged = report.converged && solved[i]->report.converged;
    } else {
      const SolvedCluster& a = *solved[node.child_a];
      const SolvedCluster& b = *solved[node.child_b];
      NodeConvergence nc;
      nc.node = i;
      Index last_m = -1;
      std::vector<double> diffs;
      for (int m : m_list) {
        const Index eff = effective_m(m, a.cluster, b.cluster);
        if (eff == last_m) break;  // capped at the full product space
        last_m = eff;
        auto cur = solve_merge(schedule, i, a, b, eff, params, settings,
                               "C" + shape + "@" + std::to_string(eff));
        const bool exact = eff == a.cluster.dim * b.cluster.dim;
        if (!nc.attempts.empty()) {
          const ObservableRecord& prev = nc.attempts.back().record;
          diffs.push_back(cur->report.record.n - prev.n);
          if (records_agree(prev, cur->report.record, settings.obs_tol, settings.obs_floor)) {
            nc.converged = true;
          }
        }
        nc.attempts.push_back(cur->report);
        solved[i] = cur;
        if (exact) nc.converged = true;
        if (nc.converged) break;
      }
      for (std::size_t k = 2; k < diffs.size(); ++k) {
        if (diffs[k] * diffs[k - 1] < 0 && diffs[k - 1] * diffs[k - 2] < 0 &&
            std::abs(diffs[k]) > std::abs(diffs[k - 1]) &&
            std::abs(diffs[k - 1]) > std::abs(diffs[k - 2])) {
          nc.oscillating = true;
        }
      }
      for (const auto& at : nc.attempts)
        report.warnings.insert(report.warnings.end(), at.warnings.begin(), at.warnings.end());
      if (nc.oscillating) {
        report.warnings.push_back("node " + shape + ": observables oscillate with growing amplitude in M");
      }
      if (!nc.converged) {
        report.warnings.push_back("node " + shape + ": M list exhausted without convergence");
      }
      report.converged = report.converged && nc.converged && !nc.oscillating;
      report.nodes.push_back(std::move(nc));
    }
    by_shape[shape] = solved[i];
  }
  for (const auto& l : report.leaves)
    report.warnings.insert(report.warnings.end(), l.warnings.begin(), l.warnings.end());
  return {solved[schedule.root()], std::move(report)};
}

}  // namespace cornerspace
