#include "cornerspace/trajectories.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "cornerspace/steadystate.hpp"

namespace cornerspace {

int configured_threads() {
  if (const char* env = std::getenv("CORNERSPACE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 1024) return static_cast<int>(v);
    fail(ErrorCode::config, std::string("CORNERSPACE_THREADS must be a positive integer, got '") +
                                env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void TrajectoryConfig::validate() const {
  require(n_trajectories >= 1, "trajectories: n_trajectories must be >= 1", ErrorCode::config);
  require(dt >= 0.0 && std::isfinite(dt), "trajectories: dt must be >= 0", ErrorCode::config);
  require(dt_factor > 0.0, "trajectories: dt_factor must be positive", ErrorCode::config);
  require(t_relax >= 0.0 && t_sample > 0.0, "trajectories: t_relax >= 0 and t_sample > 0 required",
          ErrorCode::config);
  require(sample_stride > 0.0 && sample_stride <= t_sample,
          "trajectories: sample_stride must be in (0, t_sample]", ErrorCode::config);
  require(jump_time_tol > 0.0, "trajectories: jump_time_tol must be positive", ErrorCode::config);
  require(batch >= 1, "trajectories: batch must be >= 1", ErrorCode::config);
  require(threads >= 0, "trajectories: threads must be >= 0", ErrorCode::config);
}

TrajectoryEngine::TrajectoryEngine(const Operator& h, const std::vector<Operator>& jumps,
                                   const TrajectoryConfig& config,
                                   const ObservableSet* observables)
    : dim_(h.dim()), config_(config), observables_(observables) {
  config_.validate();
  require(dim_ >= 1, "TrajectoryEngine: empty Hamiltonian");
  Operator decay;
  bool first = true;
  for (const auto& c : jumps) {
    require(c.dim() == dim_, "TrajectoryEngine: jump operator dimension mismatch");
    const Operator cc = c.adjoint() * c;
    decay = first ? cc : decay + cc;
    first = false;
    jumps_.emplace_back(c);
  }
  const SpectrumBounds hb = hermitian_bounds(h);
  const double decay_norm = first ? 0.0 : std::max(hermitian_bounds(decay).hi, 0.0);
  Operator shifted = h + Operator(sparse_identity(dim_)).scaled(-hb.center());
  if (!first) shifted = shifted + decay.scaled(cplx(0.0, -0.5));
  h_eff_ = ApplyMatrix(shifted);

  if (config_.propagator == Propagator::spectral) {
    const DenseMatrix a = shifted.to_dense();
    Eigen::ComplexEigenSolver<DenseMatrix> es(a);
    if (es.info() != Eigen::Success)
      fail(ErrorCode::numerical, "spectral propagator: eigendecomposition of H_eff failed");
    right_ = es.eigenvectors();
    lambda_ = es.eigenvalues();
    left_ = Eigen::PartialPivLU<DenseMatrix>(right_).inverse();
    const double scale = std::max(a.norm(), 1e-300);
    const double err = (right_ * lambda_.asDiagonal() * left_ - a).norm() / scale;
    if (!(err < 1e-9)) {
      fail(ErrorCode::numerical,
           "spectral propagator: H_eff eigenbasis too ill-conditioned (reconstruction error " +
               std::to_string(err) + "); use the rk4 propagator");
    }
    for (Index k = 0; k < lambda_.size(); ++k) {
      if (lambda_[k].imag() > 1e-10 * scale)
        fail(ErrorCode::numerical, "spectral propagator: H_eff has a growing mode");
    }
    steps_per_stride_ = 1;
    dt_ = config_.sample_stride;
    const Vector phase = (-kI * dt_ * lambda_).array().exp().matrix();
    stride_step_ = right_ * phase.asDiagonal() * left_;
    return;
  }

  const double omega = 0.5 * hb.spread() + 0.5 * decay_norm;
  double dt = config_.dt > 0.0 ? config_.dt
                               : config_.dt_factor * 2.0 * std::numbers::pi / std::max(omega, 1e-12);
  steps_per_stride_ =
      std::max(1, static_cast<int>(std::ceil(config_.sample_stride / dt - 1e-9)));
  dt_ = config_.sample_stride / steps_per_stride_;
}

DenseMatrix TrajectoryEngine::derivative(const DenseMatrix& psi) const {
  DenseMatrix out;
  h_eff_.apply_into(psi, out);
  out *= -kI;
  return out;
}

Vector TrajectoryEngine::derivative(const Vector& psi) const {
  return -kI * h_eff_.apply(psi);
}

Vector TrajectoryEngine::advance(const Vector& psi, double tau) const {
  if (lambda_.size() > 0) {
    const Vector phase = (-kI * tau * lambda_).array().exp().matrix();
    return right_ * phase.cwiseProduct(left_ * psi);
  }
  return rk4_step([this](double, const Vector& y) { return derivative(y); }, psi, 0.0, tau);
}

std::vector<TrajectorySamples> TrajectoryEngine::run_batch(
    const std::vector<std::uint64_t>& indices, const DenseMatrix& psi0,
    std::vector<StreamRng>& rngs, DenseMatrix* density_sum, long long* snapshot_count) const {
  const Index cols = psi0.cols();
  require(psi0.rows() == dim_, "run_batch: initial states have wrong dimension");
  require(static_cast<Index>(indices.size()) == cols && static_cast<Index>(rngs.size()) == cols,
          "run_batch: indices, states and streams differ in count");

  std::vector<TrajectorySamples> out(static_cast<std::size_t>(cols));
  std::vector<double> threshold(static_cast<std::size_t>(cols));
  for (Index c = 0; c < cols; ++c) {
    out[c].index = indices[c];
    threshold[c] = rngs[c].uniform_open_closed();
  }

  auto f_batch = [this](double, const DenseMatrix& y) { return derivative(y); };

  const double t_end = config_.t_relax + config_.t_sample;
  const int strides = std::max(1, static_cast<int>(std::llround(t_end / config_.sample_stride)));
  const double tiny = 1e-9 * config_.sample_stride;
  const int snapshots_per_traj = [&] {
    int k = 0;
    for (int s = 0; s <= strides; ++s)
      if (s * config_.sample_stride >= config_.t_relax - tiny) ++k;
    return k;
  }();
  if (config_.keep_snapshots) {
    for (auto& tr : out) tr.snapshots.resize(dim_, snapshots_per_traj);
  }
  std::vector<int> snap_col(static_cast<std::size_t>(cols), 0);

  DenseMatrix psi = psi0;
  for (Index c = 0; c < cols; ++c) {
    const double nrm = psi.col(c).norm();
    require(std::abs(nrm - 1.0) < 1e-8, "run_batch: initial states must be normalized");
  }

  auto record = [&](double t) {
    DenseMatrix unit(dim_, cols);
    for (Index c = 0; c < cols; ++c) {
      const double n2 = psi.col(c).squaredNorm();
      unit.col(c) = psi.col(c) / std::sqrt(n2);
      out[c].times.push_back(t);
      out[c].norms.push_back(n2);
    }
    if (observables_) {
      std::vector<RawMoments> m = observables_->moments_batch(unit);
      for (Index c = 0; c < cols; ++c) out[c].moments.push_back(std::move(m[c]));
    }
    if (t >= config_.t_relax - tiny) {
      if (density_sum) {
        density_sum->noalias() += unit * unit.adjoint();
        *snapshot_count += cols;
      }
      if (config_.keep_snapshots) {
        for (Index c = 0; c < cols; ++c) out[c].snapshots.col(snap_col[c]++) = unit.col(c);
      }
    }
  };

  // State of each listed column advanced by its own time; `coef` holds the
  // columns in the H_eff eigenbasis when the spectral propagator is active.
  auto advance_each = [&](const DenseMatrix& cur, const DenseMatrix& coef,
                          const std::vector<double>& taus) {
    const Index k = cur.cols();
    if (lambda_.size() > 0) {
      DenseMatrix phased(dim_, k);
      for (Index i = 0; i < k; ++i)
        phased.col(i) = (-kI * taus[i] * lambda_).array().exp().matrix().cwiseProduct(coef.col(i));
      return DenseMatrix(right_ * phased);
    }
    DenseMatrix out_states(dim_, k);
    for (Index i = 0; i < k; ++i) out_states.col(i) = advance(cur.col(i), taus[i]);
    return out_states;
  };

  auto jump = [&](Index c, const Vector& at, double when) {
    std::vector<Vector> candidates;
    std::vector<double> weights;
    double total = 0.0;
    for (const auto& j : jumps_) {
      candidates.push_back(j.apply(at));
      weights.push_back(candidates.back().squaredNorm());
      total += weights.back();
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
      fail(ErrorCode::numerical, "trajectory " + std::to_string(out[c].index) +
                                     ": jump with vanishing or non-finite total rate");
    }
    const double u = rngs[c].uniform() * total;
    std::size_t k = 0;
    double acc = weights[0];
    while (k + 1 < weights.size() && u >= acc) acc += weights[++k];
    out[c].jump_times.push_back(when);
    out[c].jump_channels.push_back(static_cast<int>(k));
    threshold[c] = rngs[c].uniform_open_closed();
    return Vector(candidates[k] / std::sqrt(weights[k]));
  };

  // Jumps of the listed columns over [t, t + h], starting from start.col(i).
  // Columns are bisected in lockstep so each level is one matrix product;
  // every column sees the same arithmetic it would see alone.
  auto resolve_jumps = [&](std::vector<Index> active, DenseMatrix cur, double t, double h,
                           DenseMatrix& next) {
    std::vector<double> done(active.size(), 0.0);
    while (!active.empty()) {
      const Index k = static_cast<Index>(active.size());
      DenseMatrix coef;
      if (lambda_.size() > 0) coef = left_ * cur;
      std::vector<double> rest(active.size());
      for (Index i = 0; i < k; ++i) rest[i] = h - done[i];
      const DenseMatrix end = advance_each(cur, coef, rest);

      std::vector<Index> keep;
      for (Index i = 0; i < k; ++i) {
        if (end.col(i).squaredNorm() >= threshold[active[i]]) {
          next.col(active[i]) = end.col(i);
        } else {
          keep.push_back(i);
        }
      }
      if (keep.empty()) return;
      const Index m = static_cast<Index>(keep.size());
      DenseMatrix sub_cur(dim_, m), sub_coef;
      if (lambda_.size() > 0) sub_coef.resize(dim_, m);
      std::vector<double> lo(keep.size(), 0.0), hi(keep.size());
      for (Index i = 0; i < m; ++i) {
        sub_cur.col(i) = cur.col(keep[i]);
        if (lambda_.size() > 0) sub_coef.col(i) = coef.col(keep[i]);
        hi[i] = rest[keep[i]];
      }
      while (true) {
        std::vector<double> mid(keep.size());
        bool any = false;
        for (Index i = 0; i < m; ++i) {
          const bool open = hi[i] - lo[i] > config_.jump_time_tol;
          any = any || open;
          mid[i] = open ? 0.5 * (lo[i] + hi[i]) : hi[i];
        }
        if (!any) break;
        const DenseMatrix probe = advance_each(sub_cur, sub_coef, mid);
        for (Index i = 0; i < m; ++i) {
          if (!(hi[i] - lo[i] > config_.jump_time_tol)) continue;
          if (probe.col(i).squaredNorm() < threshold[active[keep[i]]]) {
            hi[i] = mid[i];
          } else {
            lo[i] = mid[i];
          }
        }
      }
      const DenseMatrix at = advance_each(sub_cur, sub_coef, hi);

      std::vector<Index> still;
      std::vector<double> still_done;
      DenseMatrix still_cur(dim_, m);
      for (Index i = 0; i < m; ++i) {
        const Index c = active[keep[i]];
        const double d = done[keep[i]] + hi[i];
        const Vector after = jump(c, at.col(i), t + d);
        if (d >= h - 1e-15) {
          next.col(c) = after;
        } else {
          still_cur.col(static_cast<Index>(still.size())) = after;
          still.push_back(c);
          still_done.push_back(d);
        }
      }
      active = std::move(still);
      done = std::move(still_done);
      cur = still_cur.leftCols(static_cast<Index>(active.size()));
    }
  };

  record(0.0);
  std::vector<double> prev_norm(static_cast<std::size_t>(cols));
  for (int s = 1; s <= strides; ++s) {
    for (int k = 0; k < steps_per_stride_; ++k) {
      const double t = ((s - 1) * steps_per_stride_ + k) * dt_;
      for (Index c = 0; c < cols; ++c) prev_norm[c] = psi.col(c).squaredNorm();
      DenseMatrix next =
          lambda_.size() > 0 ? DenseMatrix(stride_step_ * psi) : rk4_step(f_batch, psi, t, dt_);
      std::vector<Index> crossing;
      for (Index c = 0; c < cols; ++c) {
        const double n2 = next.col(c).squaredNorm();
        if (!std::isfinite(n2) || n2 > prev_norm[c] * (1.0 + 1e-8)) {
          fail(ErrorCode::numerical,
               "trajectory " + std::to_string(out[c].index) +
                   ": norm increased between jumps (step too large or H_eff not dissipative)");
        }
        if (n2 < threshold[c]) crossing.push_back(c);
      }
      if (!crossing.empty()) {
        DenseMatrix start(dim_, static_cast<Index>(crossing.size()));
        for (std::size_t i = 0; i < crossing.size(); ++i)
          start.col(static_cast<Index>(i)) = psi.col(crossing[i]);
        resolve_jumps(crossing, start, t, dt_, next);
      }
      psi.swap(next);
    }
    record(s * config_.sample_stride);
  }
  return out;
}

TrajectorySamples run_trajectory(const Operator& h, const std::vector<Operator>& jumps,
                                 const Vector& psi0, const TrajectoryConfig& config,
                                 std::uint64_t seed, const ObservableSet* observables) {
  const TrajectoryEngine engine(h, jumps, config, observables);
  std::vector<StreamRng> rngs{StreamRng(config.master_seed, seed)};
  DenseMatrix start = psi0 / psi0.norm();
  auto res = engine.run_batch({seed}, start, rngs, nullptr, nullptr);
  return std::move(res.front());
}

TrajectoryEnsemble run_ensemble(const Operator& h, const std::vector<Operator>& jumps,
                                const EigenDecomposition& rho0, const TrajectoryConfig& config,
                                const ObservableSet* observables, const Geometry& geometry) {
  const TrajectoryEngine engine(h, jumps, config, observables);
  const Index d = engine.dim();
  require(rho0.vectors.rows() == d && rho0.values.size() >= 1,
          "run_ensemble: initial density eigenbasis has wrong dimension");
  std::vector<double> cumulative;
  double acc = 0.0;
  for (Index r = 0; r < rho0.values.size(); ++r) {
    acc += std::max(rho0.values[r], 0.0);
    cumulative.push_back(acc);
  }
  require(acc > 0.0, "run_ensemble: initial density has no positive weight");

  const int n = config.n_trajectories;
  const int nb = (n + config.batch - 1) / config.batch;
  struct BatchResult {
    std::vector<TrajectorySamples> samples;
    DenseMatrix sum;
    long long count = 0;
  };
  std::vector<BatchResult> results(static_cast<std::size_t>(nb));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    while (true) {
      const int b = next.fetch_add(1);
      if (b >= nb) return;
      try {
        const int first = b * config.batch;
        const int count = std::min(config.batch, n - first);
        std::vector<std::uint64_t> idx;
        std::vector<StreamRng> rngs;
        DenseMatrix psi0(d, count);
        for (int c = 0; c < count; ++c) {
          const auto i = static_cast<std::uint64_t>(first + c);
          idx.push_back(i);
          rngs.emplace_back(config.master_seed, i);
          const double u = rngs.back().uniform() * acc;
          const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
          const Index r = std::min<Index>(it - cumulative.begin(), d - 1);
          psi0.col(c) = rho0.vectors.col(r).normalized();
        }
        BatchResult& br = results[b];
        if (config.accumulate_density) br.sum = DenseMatrix::Zero(d, d);
        br.samples = engine.run_batch(idx, psi0, rngs,
                                      config.accumulate_density ? &br.sum : nullptr, &br.count);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(nb);
        return;
      }
    }
  };
  const int threads = std::min(nb, config.threads > 0 ? config.threads : configured_threads());
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);

  TrajectoryEnsemble ens;
  ens.geometry = geometry;
  ens.t_relax = config.t_relax;
  ens.dt = engine.dt();
  if (config.accumulate_density) ens.density_sum = DenseMatrix::Zero(d, d);
  for (auto& br : results) {
    for (auto& s : br.samples) ens.trajectories.push_back(std::move(s));
    if (config.accumulate_density) ens.density_sum += br.sum;
    ens.snapshot_count += br.count;
    br.sum.resize(0, 0);
  }
  return ens;
}

DensityMatrix estimate_density_matrix(const TrajectoryEnsemble& ensemble) {
  DenseMatrix rho;
  if (ensemble.snapshot_count > 0) {
    rho = ensemble.density_sum / static_cast<double>(ensemble.snapshot_count);
  } else {
    long long count = 0;
    for (const auto& tr : ensemble.trajectories) {
      if (tr.snapshots.cols() == 0) continue;
      if (rho.size() == 0) rho = DenseMatrix::Zero(tr.snapshots.rows(), tr.snapshots.rows());
      rho.noalias() += tr.snapshots * tr.snapshots.adjoint();
      count += tr.snapshots.cols();
    }
    require(count > 0, "estimate_density_matrix: ensemble holds no state snapshots");
  }
  normalize_density(rho);
  return {rho, "trajectory-estimate"};
}

namespace {
RawMoments steady_mean(const TrajectorySamples& tr, double t_relax) {
  RawMoments sum;
  int k = 0;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    if (tr.times[i] < t_relax - 1e-9) continue;
    sum += tr.moments[i];
    ++k;
  }
  require(k > 0, "observable_stats: trajectory has no samples after t_relax");
  sum *= 1.0 / k;
  return sum;
}

// Jackknife error of an estimator given full-sample and leave-one-out values.
double jackknife(const std::vector<double>& loo) {
  const double n = static_cast<double>(loo.size());
  double mean = 0.0;
  for (double x : loo) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : loo) ss += (x - mean) * (x - mean);
  return std::sqrt((n - 1.0) / n * ss);
}
}  // namespace

ObservableRecord observable_stats(const TrajectoryEnsemble& ensemble) {
  const std::size_t n = ensemble.trajectories.size();
  require(n >= 1, "observable_stats: empty ensemble");
  require(!ensemble.trajectories.front().moments.empty(),
          "observable_stats: trajectories carry no observable samples");
  std::vector<RawMoments> per;
  per.reserve(n);
  RawMoments total;
  for (const auto& tr : ensemble.trajectories) {
    per.push_back(steady_mean(tr, ensemble.t_relax));
    total += per.back();
  }
  RawMoments mean = total;
  mean *= 1.0 / static_cast<double>(n);
  ObservableRecord rec = record_from_moments(mean, ensemble.geometry);
  if (n < 2) return rec;

  std::vector<double> ln, lre, lim, lg2, lnn;
  bool g2_ok = rec.g2_onsite.has_value(), nn_ok = rec.g2_nn.has_value();
  for (std::size_t i = 0; i < n; ++i) {
    RawMoments loo = per[i];
    loo *= -1.0;
    loo += total;
    loo *= 1.0 / static_cast<double>(n - 1);
    const ObservableRecord r = record_from_moments(loo, ensemble.geometry);
    ln.push_back(r.n);
    lre.push_back(r.re_b);
    lim.push_back(r.im_b);
    if (r.g2_onsite) lg2.push_back(*r.g2_onsite); else g2_ok = false;
    if (r.g2_nn) lnn.push_back(*r.g2_nn); else nn_ok = false;
  }
  rec.n_err = jackknife(ln);
  rec.re_b_err = jackknife(lre);
  rec.im_b_err = jackknife(lim);
  if (g2_ok) rec.g2_err = jackknife(lg2);
  if (nn_ok) rec.g2_nn_err = jackknife(lnn);
  rec.has_errors = true;
  return rec;
}

std::vector<std::pair<double, ObservableRecord>> ensemble_time_series(
    const TrajectoryEnsemble& ensemble) {
  std::vector<std::pair<double, ObservableRecord>> out;
  if (ensemble.trajectories.empty()) return out;
  const auto& first = ensemble.trajectories.front();
  if (first.moments.empty()) return out;
  for (std::size_t i = 0; i < first.times.size(); ++i) {
    RawMoments sum;
    for (const auto& tr : ensemble.trajectories) sum += tr.moments[i];
    sum *= 1.0 / static_cast<double>(ensemble.trajectories.size());
    out.emplace_back(first.times[i], record_from_moments(sum, ensemble.geometry));
  }
  return out;
}

}  // namespace cornerspace
