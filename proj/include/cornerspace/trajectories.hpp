#pragma once

#include <cstdint>
#include <vector>

#include "cornerspace/cluster.hpp"
#include "cornerspace/observables.hpp"
#include "cornerspace/rng.hpp"

namespace cornerspace {

// rk4: fixed-step RK4 between jumps. spectral: H_eff is diagonalized once
// and propagated exactly; costs O(dim^3) up front, then each stride is one
// matrix product, so it pays off for large corners and long windows.
enum class Propagator { rk4, spectral };

struct TrajectoryConfig {
  int n_trajectories = 200;
  Propagator propagator = Propagator::rk4;
  double dt = 0.0;  // 0 selects dt_factor * 2 pi / omega
  double dt_factor = 0.03;
  double t_relax = 30.0;
  double t_sample = 100.0;
  double sample_stride = 0.5;
  std::uint64_t master_seed = 1;
  double jump_time_tol = 1e-4;
  int batch = 16;  // trajectories propagated together; fixed, so results do not depend on threads
  int threads = 0;  // 0 reads CORNERSPACE_THREADS
  bool keep_snapshots = false;  // store per-trajectory sample states
  bool accumulate_density = true;

  void validate() const;
};

struct TrajectorySamples {
  std::uint64_t index = 0;
  std::vector<double> times;         // sample times from t = 0
  std::vector<RawMoments> moments;   // normalized-state moments at `times`
  std::vector<double> norms;         // squared norm before normalization at `times`
  std::vector<double> jump_times;
  std::vector<int> jump_channels;
  DenseMatrix snapshots;             // columns: normalized states at t >= t_relax
};

struct TrajectoryEnsemble {
  std::vector<TrajectorySamples> trajectories;
  Geometry geometry;
  double t_relax = 0.0;
  double dt = 0.0;
  /// Sum of |psi><psi| over trajectories and sample times >= t_relax, reduced
  /// in trajectory order.
  DenseMatrix density_sum;
  long long snapshot_count = 0;
};

/// Propagates trajectories of the jump unraveling of the master equation.
/// H_eff = H - (i/2) sum_j C_j^dagger C_j is shifted by the center of the spectrum of H
/// (a global phase) and integrated with RK4 or exactly (spectral); a jump happens when the squared
/// norm falls below a uniform draw r in (0, 1], located by bisection.
class TrajectoryEngine {
 public:
  TrajectoryEngine(const Operator& h, const std::vector<Operator>& jumps,
                   const TrajectoryConfig& config, const ObservableSet* observables);

  double dt() const { return dt_; }
  Index dim() const { return dim_; }

  /// Runs one batch; column c of `psi0` (normalized) starts trajectory
  /// indices[c], which continues drawing from rngs[c]. Steady-window
  /// projectors are added to `density_sum` when it is non-null.
  std::vector<TrajectorySamples> run_batch(const std::vector<std::uint64_t>& indices,
                                           const DenseMatrix& psi0, std::vector<StreamRng>& rngs,
                                           DenseMatrix* density_sum,
                                           long long* snapshot_count) const;

 private:
  Index dim_ = 0;
  TrajectoryConfig config_;
  const ObservableSet* observables_ = nullptr;
  ApplyMatrix h_eff_;
  std::vector<ApplyMatrix> jumps_;
  double dt_ = 0.0;
  int steps_per_stride_ = 1;
  // spectral propagator: H_eff = right_ diag(lambda_) left_
  Vector lambda_;
  DenseMatrix right_, left_, stride_step_;

  Vector advance(const Vector& psi, double tau) const;

  DenseMatrix derivative(const DenseMatrix& psi) const;
  Vector derivative(const Vector& psi) const;
};

/// Single trajectory from psi0 with its own stream (master_seed, seed).
TrajectorySamples run_trajectory(const Operator& h, const std::vector<Operator>& jumps,
                                 const Vector& psi0, const TrajectoryConfig& config,
                                 std::uint64_t seed, const ObservableSet* observables = nullptr);

/// Full ensemble: trajectory i draws its initial state from the eigenbasis
/// of rho0 with probabilities p_r, using stream i.
TrajectoryEnsemble run_ensemble(const Operator& h, const std::vector<Operator>& jumps,
                                const EigenDecomposition& rho0, const TrajectoryConfig& config,
                                const ObservableSet* observables, const Geometry& geometry);

/// rho = average of |psi><psi| over trajectories and steady-window samples,
/// Hermitized and trace-normalized.
DensityMatrix estimate_density_matrix(const TrajectoryEnsemble& ensemble);

/// Means with jackknife standard errors over per-trajectory means of the
/// moments at t >= t_relax. For linear observables this is exactly
/// std(per-trajectory means) / sqrt(N).
ObservableRecord observable_stats(const TrajectoryEnsemble& ensemble);

/// Ensemble-averaged observables at each sample time (from t = 0).
std::vector<std::pair<double, ObservableRecord>> ensemble_time_series(
    const TrajectoryEnsemble& ensemble);

}  // namespace cornerspace
