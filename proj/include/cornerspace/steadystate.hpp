#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cornerspace/cluster.hpp"
#include "cornerspace/model.hpp"
#include "cornerspace/observables.hpp"

namespace cornerspace {

/// d rho / dt = i[rho, H] + sum_j (C_j rho C_j^dagger - {C_j^dagger C_j, rho}/2)
/// evaluated literally, without assuming rho is Hermitian.
DenseMatrix lindblad_rhs(const DenseMatrix& rho, const Operator& h,
                         const std::vector<Operator>& jumps);

/// Prebuilt generator for repeated application to Hermitian states. Uses
/// H_eff = H - (i/2) sum_j C_j^dagger C_j so that the coherent part costs one
/// product: -i (H_eff rho) + i (H_eff rho)^dagger.
class LindbladGenerator {
 public:
  LindbladGenerator(const Operator& h, const std::vector<Operator>& jumps);

  Index dim() const { return dim_; }
  DenseMatrix operator()(double t, const DenseMatrix& rho) const;
  /// Upper estimate of the largest Liouvillian eigenvalue magnitude:
  /// spread of the spectrum of H plus the norm of sum_j C_j^dagger C_j.
  double omega_max() const { return omega_max_; }
  double h_spread() const { return h_spread_; }

 private:
  Index dim_ = 0;
  ApplyMatrix h_eff_;
  std::vector<ApplyMatrix> jumps_;
  double omega_max_ = 0.0, h_spread_ = 0.0;
};

/// Spread max - min of the spectrum of H and the midpoint, from Lanczos with a
/// small safety margin.
struct SpectrumBounds {
  double lo = 0.0, hi = 0.0;
  double spread() const { return hi - lo; }
  double center() const { return 0.5 * (hi + lo); }
};
SpectrumBounds hermitian_bounds(const Operator& h);

struct SteadyStateControls {
  double dt = 0.0;             // 0 selects dt_factor * 2 pi / omega_max
  double dt_factor = 0.3;
  double check_window = 5.0;   // units of 1/gamma
  double rel_tol = 1e-6;
  double max_time = 1000.0;
  double record_stride = 0.5;  // time-series spacing; 0 disables
  double abs_floor = 1e-10;    // scale floor for relative changes
};

struct MonitoredValues {
  double t = 0.0;
  double n = 0.0, re_b = 0.0, im_b = 0.0, g2 = 0.0, g2_nn = 0.0;

  bool finite() const;
};

MonitoredValues monitored_values(const ObservableRecord& r, double t);

enum class Termination { converged, max_time, diverged };
std::string to_string(Termination t);

struct SteadyStateReport {
  DensityMatrix rho;
  double elapsed = 0.0;
  double dt = 0.0;
  std::vector<MonitoredValues> history;  // increasing t
  Termination reason = Termination::max_time;
  int windows = 0;
};

/// Integrates the master equation with RK4 from rho0 until every monitored
/// site-averaged observable (n, Re<b>, Im<b>, g2, g2_nn) moves by less than
/// rel_tol relative over one check window. The state is re-Hermitized and
/// trace-normalized at each window boundary.
SteadyStateReport evolve_to_steady_state(const Cluster& cluster, const ModelParams& params,
                                         const DensityMatrix& rho0,
                                         const SteadyStateControls& controls = {});

/// Exact steady state from the null vector of the Liouvillian superoperator
/// (vectorized rho, d^2 x d^2 dense). Throws when the null space is not
/// one-dimensional.
DensityMatrix steady_state_nullspace(const Operator& h, const std::vector<Operator>& jumps,
                                     Index dim_cap = 64);

}  // namespace cornerspace
