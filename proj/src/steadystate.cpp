#include "cornerspace/steadystate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cornerspace {

DenseMatrix lindblad_rhs(const DenseMatrix& rho, const Operator& h,
                         const std::vector<Operator>& jumps) {
  const Index d = rho.rows();
  require(rho.cols() == d && h.dim() == d, "lindblad_rhs: dimension mismatch");
  const DenseMatrix hd = h.to_dense();
  DenseMatrix out = kI * (rho * hd - hd * rho);
  for (const auto& c : jumps) {
    require(c.dim() == d, "lindblad_rhs: jump operator dimension mismatch");
    const DenseMatrix cd = c.to_dense();
    const DenseMatrix cdc = cd.adjoint() * cd;
    out += cd * rho * cd.adjoint() - 0.5 * (cdc * rho + rho * cdc);
  }
  return out;
}

SpectrumBounds hermitian_bounds(const Operator& h) {
  const Index d = h.dim();
  SpectrumBounds b;
  if (d == 0) return b;
  if (d <= 300) {
    const EigenDecomposition e = hermitian_eig(h.to_dense(), 1e-8);
    b.hi = e.values[0];
    b.lo = e.values[d - 1];
    return b;
  }
  const ApplyMatrix a(h);
  auto [lo, hi] = lanczos_extremes([&](const Vector& v) { return a.apply(v); }, d, 60);
  const double margin = 0.02 * (hi - lo) + 1e-9;
  b.lo = lo - margin;
  b.hi = hi + margin;
  return b;
}

LindbladGenerator::LindbladGenerator(const Operator& h, const std::vector<Operator>& jumps)
    : dim_(h.dim()) {
  Operator decay;
  bool first = true;
  for (const auto& c : jumps) {
    require(c.dim() == dim_, "LindbladGenerator: jump operator dimension mismatch");
    Operator cc = c.adjoint() * c;
    decay = first ? cc : decay + cc;
    first = false;
    jumps_.emplace_back(c);
  }
  Operator h_eff = first ? h : h + decay.scaled(cplx(0.0, -0.5));
  h_eff_ = ApplyMatrix(h_eff);
  h_spread_ = hermitian_bounds(h).spread();
  const double decay_norm = first ? 0.0 : hermitian_bounds(decay).hi;
  omega_max_ = h_spread_ + std::max(decay_norm, 0.0);
}

DenseMatrix LindbladGenerator::operator()(double, const DenseMatrix& rho) const {
  DenseMatrix x;
  h_eff_.apply_into(rho, x);
  DenseMatrix out = x.adjoint();
  out -= x;
  out *= kI;  // -i x + i x^dagger
  if (!jumps_.empty()) {
    DenseMatrix acc = DenseMatrix::Zero(dim_, dim_);
    DenseMatrix y, yt, z;
    for (const auto& c : jumps_) {
      c.apply_into(rho, y);
      yt = y.adjoint();
      c.apply_into(yt, z);
      acc += z;
    }
    out += 0.5 * acc;
    out += 0.5 * acc.adjoint();
  }
  return out;
}

bool MonitoredValues::finite() const {
  return std::isfinite(n) && std::isfinite(re_b) && std::isfinite(im_b) && std::isfinite(g2) &&
         std::isfinite(g2_nn);
}

MonitoredValues monitored_values(const ObservableRecord& r, double t) {
  MonitoredValues v;
  v.t = t;
  v.n = r.n;
  v.re_b = r.re_b;
  v.im_b = r.im_b;
  v.g2 = r.g2_onsite.value_or(0.0);
  v.g2_nn = r.g2_nn.value_or(0.0);
  return v;
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_time: return "max_time";
    case Termination::diverged: return "diverged";
  }
  return "unknown";
}

namespace {
bool window_converged(const MonitoredValues& a, const MonitoredValues& b, double rel_tol,
                      double floor) {
  auto close = [&](double x, double y) {
    const double scale = std::max({std::abs(x), std::abs(y), floor});
    return std::abs(x - y) <= rel_tol * scale;
  };
  return close(a.n, b.n) && close(a.re_b, b.re_b) && close(a.im_b, b.im_b) &&
         close(a.g2, b.g2) && close(a.g2_nn, b.g2_nn);
}
}  // namespace

SteadyStateReport evolve_to_steady_state(const Cluster& cluster, const ModelParams& params,
                                         const DensityMatrix& rho0,
                                         const SteadyStateControls& controls) {
  require(rho0.dim() == cluster.dim, "evolve_to_steady_state: rho0 has wrong dimension");
  require(controls.check_window > 0.0 && controls.max_time > 0.0 && controls.rel_tol > 0.0,
          "evolve_to_steady_state: controls must be positive");
  const Operator h = assemble_hamiltonian(cluster.ops, cluster.geometry, params, cluster.mode);
  const LindbladGenerator gen(h, jump_operators(cluster.ops, params));
  const ObservableSet obs(cluster);

  SteadyStateReport rep;
  rep.dt = controls.dt > 0.0
               ? controls.dt
               : controls.dt_factor * 2.0 * std::numbers::pi / std::max(gen.omega_max(), 1e-12);
  const int steps_per_window =
      std::max(1, static_cast<int>(std::ceil(controls.check_window / rep.dt - 1e-9)));
  const double step = controls.check_window / steps_per_window;
  rep.dt = step;

  DenseMatrix rho = rho0.matrix;
  normalize_density(rho);
  auto values_at = [&](double t) {
    return monitored_values(record_from_moments(obs.moments(rho), cluster.geometry), t);
  };
  double t = 0.0;
  MonitoredValues prev = values_at(t);
  rep.history.push_back(prev);
  double next_record = controls.record_stride;
  rep.reason = Termination::max_time;
  while (t < controls.max_time - 1e-9) {
    for (int k = 0; k < steps_per_window; ++k) {
      rho = rk4_step(gen, rho, t, step);
      t += step;
      if (controls.record_stride > 0.0 && t >= next_record - 1e-9 && k + 1 < steps_per_window) {
        rep.history.push_back(values_at(t));
        next_record += controls.record_stride;
      }
    }
    normalize_density(rho);
    ++rep.windows;
    const MonitoredValues cur = values_at(t);
    rep.history.push_back(cur);
    while (controls.record_stride > 0.0 && next_record <= t + 1e-9) next_record += controls.record_stride;
    if (!cur.finite() || !rho.allFinite()) {
      rep.reason = Termination::diverged;
      break;
    }
    if (window_converged(prev, cur, controls.rel_tol, controls.abs_floor)) {
      rep.reason = Termination::converged;
      break;
    }
    prev = cur;
  }
  rep.elapsed = t;
  rep.rho = {rho, cluster.basis_tag()};
  return rep;
}

DensityMatrix steady_state_nullspace(const Operator& h, const std::vector<Operator>& jumps,
                                     Index dim_cap) {
  const Index d = h.dim();
  require(d >= 1, "steady_state_nullspace: empty Hamiltonian");
  if (d > dim_cap) {
    fail(ErrorCode::resource, "steady_state_nullspace: dimension " + std::to_string(d) +
                                  " exceeds oracle cap " + std::to_string(dim_cap));
  }
  const Index d2 = d * d;
  const DenseMatrix hd = h.to_dense();
  const DenseMatrix id = DenseMatrix::Identity(d, d);
  // column-major vec: vec(A X B) = (B^T kron A) vec(X)
  DenseMatrix l = -kI * (kron(id, hd) - kron(hd.transpose(), id));
  for (const auto& c : jumps) {
    require(c.dim() == d, "steady_state_nullspace: jump operator dimension mismatch");
    const DenseMatrix cd = c.to_dense();
    const DenseMatrix cdc = cd.adjoint() * cd;
    l += kron(cd.conjugate(), cd);
    l -= 0.5 * kron(id, cdc);
    l -= 0.5 * kron(cdc.transpose(), id);
  }
  // Replace the (0,0) row by the trace functional.
  l.row(0).setZero();
  for (Index i = 0; i < d; ++i) l(0, i + i * d) = 1.0;
  Vector rhs = Vector::Zero(d2);
  rhs[0] = 1.0;
  Eigen::PartialPivLU<DenseMatrix> lu(l);
  const auto pivots = lu.matrixLU().diagonal().cwiseAbs();
  const double pivot_ratio = pivots.minCoeff() / pivots.maxCoeff();
  const double rcond = lu.rcond();
  if (!(pivot_ratio > 1e-13) || !(rcond > 1e-13)) {
    fail(ErrorCode::numerical,
         "steady_state_nullspace: Liouvillian null space is not one-dimensional (pivot ratio " +
             std::to_string(pivot_ratio) + ")");
  }
  const Vector v = lu.solve(rhs);
  if (!((l * v - rhs).norm() <= 1e-8 * std::max(1.0, v.norm()) * l.norm())) {
    fail(ErrorCode::numerical, "steady_state_nullspace: null vector solve is inaccurate");
  }
  DenseMatrix rho(d, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < d; ++i) rho(i, j) = v[i + j * d];
  normalize_density(rho);
  return {rho, "nullspace"};
}

}  // namespace cornerspace
