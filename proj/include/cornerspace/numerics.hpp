#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "cornerspace/error.hpp"

namespace cornerspace {

using cplx = std::complex<double>;
using Index = Eigen::Index;
using DenseMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<cplx, Eigen::Dynamic, 1>;
using RealVector = Eigen::VectorXd;
// Compressed-row storage; Eigen keeps column indices sorted within each row
// once the matrix is compressed.
using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<cplx>;

inline constexpr cplx kI{0.0, 1.0};

/// Default cap on the row or column count produced by `kron`.
inline constexpr Index kDefaultKronCap = Index{1} << 24;

/// Eigenpairs of a Hermitian matrix. `values` are descending; column k of
/// `vectors` is the eigenvector of `values[k]` with its first component of
/// magnitude above 1e-12 made real and positive.
struct EigenDecomposition {
  RealVector values;
  DenseMatrix vectors;
};

/// Dense Hermitian eigensolver (Householder tridiagonalization followed by
/// implicit symmetric QR). Throws on non-square input, on a Hermiticity
/// defect above `hermiticity_tol * max|A|`, and when the QR sweep does not
/// converge.
EigenDecomposition hermitian_eig(const DenseMatrix& a,
                                 double hermiticity_tol = 1e-10);

/// Largest |A - A^dagger| entry.
double hermiticity_defect(const DenseMatrix& a);

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b,
                 Index cap = kDefaultKronCap);
SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b,
                  Index cap = kDefaultKronCap);

/// Builds a compressed sparse matrix from triplets (duplicates summed) and
/// drops entries with |z| <= rel_drop * max|z|.
SparseMatrix make_sparse(Index rows, Index cols,
                         const std::vector<Triplet>& triplets,
                         double rel_drop = 1e-15);
SparseMatrix sparse_identity(Index n);
SparseMatrix prune(const SparseMatrix& m, double rel_drop = 1e-15);

inline bool all_finite(double x) { return std::isfinite(x); }
inline bool all_finite(const cplx& z) {
  return std::isfinite(z.real()) && std::isfinite(z.imag());
}
template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// One classical fourth-order Runge-Kutta step of y' = f(t, y).
template <class State, class Deriv>
State rk4_step(Deriv&& f, const State& y, double t, double dt) {
  require(dt > 0.0, "rk4_step: dt must be positive");
  const double half = 0.5 * dt;
  State k1 = f(t, y);
  if (!all_finite(k1)) fail(ErrorCode::numerical, "rk4_step: non-finite derivative");
  State k2 = f(t + half, State(y + half * k1));
  if (!all_finite(k2)) fail(ErrorCode::numerical, "rk4_step: non-finite derivative");
  State k3 = f(t + half, State(y + half * k2));
  if (!all_finite(k3)) fail(ErrorCode::numerical, "rk4_step: non-finite derivative");
  State k4 = f(t + dt, State(y + dt * k3));
  if (!all_finite(k4)) fail(ErrorCode::numerical, "rk4_step: non-finite derivative");
  return State(y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

/// Extreme eigenvalues of a Hermitian operator given only its action, from a
/// Lanczos run with full reorthogonalization. Ritz values lie inside the
/// spectrum, so callers add a margin when using them as bounds.
template <class Apply>
std::pair<double, double> lanczos_extremes(Apply&& apply, Index dim,
                                           int iterations = 40,
                                           std::uint64_t seed = 7);

}  // namespace cornerspace

#include "cornerspace/numerics_impl.hpp"
