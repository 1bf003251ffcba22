#include "cornerspace/numerics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace cornerspace {

double hermiticity_defect(const DenseMatrix& a) {
  if (a.size() == 0) return 0.0;
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

EigenDecomposition hermitian_eig(const DenseMatrix& a, double hermiticity_tol) {
  require(a.rows() == a.cols(), "hermitian_eig: matrix is not square (" +
                                    std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + ")");
  const Index n = a.rows();
  EigenDecomposition out;
  if (n == 0) return out;
  const double scale = a.cwiseAbs().maxCoeff();
  const double defect = hermiticity_defect(a);
  if (defect > hermiticity_tol * std::max(scale, 1e-300)) {
    fail(ErrorCode::numerical, "hermitian_eig: Hermiticity defect " +
                                   std::to_string(defect) + " exceeds tolerance");
  }
  // Eigen's solver reads the lower triangle only; symmetrize so both halves
  // contribute.
  const DenseMatrix sym = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    fail(ErrorCode::numerical, "hermitian_eig: QR iteration did not converge");
  }
  // Eigen returns ascending values.
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Index k = 0; k < n; ++k) {
    out.values[k] = solver.eigenvalues()[n - 1 - k];
    out.vectors.col(k) = solver.eigenvectors().col(n - 1 - k);
  }
  for (Index k = 0; k < n; ++k) {
    auto col = out.vectors.col(k);
    for (Index i = 0; i < n; ++i) {
      const double mag = std::abs(col[i]);
      if (mag > 1e-12) {
        col *= std::conj(col[i]) / mag;
        col[i] = cplx(std::real(col[i]), 0.0);
        break;
      }
    }
  }
  return out;
}

namespace {
void check_kron_shape(Index ra, Index ca, Index rb, Index cb, Index cap) {
  const bool overflow = (rb != 0 && ra > cap / rb) || (cb != 0 && ca > cap / cb);
  if (overflow) {
    fail(ErrorCode::resource, "kron: result dimension exceeds cap " +
                                  std::to_string(cap));
  }
}
}  // namespace

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b, Index cap) {
  check_kron_shape(a.rows(), a.cols(), b.rows(), b.cols(), cap);
  require(a.allFinite() && b.allFinite(), "kron: non-finite operand");
  DenseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b, Index cap) {
  check_kron_shape(a.rows(), a.cols(), b.rows(), b.cols(), cap);
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
  for (Index i = 0; i < a.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator ia(a, i); ia; ++ia) {
      require(all_finite(ia.value()), "kron: non-finite operand");
      for (Index k = 0; k < b.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator ib(b, k); ib; ++ib) {
          trips.emplace_back(ia.row() * b.rows() + ib.row(),
                             ia.col() * b.cols() + ib.col(),
                             ia.value() * ib.value());
        }
      }
    }
  }
  return make_sparse(a.rows() * b.rows(), a.cols() * b.cols(), trips);
}

SparseMatrix make_sparse(Index rows, Index cols,
                         const std::vector<Triplet>& triplets, double rel_drop) {
  SparseMatrix m(rows, cols);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return prune(m, rel_drop);
}

SparseMatrix prune(const SparseMatrix& m, double rel_drop) {
  SparseMatrix out = m;
  double max_abs = 0.0;
  for (Index k = 0; k < out.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(out, k); it; ++it) {
      max_abs = std::max(max_abs, std::abs(it.value()));
    }
  }
  const double cut = rel_drop * max_abs;
  out.prune([cut](Index, Index, const cplx& v) { return std::abs(v) > cut; });
  out.makeCompressed();
  return out;
}

SparseMatrix sparse_identity(Index n) {
  SparseMatrix id(n, n);
  id.setIdentity();
  id.makeCompressed();
  return id;
}

}  // namespace cornerspace
