#pragma once

// Template definitions for numerics.hpp.

#include <algorithm>

namespace cornerspace {

namespace detail {
inline double hash_unit(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return static_cast<double>(x >> 11) * 0x1.0p-53 - 0.5;
}
}  // namespace detail

template <class Apply>
std::pair<double, double> lanczos_extremes(Apply&& apply, Index dim,
                                           int iterations, std::uint64_t seed) {
  require(dim > 0, "lanczos_extremes: empty operator");
  const int k_max = static_cast<int>(std::min<Index>(iterations, dim));
  DenseMatrix basis(dim, k_max);
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) {
    v[i] = cplx(detail::hash_unit(seed * 1315423911ULL + 2 * i),
                detail::hash_unit(seed * 1315423911ULL + 2 * i + 1));
  }
  v.normalize();
  std::vector<double> alpha, beta;
  int k = 0;
  for (; k < k_max; ++k) {
    basis.col(k) = v;
    Vector w = apply(v);
    const double a = std::real(v.dot(w));
    alpha.push_back(a);
    // full reorthogonalization, twice
    for (int pass = 0; pass < 2; ++pass) {
      Vector c = basis.leftCols(k + 1).adjoint() * w;
      w.noalias() -= basis.leftCols(k + 1) * c;
    }
    const double b = w.norm();
    if (k + 1 == k_max || b < 1e-12) {
      ++k;
      break;
    }
    beta.push_back(b);
    v = w / b;
  }
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    t(i, i) = alpha[i];
    if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

}  // namespace cornerspace
