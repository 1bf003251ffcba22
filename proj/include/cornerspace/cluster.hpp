#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cornerspace/lattice.hpp"
#include "cornerspace/operator.hpp"

namespace cornerspace {

/// Hermitian, unit-trace, positive semidefinite state in a tagged basis.
struct DensityMatrix {
  DenseMatrix matrix;
  std::string basis;

  Index dim() const { return matrix.rows(); }
};

/// Re-Hermitizes and rescales to unit trace.
void normalize_density(DenseMatrix& rho);

/// Throws unless `rho` is Hermitian to `herm_tol` and has unit trace to
/// `trace_tol`.
void check_density(const DenseMatrix& rho, double herm_tol = 1e-10, double trace_tol = 1e-10);

struct SiteOperators {
  Operator b, n, n2;
};

struct PairOperators {
  Operator hop;      // b_j^dagger b_l
  Operator density;  // n_j n_l
};

/// Operators of one cluster in its current basis.
struct OperatorSet {
  Index dim = 0;
  std::vector<SiteOperators> sites;
  std::map<SitePair, PairOperators> pairs;

  const PairOperators* find_pair(int j, int l) const {
    auto it = pairs.find({std::min(j, l), std::max(j, l)});
    return it == pairs.end() ? nullptr : &it->second;
  }
};

enum class OperatorMode { exact, fast };

struct Provenance {
  bool leaf = true;
  int m = 0;
  Index child_a_dim = 0, child_b_dim = 0;
  std::string child_a, child_b;
  /// Joint probability captured by the corner (1 for leaves).
  double captured_probability = 1.0;
};

/// A lattice fragment with its basis, operators and (once solved) steady
/// state and cached eigendecomposition.
struct Cluster {
  Geometry geometry;
  int n_max = 1;
  Index dim = 0;
  OperatorMode mode = OperatorMode::exact;
  OperatorSet ops;
  std::optional<DensityMatrix> rho;
  std::optional<EigenDecomposition> eig;
  Provenance provenance;
  /// Present for merged clusters.
  std::shared_ptr<const CornerIndex> corner;

  bool solved() const { return rho.has_value() && eig.has_value(); }
  std::string basis_tag() const;
};

}  // namespace cornerspace
