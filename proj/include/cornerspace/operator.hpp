#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "cornerspace/numerics.hpp"

namespace cornerspace {

/// Index map of a corner basis built from two child clusters A and B.
///
/// Corner state s is the product |phi^A_{ra}>|phi^B_{rb}> with
/// ra = used_a[a[s]] and rb = used_b[b[s]]; `a` and `b` hold positions in the
/// ascending lists of child eigenstates that the corner actually references.
struct CornerIndex {
  std::vector<int> a, b;
  std::vector<int> used_a, used_b;
  std::vector<std::vector<int>> by_a, by_b;  // corner states per local a / b

  Index size() const { return static_cast<Index>(a.size()); }

  /// `rank_pairs` are (rank in A, rank in B) in corner order.
  static std::shared_ptr<const CornerIndex> from_pairs(
      const std::vector<std::pair<int, int>>& rank_pairs);
};

/// A square operator in some cluster basis, stored in whichever of three
/// layouts is cheapest: sparse (Fock bases), dense (rotated eigenbases), or
/// factorized over a corner basis, where entry (s, t) equals
/// left(a_s, a_t) * right(b_s, b_t). An identity factor is never stored.
class Operator {
 public:
  enum class Kind { sparse, dense, factorized };

  Operator() = default;
  explicit Operator(SparseMatrix m);
  explicit Operator(DenseMatrix m);
  static Operator factorized(DenseMatrix left, DenseMatrix right,
                             std::shared_ptr<const CornerIndex> index,
                             bool left_identity, bool right_identity);

  Kind kind() const { return kind_; }
  Index dim() const;
  bool empty() const { return dim() == 0; }

  const SparseMatrix& sparse() const { return sparse_; }
  const DenseMatrix& dense() const { return dense_; }
  // factorized layout only
  const DenseMatrix& left_factor() const { return left_; }
  const DenseMatrix& right_factor() const { return right_; }
  bool left_identity() const { return left_identity_; }
  bool right_identity() const { return right_identity_; }
  const std::shared_ptr<const CornerIndex>& corner_index() const { return index_; }

  DenseMatrix to_dense() const;
  SparseMatrix to_sparse() const;

  /// trace(rho * O)
  cplx expectation(const DenseMatrix& rho) const;
  /// <psi|O|psi> for an arbitrary (not necessarily normalized) psi.
  cplx expectation(const Vector& psi) const;

  Operator adjoint() const;
  Operator scaled(cplx c) const;
  /// target += coeff * O
  void add_to(DenseMatrix& target, cplx coeff) const;
  /// v^dagger O v, dense.
  DenseMatrix rotated(const DenseMatrix& v) const;
  /// Stored or implied nonzero count.
  Index nonzeros() const;

  friend Operator operator*(const Operator& x, const Operator& y);
  friend Operator operator+(const Operator& x, const Operator& y);

 private:
  Kind kind_ = Kind::sparse;
  SparseMatrix sparse_;
  DenseMatrix dense_;
  DenseMatrix left_, right_;
  bool left_identity_ = false, right_identity_ = false;
  std::shared_ptr<const CornerIndex> index_;

  cplx left_at(int i, int j) const {
    return left_identity_ ? cplx(i == j ? 1.0 : 0.0) : left_(i, j);
  }
  cplx right_at(int i, int j) const {
    return right_identity_ ? cplx(i == j ? 1.0 : 0.0) : right_(i, j);
  }
  template <class Fn>
  void for_each_entry(Fn&& fn) const;
};

/// Representation chosen for repeated products inside solvers: sparse when
/// the fill fraction is below `dense_threshold`, dense otherwise.
class ApplyMatrix {
 public:
  ApplyMatrix() = default;
  explicit ApplyMatrix(const Operator& op, double dense_threshold = 0.15);
  explicit ApplyMatrix(DenseMatrix m) : dense_(true), d_(std::move(m)) {}
  explicit ApplyMatrix(SparseMatrix m) : dense_(false), s_(std::move(m)) {}

  bool is_dense() const { return dense_; }
  Index dim() const { return dense_ ? d_.rows() : s_.rows(); }
  DenseMatrix apply(const DenseMatrix& x) const;
  Vector apply(const Vector& x) const;
  /// out = O * x without temporaries when possible.
  void apply_into(const DenseMatrix& x, DenseMatrix& out) const;
  const DenseMatrix& dense() const { return d_; }
  const SparseMatrix& sparse() const { return s_; }

 private:
  bool dense_ = false;
  DenseMatrix d_;
  SparseMatrix s_;
};

}  // namespace cornerspace
