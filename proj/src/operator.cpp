#include "cornerspace/operator.hpp"

#include <algorithm>
#include <unordered_map>

namespace cornerspace {

std::shared_ptr<const CornerIndex> CornerIndex::from_pairs(
    const std::vector<std::pair<int, int>>& rank_pairs) {
  auto idx = std::make_shared<CornerIndex>();
  for (const auto& [ra, rb] : rank_pairs) {
    idx->used_a.push_back(ra);
    idx->used_b.push_back(rb);
  }
  auto uniq = [](std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(idx->used_a);
  uniq(idx->used_b);
  std::unordered_map<int, int> pos_a, pos_b;
  for (std::size_t i = 0; i < idx->used_a.size(); ++i) pos_a[idx->used_a[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < idx->used_b.size(); ++i) pos_b[idx->used_b[i]] = static_cast<int>(i);
  idx->by_a.resize(idx->used_a.size());
  idx->by_b.resize(idx->used_b.size());
  for (std::size_t s = 0; s < rank_pairs.size(); ++s) {
    const int a = pos_a.at(rank_pairs[s].first);
    const int b = pos_b.at(rank_pairs[s].second);
    idx->a.push_back(a);
    idx->b.push_back(b);
    idx->by_a[a].push_back(static_cast<int>(s));
    idx->by_b[b].push_back(static_cast<int>(s));
  }
  return idx;
}

Operator::Operator(SparseMatrix m) : kind_(Kind::sparse), sparse_(std::move(m)) {
  require(sparse_.rows() == sparse_.cols(), "Operator: matrix must be square");
  sparse_.makeCompressed();
}

Operator::Operator(DenseMatrix m) : kind_(Kind::dense), dense_(std::move(m)) {
  require(dense_.rows() == dense_.cols(), "Operator: matrix must be square");
}

Operator Operator::factorized(DenseMatrix left, DenseMatrix right,
                              std::shared_ptr<const CornerIndex> index,
                              bool left_identity, bool right_identity) {
  require(index != nullptr, "Operator::factorized: missing corner index");
  const auto na = static_cast<Index>(index->used_a.size());
  const auto nb = static_cast<Index>(index->used_b.size());
  require(left_identity || (left.rows() == na && left.cols() == na),
          "Operator::factorized: left factor has wrong shape");
  require(right_identity || (right.rows() == nb && right.cols() == nb),
          "Operator::factorized: right factor has wrong shape");
  Operator op;
  op.kind_ = Kind::factorized;
  op.left_ = left_identity ? DenseMatrix() : std::move(left);
  op.right_ = right_identity ? DenseMatrix() : std::move(right);
  op.left_identity_ = left_identity;
  op.right_identity_ = right_identity;
  op.index_ = std::move(index);
  return op;
}

Index Operator::dim() const {
  switch (kind_) {
    case Kind::sparse: return sparse_.rows();
    case Kind::dense: return dense_.rows();
    case Kind::factorized: return index_->size();
  }
  return 0;
}

template <class Fn>
void Operator::for_each_entry(Fn&& fn) const {
  const CornerIndex& ix = *index_;
  if (right_identity_) {
    for (const auto& group : ix.by_b) {
      for (int s : group) {
        for (int t : group) fn(s, t, left_at(ix.a[s], ix.a[t]));
      }
    }
  } else if (left_identity_) {
    for (const auto& group : ix.by_a) {
      for (int s : group) {
        for (int t : group) fn(s, t, right_(ix.b[s], ix.b[t]));
      }
    }
  } else {
    const Index m = ix.size();
    for (Index t = 0; t < m; ++t) {
      const int at = ix.a[t], bt = ix.b[t];
      for (Index s = 0; s < m; ++s) {
        fn(static_cast<int>(s), static_cast<int>(t), left_(ix.a[s], at) * right_(ix.b[s], bt));
      }
    }
  }
}

DenseMatrix Operator::to_dense() const {
  switch (kind_) {
    case Kind::sparse: return DenseMatrix(sparse_);
    case Kind::dense: return dense_;
    case Kind::factorized: {
      DenseMatrix out = DenseMatrix::Zero(dim(), dim());
      for_each_entry([&](int s, int t, cplx v) { out(s, t) = v; });
      return out;
    }
  }
  return {};
}

SparseMatrix Operator::to_sparse() const {
  switch (kind_) {
    case Kind::sparse: return sparse_;
    case Kind::dense: return prune(dense_.sparseView(0.0, 0.0));
    case Kind::factorized: {
      std::vector<Triplet> trips;
      trips.reserve(static_cast<std::size_t>(nonzeros()));
      for_each_entry([&](int s, int t, cplx v) {
        if (v != cplx(0.0)) trips.emplace_back(s, t, v);
      });
      return make_sparse(dim(), dim(), trips);
    }
  }
  return {};
}

cplx Operator::expectation(const DenseMatrix& rho) const {
  require(rho.rows() == dim() && rho.cols() == dim(),
          "Operator::expectation: dimension mismatch");
  cplx acc = 0.0;
  switch (kind_) {
    case Kind::sparse:
      for (Index r = 0; r < sparse_.outerSize(); ++r) {
        for (SparseMatrix::InnerIterator it(sparse_, r); it; ++it) {
          acc += rho(it.col(), it.row()) * it.value();
        }
      }
      return acc;
    case Kind::dense:
      // trace(rho O) = sum_{s,t} rho(t,s) O(s,t)
      return (rho.transpose().cwiseProduct(dense_)).sum();
    case Kind::factorized:
      for_each_entry([&](int s, int t, cplx v) { acc += rho(t, s) * v; });
      return acc;
  }
  return acc;
}

cplx Operator::expectation(const Vector& psi) const {
  require(psi.size() == dim(), "Operator::expectation: dimension mismatch");
  switch (kind_) {
    case Kind::sparse: return psi.dot(sparse_ * psi);
    case Kind::dense: return psi.dot(dense_ * psi);
    case Kind::factorized: {
      cplx acc = 0.0;
      for_each_entry([&](int s, int t, cplx v) { acc += std::conj(psi[s]) * v * psi[t]; });
      return acc;
    }
  }
  return 0.0;
}

Operator Operator::adjoint() const {
  switch (kind_) {
    case Kind::sparse: return Operator(SparseMatrix(sparse_.adjoint()));
    case Kind::dense: return Operator(DenseMatrix(dense_.adjoint()));
    case Kind::factorized:
      return factorized(left_identity_ ? DenseMatrix() : DenseMatrix(left_.adjoint()),
                        right_identity_ ? DenseMatrix() : DenseMatrix(right_.adjoint()),
                        index_, left_identity_, right_identity_);
  }
  return {};
}

Operator Operator::scaled(cplx c) const {
  switch (kind_) {
    case Kind::sparse: return Operator(SparseMatrix(c * sparse_));
    case Kind::dense: return Operator(DenseMatrix(c * dense_));
    case Kind::factorized: {
      Operator out = *this;
      if (!out.left_identity_) {
        out.left_ *= c;
      } else if (!out.right_identity_) {
        out.right_ *= c;
      } else {
        out.left_ = c * DenseMatrix::Identity(static_cast<Index>(index_->used_a.size()),
                                              static_cast<Index>(index_->used_a.size()));
        out.left_identity_ = false;
      }
      return out;
    }
  }
  return {};
}

void Operator::add_to(DenseMatrix& target, cplx coeff) const {
  require(target.rows() == dim() && target.cols() == dim(),
          "Operator::add_to: dimension mismatch");
  switch (kind_) {
    case Kind::sparse:
      for (Index r = 0; r < sparse_.outerSize(); ++r) {
        for (SparseMatrix::InnerIterator it(sparse_, r); it; ++it) {
          target(it.row(), it.col()) += coeff * it.value();
        }
      }
      return;
    case Kind::dense: target += coeff * dense_; return;
    case Kind::factorized:
      for_each_entry([&](int s, int t, cplx v) { target(s, t) += coeff * v; });
      return;
  }
}

DenseMatrix Operator::rotated(const DenseMatrix& v) const {
  require(v.rows() == dim(), "Operator::rotated: dimension mismatch");
  switch (kind_) {
    case Kind::sparse: {
      DenseMatrix sv = sparse_ * v;
      return v.adjoint() * sv;
    }
    case Kind::dense: {
      DenseMatrix dv = dense_ * v;
      return v.adjoint() * dv;
    }
    case Kind::factorized: {
      DenseMatrix dv = to_dense() * v;
      return v.adjoint() * dv;
    }
  }
  return {};
}

Index Operator::nonzeros() const {
  switch (kind_) {
    case Kind::sparse: return sparse_.nonZeros();
    case Kind::dense: return dense_.size();
    case Kind::factorized: {
      Index n = 0;
      if (right_identity_) {
        for (const auto& g : index_->by_b) n += static_cast<Index>(g.size() * g.size());
      } else if (left_identity_) {
        for (const auto& g : index_->by_a) n += static_cast<Index>(g.size() * g.size());
      } else {
        n = index_->size() * index_->size();
      }
      return n;
    }
  }
  return 0;
}

Operator operator*(const Operator& x, const Operator& y) {
  require(x.dim() == y.dim(), "Operator product: dimension mismatch");
  const Index n = x.dim();
  const double fill = n == 0 ? 0.0
                             : static_cast<double>(std::max(x.nonzeros(), y.nonzeros())) /
                                   static_cast<double>(n * n);
  if (fill < 0.05) {
    SparseMatrix p = x.to_sparse() * y.to_sparse();
    return Operator(prune(p));
  }
  return Operator(DenseMatrix(x.to_dense() * y.to_dense()));
}

Operator operator+(const Operator& x, const Operator& y) {
  require(x.dim() == y.dim(), "Operator sum: dimension mismatch");
  if (x.kind() == Operator::Kind::sparse && y.kind() == Operator::Kind::sparse) {
    return Operator(prune(SparseMatrix(x.sparse() + y.sparse())));
  }
  DenseMatrix d = x.to_dense();
  y.add_to(d, 1.0);
  return Operator(std::move(d));
}

ApplyMatrix::ApplyMatrix(const Operator& op, double dense_threshold) {
  const Index n = op.dim();
  const double fill = n == 0 ? 0.0
                             : static_cast<double>(op.nonzeros()) / static_cast<double>(n * n);
  if (op.kind() == Operator::Kind::dense || fill >= dense_threshold) {
    dense_ = true;
    d_ = op.to_dense();
  } else {
    dense_ = false;
    s_ = op.to_sparse();
  }
}

DenseMatrix ApplyMatrix::apply(const DenseMatrix& x) const {
  DenseMatrix out;
  apply_into(x, out);
  return out;
}

Vector ApplyMatrix::apply(const Vector& x) const {
  if (dense_) return d_ * x;
  return s_ * x;
}

void ApplyMatrix::apply_into(const DenseMatrix& x, DenseMatrix& out) const {
  if (dense_) {
    out.noalias() = d_ * x;
  } else {
    out.noalias() = s_ * x;
  }
}

}  // namespace cornerspace
