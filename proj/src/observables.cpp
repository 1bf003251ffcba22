#include "cornerspace/observables.hpp"

#include <cmath>

namespace cornerspace {

namespace {
constexpr double kDensityFloor = 1e-14;

template <class T>
void add_vec(std::vector<T>& a, const std::vector<T>& b) {
  if (a.empty()) {
    a = b;
    return;
  }
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}
}  // namespace

RawMoments& RawMoments::operator+=(const RawMoments& o) {
  add_vec(n, o.n);
  add_vec(b, o.b);
  add_vec(n2, o.n2);
  add_vec(nn, o.nn);
  return *this;
}

RawMoments& RawMoments::operator*=(double s) {
  for (auto& x : n) x *= s;
  for (auto& x : b) x *= s;
  for (auto& x : n2) x *= s;
  for (auto& x : nn) x *= s;
  return *this;
}

ObservableRecord record_from_moments(const RawMoments& m, const Geometry& geom) {
  ObservableRecord r;
  const int sites = static_cast<int>(m.n.size());
  require(sites == geom.sites(), "record_from_moments: site count mismatch");
  r.site_n = m.n;
  r.site_b = m.b;
  double n_sum = 0.0;
  cplx b_sum = 0.0;
  for (int s = 0; s < sites; ++s) {
    n_sum += m.n[s];
    b_sum += m.b[s];
  }
  r.n = n_sum / sites;
  r.re_b = b_sum.real() / sites;
  r.im_b = b_sum.imag() / sites;

  bool all_g2 = true;
  double g2_sum = 0.0;
  for (int s = 0; s < sites; ++s) {
    if (m.n[s] > kDensityFloor) {
      const double g = m.n2[s] / (m.n[s] * m.n[s]);
      r.site_g2.emplace_back(g);
      g2_sum += g;
    } else {
      r.site_g2.emplace_back(std::nullopt);
      all_g2 = false;
    }
  }
  if (all_g2 && sites > 0) r.g2_onsite = g2_sum / sites;

  bool all_nn = !geom.bonds.empty();
  double nn_sum = 0.0, weight = 0.0;
  for (std::size_t k = 0; k < geom.bonds.size(); ++k) {
    const Bond& bond = geom.bonds[k];
    const double denom = m.n[bond.j] * m.n[bond.l];
    if (m.n[bond.j] > kDensityFloor && m.n[bond.l] > kDensityFloor) {
      const double g = m.nn[k] / denom;
      r.bond_g2_nn.emplace_back(g);
      nn_sum += bond.multiplicity * g;
      weight += bond.multiplicity;
    } else {
      r.bond_g2_nn.emplace_back(std::nullopt);
      all_nn = false;
    }
  }
  if (all_nn) r.g2_nn = nn_sum / weight;
  return r;
}

ObservableSet::ObservableSet(const Cluster& cluster) : geometry_(cluster.geometry) {
  hardcore_like_ = cluster.n_max == 1;
  for (const auto& s : cluster.ops.sites) {
    n_.push_back(s.n);
    b_.push_back(s.b);
    n2_.push_back(s.n2);
  }
  for (const auto& bond : geometry_.bonds) {
    if (!cluster.ops.find_pair(bond.j, bond.l)) product_pairs_ = true;
    nn_.push_back(pair_operators(cluster.ops, bond.j, bond.l, cluster.mode).density);
  }
  auto to_apply = [](const std::vector<Operator>& ops) {
    std::vector<ApplyMatrix> out;
    for (const auto& o : ops) out.emplace_back(o);
    return out;
  };
  n_apply_ = to_apply(n_);
  b_apply_ = to_apply(b_);
  if (!hardcore_like_) n2_apply_ = to_apply(n2_);
  nn_apply_ = to_apply(nn_);
}

RawMoments ObservableSet::moments(const DenseMatrix& rho) const {
  RawMoments m;
  for (std::size_t s = 0; s < n_.size(); ++s) {
    m.n.push_back(std::real(n_[s].expectation(rho)));
    m.b.push_back(b_[s].expectation(rho));
    m.n2.push_back(hardcore_like_ ? 0.0 : std::real(n2_[s].expectation(rho)));
  }
  for (const auto& d : nn_) m.nn.push_back(std::real(d.expectation(rho)));
  return m;
}

std::vector<RawMoments> ObservableSet::moments_batch(const DenseMatrix& psis) const {
  const Index cols = psis.cols();
  std::vector<RawMoments> out(static_cast<std::size_t>(cols));
  DenseMatrix y;
  auto column_values = [&](const ApplyMatrix& op, auto&& sink) {
    op.apply_into(psis, y);
    for (Index c = 0; c < cols; ++c) sink(out[c], psis.col(c).dot(y.col(c)));
  };
  for (std::size_t s = 0; s < n_.size(); ++s) {
    column_values(n_apply_[s], [](RawMoments& m, cplx v) { m.n.push_back(v.real()); });
    column_values(b_apply_[s], [](RawMoments& m, cplx v) { m.b.push_back(v); });
    if (hardcore_like_) {
      for (auto& m : out) m.n2.push_back(0.0);
    } else {
      column_values(n2_apply_[s], [](RawMoments& m, cplx v) { m.n2.push_back(v.real()); });
    }
  }
  for (const auto& d : nn_apply_) {
    column_values(d, [](RawMoments& m, cplx v) { m.nn.push_back(v.real()); });
  }
  return out;
}

SiteExpectations site_expectations(const Cluster& cluster) {
  require(cluster.rho.has_value(), "site_expectations: cluster is not solved");
  SiteExpectations out;
  const DenseMatrix& rho = cluster.rho->matrix;
  for (const auto& s : cluster.ops.sites) {
    out.n.push_back(std::real(s.n.expectation(rho)));
    out.b.push_back(s.b.expectation(rho));
    out.n_avg += out.n.back();
    out.b_avg += out.b.back();
  }
  if (!out.n.empty()) {
    out.n_avg /= static_cast<double>(out.n.size());
    out.b_avg /= static_cast<double>(out.n.size());
  }
  return out;
}

G2Values g2_functions(const Cluster& cluster) {
  require(cluster.rho.has_value(), "g2_functions: cluster is not solved");
  const ObservableSet set(cluster);
  const ObservableRecord r = record_from_moments(set.moments(cluster.rho->matrix), cluster.geometry);
  return {r.g2_onsite, r.g2_nn, r.bond_g2_nn, set.uses_product_pairs()};
}

ObservableRecord observe(const Cluster& cluster) {
  require(cluster.rho.has_value(), "observe: cluster is not solved");
  const ObservableSet set(cluster);
  return record_from_moments(set.moments(cluster.rho->matrix), cluster.geometry);
}

std::vector<SpectrumRow> probability_spectrum(const Cluster& cluster) {
  require(cluster.eig.has_value(), "probability_spectrum: cluster is not solved");
  const EigenDecomposition& e = *cluster.eig;
  const Index dim = e.vectors.rows();
  DenseMatrix ntot = DenseMatrix::Zero(dim, dim);
  for (const auto& s : cluster.ops.sites) s.n.add_to(ntot, 1.0);
  const DenseMatrix nv = ntot * e.vectors;
  std::vector<SpectrumRow> rows;
  for (Index r = 0; r < dim; ++r) {
    if (!(e.values[r] > 0.0)) continue;  // clipped or exactly empty states
    rows.push_back({static_cast<int>(r + 1), e.values[r],
                    std::real(e.vectors.col(r).dot(nv.col(r)))});
  }
  return rows;
}

}  // namespace cornerspace
