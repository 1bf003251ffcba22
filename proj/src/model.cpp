#include "cornerspace/model.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace cornerspace {

void ModelParams::validate() const {
  require(gamma > 0.0, "model: gamma must be positive", ErrorCode::config);
  require(n_max >= 1, "model: n_max must be >= 1", ErrorCode::config);
  require(z >= 1, "model: z must be >= 1", ErrorCode::config);
  require(std::isfinite(delta_omega) && std::isfinite(j) && std::isfinite(f),
          "model: parameters must be finite", ErrorCode::config);
  if (hardcore) {
    require(n_max == 1, "model: hard-core bosons require n_max = 1", ErrorCode::config);
  } else {
    require(std::isfinite(u), "model: U must be finite unless hardcore is set",
            ErrorCode::config);
  }
}

std::string Cluster::basis_tag() const {
  if (provenance.leaf) return "fock:" + geometry.label();
  return "corner:" + geometry.label() + "/M" + std::to_string(dim);
}

void normalize_density(DenseMatrix& rho) {
  DenseMatrix sym = 0.5 * (rho + rho.adjoint());
  const double tr = std::real(sym.trace());
  require(std::isfinite(tr) && tr > 0.0, "density matrix has non-positive trace",
          ErrorCode::numerical);
  rho = sym / tr;
}

void check_density(const DenseMatrix& rho, double herm_tol, double trace_tol) {
  require(rho.rows() == rho.cols(), "density matrix is not square", ErrorCode::numerical);
  require(rho.allFinite(), "density matrix has non-finite entries", ErrorCode::numerical);
  require(hermiticity_defect(rho) <= herm_tol, "density matrix is not Hermitian",
          ErrorCode::numerical);
  require(std::abs(rho.trace() - cplx(1.0)) <= trace_tol, "density matrix trace is not 1",
          ErrorCode::numerical);
}

FockSiteOperators fock_site_operators(int n_max) {
  require(n_max >= 1, "fock_site_operators: n_max must be >= 1");
  const Index d = n_max + 1;
  std::vector<Triplet> tb, tn, tn2;
  for (int k = 1; k <= n_max; ++k) {
    tb.emplace_back(k - 1, k, std::sqrt(static_cast<double>(k)));
    tn.emplace_back(k, k, static_cast<double>(k));
    if (k >= 2) tn2.emplace_back(k, k, static_cast<double>(k * (k - 1)));
  }
  return {make_sparse(d, d, tb), make_sparse(d, d, tn), make_sparse(d, d, tn2)};
}

namespace {
SparseMatrix place(const SparseMatrix& op, int site, int sites, Index local) {
  const SparseMatrix id = sparse_identity(local);
  SparseMatrix out = site == 0 ? op : id;
  for (int s = 1; s < sites; ++s) out = kron(out, s == site ? op : id);
  return out;
}
}  // namespace

Cluster build_base_cluster(const Geometry& geom, const ModelParams& params,
                           const std::vector<SitePair>& tracked_pairs, long long dim_cap) {
  params.validate();
  const long long dim = fock_dimension(geom.sites(), params.n_max, dim_cap);
  if (dim < 0) {
    fail(ErrorCode::resource, "build_base_cluster: Fock dimension of " + geom.label() +
                                  " exceeds cap " + std::to_string(dim_cap));
  }
  const FockSiteOperators local = fock_site_operators(params.n_max);
  const Index d = params.n_max + 1;
  Cluster c;
  c.geometry = geom;
  c.n_max = params.n_max;
  c.dim = dim;
  c.mode = OperatorMode::exact;
  c.ops.dim = dim;
  for (int s = 0; s < geom.sites(); ++s) {
    c.ops.sites.push_back({Operator(place(local.b, s, geom.sites(), d)),
                           Operator(place(local.n, s, geom.sites(), d)),
                           Operator(place(local.n2, s, geom.sites(), d))});
  }
  for (const auto& [j, l] : tracked_pairs) {
    require(j >= 0 && l < geom.sites() && j < l, "build_base_cluster: bad tracked pair");
    const SparseMatrix& bj = c.ops.sites[j].b.sparse();
    const SparseMatrix& bl = c.ops.sites[l].b.sparse();
    SparseMatrix hop = SparseMatrix(bj.adjoint()) * bl;
    SparseMatrix dens = c.ops.sites[j].n.sparse() * c.ops.sites[l].n.sparse();
    c.ops.pairs[{j, l}] = {Operator(prune(hop)), Operator(prune(dens))};
  }
  c.provenance.leaf = true;
  c.provenance.m = static_cast<int>(dim);
  return c;
}

PairOperators pair_operators(const OperatorSet& ops, int j, int l, OperatorMode mode) {
  require(j < l, "pair_operators: expected j < l");
  if (const PairOperators* p = ops.find_pair(j, l)) return *p;
  if (mode == OperatorMode::exact) {
    fail(ErrorCode::internal, "missing pair operator for bond " + std::to_string(j) + "-" +
                                  std::to_string(l) + " in exact mode");
  }
  return {ops.sites[j].b.adjoint() * ops.sites[l].b, ops.sites[j].n * ops.sites[l].n};
}

Operator assemble_hamiltonian(const OperatorSet& ops, const Geometry& geom,
                              const ModelParams& params, OperatorMode mode) {
  require(static_cast<int>(ops.sites.size()) == geom.sites(),
          "assemble_hamiltonian: operator set does not match geometry");
  const Index dim = ops.dim;
  bool all_sparse = true;
  for (const auto& s : ops.sites) {
    all_sparse = all_sparse && s.b.kind() == Operator::Kind::sparse;
  }
  for (const auto& [p, po] : ops.pairs) {
    all_sparse = all_sparse && po.hop.kind() == Operator::Kind::sparse;
  }
  const double hop_coeff = -params.j / params.z;

  if (all_sparse) {
    SparseMatrix h(dim, dim);
    for (const auto& s : ops.sites) {
      h += SparseMatrix((-params.delta_omega) * s.n.sparse());
      if (!params.hardcore && params.u != 0.0) h += SparseMatrix((0.5 * params.u) * s.n2.sparse());
      h += SparseMatrix(params.f * (s.b.sparse() + SparseMatrix(s.b.sparse().adjoint())));
    }
    if (hop_coeff != 0.0) {
      for (const auto& bond : geom.bonds) {
        const PairOperators po = pair_operators(ops, bond.j, bond.l, mode);
        const SparseMatrix k = po.hop.to_sparse();
        h += SparseMatrix((hop_coeff * bond.multiplicity) * (k + SparseMatrix(k.adjoint())));
      }
    }
    return Operator(prune(h));
  }

  // H = S + T + T^dagger with S the number terms and T the drive and hopping
  // terms taken once.
  DenseMatrix number_part = DenseMatrix::Zero(dim, dim);
  DenseMatrix raising = DenseMatrix::Zero(dim, dim);
  for (const auto& s : ops.sites) {
    s.n.add_to(number_part, -params.delta_omega);
    if (!params.hardcore && params.u != 0.0) s.n2.add_to(number_part, 0.5 * params.u);
    s.b.add_to(raising, params.f);
  }
  if (hop_coeff != 0.0) {
    for (const auto& bond : geom.bonds) {
      const PairOperators po = pair_operators(ops, bond.j, bond.l, mode);
      po.hop.add_to(raising, hop_coeff * bond.multiplicity);
    }
  }
  DenseMatrix h = 0.5 * (number_part + number_part.adjoint());
  h += raising;
  h += raising.adjoint();
  return Operator(std::move(h));
}

std::vector<Operator> jump_operators(const OperatorSet& ops, const ModelParams& params) {
  std::vector<Operator> out;
  const double amp = std::sqrt(params.gamma);
  for (const auto& s : ops.sites) out.push_back(s.b.scaled(amp));
  return out;
}

}  // namespace cornerspace
