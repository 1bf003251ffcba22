#pragma once

#include <vector>

#include "cornerspace/cluster.hpp"

namespace cornerspace {

/// Driven-dissipative Bose-Hubbard parameters in units of gamma. Only the
/// pump-cavity detuning is stored; hard-core bosons use n_max = 1 and drop
/// the interaction term.
struct ModelParams {
  double delta_omega = 5.0;
  double u = 0.0;
  bool hardcore = false;
  double j = 1.0;
  double f = 2.0;  // real drive amplitude
  double gamma = 1.0;
  int n_max = 1;
  int z = 4;

  void validate() const;
};

struct FockSiteOperators {
  SparseMatrix b, n, n2;
};

/// Single-site ladder algebra truncated at n_max bosons.
FockSiteOperators fock_site_operators(int n_max);

/// Full Fock-space cluster with site operators placed by Kronecker products
/// and the given pairs materialized exactly.
Cluster build_base_cluster(const Geometry& geom, const ModelParams& params,
                           const std::vector<SitePair>& tracked_pairs,
                           long long dim_cap = 4096);

/// H = sum_j [-dw n_j + U/2 n2_j + F (b_j + b_j^dagger)]
///     - (J/z) sum_bonds mult (K_jl + K_jl^dagger)
/// In fast mode, pairs not carried by `ops` are rebuilt as b_j^dagger b_l.
Operator assemble_hamiltonian(const OperatorSet& ops, const Geometry& geom,
                              const ModelParams& params,
                              OperatorMode mode = OperatorMode::exact);

/// sqrt(gamma) b_j, one per site.
std::vector<Operator> jump_operators(const OperatorSet& ops, const ModelParams& params);

/// Pair operators for `geom`'s bonds: tracked ones as stored, otherwise (fast
/// mode only) products of the projected site operators.
PairOperators pair_operators(const OperatorSet& ops, int j, int l, OperatorMode mode);

}  // namespace cornerspace
