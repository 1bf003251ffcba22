#pragma once

#include <string>
#include <vector>

#include "cornerspace/model.hpp"

namespace cornerspace {

struct MeanFieldOptions {
  double damping = 0.5;
  double tol = 1e-10;
  int max_iter = 5000;
  bool throw_on_failure = true;
};

/// Self-consistent single-site state of the Gutzwiller decoupling.
struct MeanFieldSolution {
  DensityMatrix rho;  // single site, Fock basis
  cplx b = 0.0;
  double n = 0.0;
  std::optional<double> g2;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  bool oscillating = false;
  std::vector<cplx> history;  // <b> after each iteration, starting with the guess
};

/// Single-site mean-field Hamiltonian for the field beta:
/// -dw n + (U/2) n2 + F (b + b^dagger) - J (beta b^dagger + beta^* b).
/// The z neighbors and the J/z normalization combine into one J.
SparseMatrix meanfield_hamiltonian(const ModelParams& params, cplx beta);

/// Damped fixed-point iteration beta <- (1 - damping) beta + damping <b>[beta]
/// starting from the linear-response guess F / (dw + J + i gamma / 2); each
/// single-site steady state comes from the Liouvillian null space.
MeanFieldSolution gutzwiller_fixed_point(const ModelParams& params,
                                         const MeanFieldOptions& options = {});

/// Product state rho_mf^{(x) sites} in the Fock basis of `sites` sites.
DenseMatrix meanfield_product_state(const MeanFieldSolution& mf, int sites);

}  // namespace cornerspace
