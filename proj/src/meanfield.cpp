#include "cornerspace/meanfield.hpp"

#include <cmath>
#include <sstream>

#include "cornerspace/steadystate.hpp"

namespace cornerspace {

SparseMatrix meanfield_hamiltonian(const ModelParams& p, cplx beta) {
  const FockSiteOperators f = fock_site_operators(p.n_max);
  const SparseMatrix bd = f.b.adjoint();
  SparseMatrix h = -p.delta_omega * f.n;
  if (!p.hardcore) h += (0.5 * p.u) * f.n2;
  h += cplx(p.f) * (f.b + bd);
  h -= p.j * (beta * bd + std::conj(beta) * f.b);
  return prune(h);
}

MeanFieldSolution gutzwiller_fixed_point(const ModelParams& params,
                                         const MeanFieldOptions& opt) {
  params.validate();
  require(opt.damping > 0.0 && opt.damping <= 1.0, "gutzwiller_fixed_point: damping must be in (0, 1]");
  require(opt.tol > 0.0 && opt.max_iter >= 1, "gutzwiller_fixed_point: tol > 0 and max_iter >= 1 required");
  const FockSiteOperators f = fock_site_operators(params.n_max);
  const std::vector<Operator> jumps{Operator(SparseMatrix(std::sqrt(params.gamma) * f.b))};
  const Operator b_op(f.b), n_op(f.n), n2_op(f.n2);

  MeanFieldSolution sol;
  cplx beta = params.f / cplx(params.delta_omega + params.j, 0.5 * params.gamma);
  sol.history.push_back(beta);
  DenseMatrix rho;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    rho = steady_state_nullspace(Operator(meanfield_hamiltonian(params, beta)), jumps).matrix;
    const cplx b_new = b_op.expectation(rho);
    sol.residual = std::abs(b_new - beta);
    sol.iterations = it;
    if (sol.residual < opt.tol) {
      sol.converged = true;
      beta = b_new;
      sol.history.push_back(beta);
      break;
    }
    if (sol.residual < best) {
      best = sol.residual;
      since_best = 0;
    } else if (++since_best > 200) {
      sol.oscillating = true;
      break;
    }
    beta = (1.0 - opt.damping) * beta + opt.damping * b_new;
    sol.history.push_back(beta);
  }
  if (sol.converged) {
    // state consistent with the returned field
    rho = steady_state_nullspace(Operator(meanfield_hamiltonian(params, beta)), jumps).matrix;
  }
  sol.rho = {rho, "fock"};
  sol.b = beta;
  sol.n = std::real(n_op.expectation(rho));
  if (sol.n > 1e-14) sol.g2 = std::real(n2_op.expectation(rho)) / (sol.n * sol.n);
  if (!sol.converged && opt.throw_on_failure) {
    std::ostringstream msg;
    msg << "gutzwiller_fixed_point: no convergence after " << sol.iterations
        << " iterations (residual " << sol.residual << (sol.oscillating ? ", oscillating" : "")
        << ")";
    fail(ErrorCode::not_converged, msg.str());
  }
  return sol;
}

DenseMatrix meanfield_product_state(const MeanFieldSolution& mf, int sites) {
  require(sites >= 1, "meanfield_product_state: need at least one site");
  DenseMatrix out = mf.rho.matrix;
  for (int s = 1; s < sites; ++s) out = kron(out, mf.rho.matrix);
  return out;
}

}  // namespace cornerspace
