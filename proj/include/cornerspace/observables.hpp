#pragma once

#include <optional>
#include <vector>

#include "cornerspace/cluster.hpp"
#include "cornerspace/model.hpp"

namespace cornerspace {

/// Linear expectation values from which every reported observable follows.
/// Averaging these over samples and then forming ratios is how ensemble
/// statistics are built.
struct RawMoments {
  std::vector<double> n;   // per site
  std::vector<cplx> b;     // per site
  std::vector<double> n2;  // per site, <b^dagger b^dagger b b>
  std::vector<double> nn;  // per bond of the geometry, <n_j n_l>

  RawMoments& operator+=(const RawMoments& o);
  RawMoments& operator*=(double s);
};

/// One result row. Undefined ratios (vanishing density) are absent rather
/// than zero or NaN.
struct ObservableRecord {
  double n = 0.0, re_b = 0.0, im_b = 0.0;
  std::optional<double> g2_onsite, g2_nn;
  double n_err = 0.0, re_b_err = 0.0, im_b_err = 0.0;
  std::optional<double> g2_err, g2_nn_err;
  bool has_errors = false;

  std::vector<double> site_n;
  std::vector<cplx> site_b;
  std::vector<std::optional<double>> site_g2;
  std::vector<std::optional<double>> bond_g2_nn;
};

/// Observables derived from moments; g2_nn is the multiplicity-weighted bond
/// average of <n_j n_l> / (n_j n_l).
ObservableRecord record_from_moments(const RawMoments& m, const Geometry& geom);

/// Operator bundle built once per solve for repeated evaluation.
class ObservableSet {
 public:
  ObservableSet(const Cluster& cluster);

  RawMoments moments(const DenseMatrix& rho) const;
  /// One set of moments per column of `psis`; columns must be normalized.
  std::vector<RawMoments> moments_batch(const DenseMatrix& psis) const;
  const Geometry& geometry() const { return geometry_; }
  bool uses_product_pairs() const { return product_pairs_; }

 private:
  Geometry geometry_;
  std::vector<Operator> n_, b_, n2_, nn_;
  std::vector<ApplyMatrix> n_apply_, b_apply_, n2_apply_, nn_apply_;
  bool hardcore_like_ = false;
  bool product_pairs_ = false;
};

struct SiteExpectations {
  std::vector<double> n;
  std::vector<cplx> b;
  double n_avg = 0.0;
  cplx b_avg = 0.0;
};

SiteExpectations site_expectations(const Cluster& cluster);

struct G2Values {
  std::optional<double> g2_onsite;
  std::optional<double> g2_nn;
  std::vector<std::optional<double>> bond_g2_nn;
  bool product_mode = false;  // some bonds used b_j^dagger b_l products
};

G2Values g2_functions(const Cluster& cluster);

/// Full record for a solved cluster.
ObservableRecord observe(const Cluster& cluster);

struct SpectrumRow {
  int rank = 0;  // 1-based
  double p = 0.0;
  double n_total = 0.0;
};

/// Eigenvalues of rho in descending order with <Psi_r| sum_j n_j |Psi_r>.
std::vector<SpectrumRow> probability_spectrum(const Cluster& cluster);

}  // namespace cornerspace
