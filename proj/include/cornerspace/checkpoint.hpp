#pragma once

#include <string>

#include "cornerspace/cluster.hpp"
#include "cornerspace/observables.hpp"

namespace cornerspace {

// Binary cluster container, all integers and doubles little-endian:
//
//   "CNRS"  u32 version (= 1)
//   geometry   i32 lx, i32 ly, u8 periodic_x, u8 periodic_y
//   i32 n_max, i64 dim, u8 mode (0 exact, 1 fast)
//   provenance u8 leaf, i32 m, i64 child_a_dim, i64 child_b_dim,
//              str child_a, str child_b, f64 captured
//   corner     u8 present; i64 count, count x (i32 rank_a, i32 rank_b)
//   sites      i64 count, count x (op b, op n, op n2)
//   pairs      i64 count, count x (i32 j, i32 l, op hop, op density)
//   rho        u8 present; str basis, cmat
//   eig        u8 present; rvec values, cmat vectors
//
// str  = i64 length, bytes
// cmat = i64 rows, i64 cols, rows * cols x (f64 re, f64 im), column-major
// rvec = i64 length, length x f64
// op   = u8 kind, then
//        0 sparse:     i64 dim, i64 nnz, nnz x (i64 row, i64 col), cvec values
//        1 dense:      cmat
//        2 factorized: u8 left_identity, u8 right_identity, cmat left, cmat right
//                      (an identity factor is stored as a 0 x 0 cmat)
// cvec = i64 length, length x (f64 re, f64 im)
//
// Factorized operators share the cluster's corner index.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_cluster(const Cluster& c, const std::string& path);
Cluster load_cluster(const std::string& path);

// Solve summary kept next to a cluster checkpoint so a restored node reports
// the numbers of the original solve (trajectory means and their errors, not
// a re-evaluation on the estimated rho):
//
//   "CNRR"  u32 version (= 1)
//   f64 n, re_b, im_b, n_err, re_b_err, im_b_err
//   opt g2, opt g2_nn, opt g2_err, opt g2_nn_err   (opt = u8 present, f64)
//   u8 has_errors, f64 dt, u64 seed
struct SolveSummary {
  ObservableRecord record;
  double dt = 0.0;
  std::uint64_t seed = 0;
};

void save_summary(const SolveSummary& s, const std::string& path);
SolveSummary load_summary(const std::string& path);

}  // namespace cornerspace
