#pragma once

#include <vector>

#include "liftlab/environment.hpp"
#include "liftlab/matrix.hpp"
#include "liftlab/sets.hpp"

namespace liftlab {

// Interpolated bilinear process, entry (i1,i2):
//   sqrt(t)   y^T G x
// + sqrt(1-t) |x| y^T (sum_k u2[k])
// + sqrt(t)   |x||y| (sum_k u4[k])
// + sqrt(1-t) |y| (sum_k h[k])^T x
Matrix d0_matrix(const Environment& env, const IndexedSets& sets, double t);

// Log-domain partition objects for one environment. beta_d0 holds the
// exponents beta * D0 (equivalently beta_{i1} * D^{(i1,i2)}); nothing is ever
// materialized in linear scale.
struct LogPartition {
  Matrix beta_d0;               // l_x x l_y
  std::vector<double> log_C;    // per-row logsumexp of beta_d0
  double log_Z = 0.0;           // logsumexp over rows of s * log_C
  double s = 0.0;
  double beta = 0.0;
};

LogPartition log_partition(const Matrix& d0, const IndexedSets& sets, double beta, double s);

// Base Gibbs weights gamma_0(i1,i2) = (C_i1)^s / Z * A(i1,i2) / C_i1.
// Nonnegative, sums to 1.
Matrix gamma0(const LogPartition& part);

}  // namespace liftlab
