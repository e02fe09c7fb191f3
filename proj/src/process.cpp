#include "liftlab/process.hpp"

#include <cmath>
#include <string>

#include "liftlab/error.hpp"
#include "liftlab/mathutil.hpp"

namespace liftlab {

Matrix d0_matrix(const Environment& env, const IndexedSets& sets, double t) {
  if (env.n != sets.n || env.m_dim != sets.m_dim) {
    fail(ErrorCode::kDimensionMismatch,
         "environment is (" + std::to_string(env.n) + "," + std::to_string(env.m_dim) +
             "), sets are (" + std::to_string(sets.n) + "," + std::to_string(sets.m_dim) + ")");
  }
  if (!(t >= 0.0 && t <= 1.0)) {
    fail(ErrorCode::kInvalidParams, "t must lie in [0,1]");
  }
  const int lx = sets.lx();
  const int ly = sets.ly();
  const double sqrt_t = std::sqrt(t);
  const double sqrt_1mt = std::sqrt(1.0 - t);

  // Accumulated fields over levels k = 1..r+1.
  double u4_sum = 0.0;
  std::vector<double> u2_sum(static_cast<std::size_t>(env.m_dim), 0.0);
  std::vector<double> h_sum(static_cast<std::size_t>(env.n), 0.0);
  for (int k = 1; k <= env.r + 1; ++k) {
    u4_sum += env.u4[static_cast<std::size_t>(k)];
    for (int j = 0; j < env.m_dim; ++j) u2_sum[static_cast<std::size_t>(j)] += env.u2[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
    for (int i = 0; i < env.n; ++i) h_sum[static_cast<std::size_t>(i)] += env.h[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
  }

  // Projections: Gx per x member, then row-wise y contractions.
  Matrix d0(static_cast<std::size_t>(lx), static_cast<std::size_t>(ly));
  std::vector<double> gx(static_cast<std::size_t>(env.m_dim));
  for (int i1 = 0; i1 < lx; ++i1) {
    const auto& x = sets.X[static_cast<std::size_t>(i1)];
    double hx = 0.0;
    for (int i = 0; i < env.n; ++i) hx += h_sum[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    for (int j = 0; j < env.m_dim; ++j) {
      double acc = 0.0;
      for (int i = 0; i < env.n; ++i) acc += env.G(static_cast<std::size_t>(j), static_cast<std::size_t>(i)) * x[static_cast<std::size_t>(i)];
      gx[static_cast<std::size_t>(j)] = acc;
    }
    const double xn = sets.x_norms[static_cast<std::size_t>(i1)];
    for (int i2 = 0; i2 < ly; ++i2) {
      const auto& y = sets.Y[static_cast<std::size_t>(i2)];
      double ygx = 0.0;
      double yu2 = 0.0;
      for (int j = 0; j < env.m_dim; ++j) {
        ygx += y[static_cast<std::size_t>(j)] * gx[static_cast<std::size_t>(j)];
        yu2 += y[static_cast<std::size_t>(j)] * u2_sum[static_cast<std::size_t>(j)];
      }
      const double yn = sets.y_norms[static_cast<std::size_t>(i2)];
      d0(static_cast<std::size_t>(i1), static_cast<std::size_t>(i2)) =
          sqrt_t * ygx + sqrt_1mt * xn * yu2 + sqrt_t * xn * yn * u4_sum + sqrt_1mt * yn * hx;
    }
  }
  return d0;
}

LogPartition log_partition(const Matrix& d0, const IndexedSets& sets, double beta, double s) {
  if (d0.rows() != static_cast<std::size_t>(sets.lx()) ||
      d0.cols() != static_cast<std::size_t>(sets.ly())) {
    fail(ErrorCode::kDimensionMismatch, "d0 shape does not match the index sets");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta) || !std::isfinite(s) || s == 0.0) {
    fail(ErrorCode::kInvalidParams, "require beta >= 0 and s != 0");
  }
  LogPartition part;
  part.beta = beta;
  part.s = s;
  part.beta_d0 = Matrix(d0.rows(), d0.cols());
  for (std::size_t i = 0; i < d0.size(); ++i) {
    const double e = beta * d0.data()[i];
    if (!std::isfinite(e)) fail(ErrorCode::kNonfiniteInput, "non-finite exponent in beta*D0");
    part.beta_d0.data()[i] = e;
  }
  part.log_C.resize(d0.rows());
  std::vector<double> scaled(d0.rows());
  for (std::size_t i = 0; i < d0.rows(); ++i) {
    part.log_C[i] = logsumexp({part.beta_d0.data() + i * d0.cols(), d0.cols()});
    scaled[i] = s * part.log_C[i];
  }
  part.log_Z = logsumexp(scaled);
  return part;
}

Matrix gamma0(const LogPartition& part) {
  const std::size_t lx = part.beta_d0.rows();
  const std::size_t ly = part.beta_d0.cols();
  Matrix w(lx, ly);
  for (std::size_t i1 = 0; i1 < lx; ++i1) {
    const double row_log = part.s * part.log_C[i1] - part.log_Z - part.log_C[i1];
    for (std::size_t i2 = 0; i2 < ly; ++i2) {
      w(i1, i2) = std::exp(row_log + part.beta_d0(i1, i2));
    }
  }
  return w;
}

}  // namespace liftlab
