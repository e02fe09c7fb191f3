#pragma once

#include <cstdint>
#include <vector>

namespace liftlab {

// Lifting schedule (p, q, m), all of length r+2 indexed 0..r+1, with the
// per-level Gaussian variances implied by consecutive differences:
//   Var(u4[k]) = p[k-1]q[k-1] - p[k]q[k]
//   Var(u2[k]) = p[k-1] - p[k]
//   Var(h[k])  = q[k-1] - q[k]        for k = 1..r+1.
struct LiftingSchedule {
  int r = 0;
  std::vector<double> m_vec;
  std::vector<double> p_vec;
  std::vector<double> q_vec;

  // Cached level variances and standard deviations, index k in 1..r+1
  // (slot 0 unused).
  std::vector<double> var4, var2, varh;
  std::vector<double> sd4, sd2, sdh;

  // m_k / m_{k-1} for k in 1..r.
  double exponent_ratio(int k) const { return m_vec[k] / m_vec[k - 1]; }
};

// Validates boundary values, monotonicity and derived variances; caches the
// per-level variances. `force_m` relaxes the 0 < m_k <= 1 / non-increasing
// checks on m (exploration mode); boundary values m_0 = 1, m_{r+1} = 0 are
// always enforced.
LiftingSchedule validate_schedule(const std::vector<double>& p,
                                  const std::vector<double>& q,
                                  const std::vector<double>& m,
                                  bool force_m = false);

// Nested Monte Carlo controls. samples_per_level is outermost first:
// index 0 counts draws of (G, U_{r+1}) and index i counts draws of
// U_{r+1-i}, so the last entry drives the innermost level U_1.
struct EstimatorConfig {
  std::vector<std::uint64_t> samples_per_level;
  double fd_step = 0.02;
  std::uint64_t seed = 0;
  bool replica_streams_independent = true;
};

// Checks counts and fd_step against a schedule; throws on violation.
void validate_config(const EstimatorConfig& config, const LiftingSchedule& schedule);

}  // namespace liftlab
