#include "liftlab/schedule.hpp"

#include <cmath>
#include <string>

#include "liftlab/error.hpp"

namespace liftlab {

namespace {

void check_finite(const std::vector<double>& v, const char* name) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      fail(ErrorCode::kNonfiniteInput,
           std::string(name) + " has non-finite entry at index " + std::to_string(i));
    }
  }
}

void check_non_increasing(const std::vector<double>& v, const char* name, std::size_t upto) {
  for (std::size_t i = 1; i <= upto; ++i) {
    if (v[i] > v[i - 1]) {
      fail(ErrorCode::kScheduleMonotonicity,
           std::string(name) + " increases at index " + std::to_string(i));
    }
  }
}

}  // namespace

LiftingSchedule validate_schedule(const std::vector<double>& p,
                                  const std::vector<double>& q,
                                  const std::vector<double>& m,
                                  bool force_m) {
  if (p.size() != q.size() || p.size() != m.size() || p.size() < 3) {
    fail(ErrorCode::kScheduleLengthMismatch,
         "p, q, m must share a common length r+2 >= 3 (got " + std::to_string(p.size()) +
             ", " + std::to_string(q.size()) + ", " + std::to_string(m.size()) + ")");
  }
  check_finite(p, "p");
  check_finite(q, "q");
  check_finite(m, "m");

  const int r = static_cast<int>(p.size()) - 2;
  const std::size_t last = static_cast<std::size_t>(r) + 1;

  if (m[0] != 1.0) fail(ErrorCode::kScheduleBoundary, "m[0] must equal 1 exactly");
  if (m[last] != 0.0)
    fail(ErrorCode::kScheduleBoundary, "m[" + std::to_string(last) + "] must equal 0 exactly");
  if (p[last] != 0.0)
    fail(ErrorCode::kScheduleBoundary, "p[" + std::to_string(last) + "] must equal 0 exactly");
  if (q[last] != 0.0)
    fail(ErrorCode::kScheduleBoundary, "q[" + std::to_string(last) + "] must equal 0 exactly");
  if (p[0] > 1.0) fail(ErrorCode::kScheduleBoundary, "p[0] must be <= 1");
  if (q[0] > 1.0) fail(ErrorCode::kScheduleBoundary, "q[0] must be <= 1");

  check_non_increasing(p, "p", last);
  check_non_increasing(q, "q", last);
  if (!force_m) {
    check_non_increasing(m, "m", static_cast<std::size_t>(r));
    for (int k = 1; k <= r; ++k) {
      if (!(m[k] > 0.0 && m[k] <= 1.0)) {
        fail(ErrorCode::kScheduleMonotonicity,
             "m[" + std::to_string(k) + "] must lie in (0,1]");
      }
    }
  } else {
    for (int k = 1; k <= r; ++k) {
      if (m[k] == 0.0) {
        fail(ErrorCode::kScheduleBoundary,
             "m[" + std::to_string(k) + "] must be nonzero (exponent ratios divide by it)");
      }
    }
  }

  LiftingSchedule out;
  out.r = r;
  out.p_vec = p;
  out.q_vec = q;
  out.m_vec = m;
  out.var4.assign(last + 1, 0.0);
  out.var2.assign(last + 1, 0.0);
  out.varh.assign(last + 1, 0.0);
  out.sd4.assign(last + 1, 0.0);
  out.sd2.assign(last + 1, 0.0);
  out.sdh.assign(last + 1, 0.0);
  for (std::size_t k = 1; k <= last; ++k) {
    out.var4[k] = p[k - 1] * q[k - 1] - p[k] * q[k];
    out.var2[k] = p[k - 1] - p[k];
    out.varh[k] = q[k - 1] - q[k];
    if (out.var4[k] < 0.0)
      fail(ErrorCode::kScheduleMonotonicity,
           "p*q increases at index " + std::to_string(k));
    if (out.var2[k] < 0.0)
      fail(ErrorCode::kScheduleMonotonicity, "p increases at index " + std::to_string(k));
    if (out.varh[k] < 0.0)
      fail(ErrorCode::kScheduleMonotonicity, "q increases at index " + std::to_string(k));
    out.sd4[k] = std::sqrt(out.var4[k]);
    out.sd2[k] = std::sqrt(out.var2[k]);
    out.sdh[k] = std::sqrt(out.varh[k]);
  }
  return out;
}

void validate_config(const EstimatorConfig& config, const LiftingSchedule& schedule) {
  const std::size_t want = static_cast<std::size_t>(schedule.r) + 1;
  if (config.samples_per_level.size() != want) {
    fail(ErrorCode::kInvalidParams,
         "samples_per_level must have length r+1 = " + std::to_string(want) + " (got " +
             std::to_string(config.samples_per_level.size()) + ")");
  }
  for (std::size_t i = 0; i < config.samples_per_level.size(); ++i) {
    if (config.samples_per_level[i] < 1) {
      fail(ErrorCode::kInvalidParams,
           "samples_per_level[" + std::to_string(i) + "] must be >= 1");
    }
  }
  if (!(config.fd_step > 0.0)) {
    fail(ErrorCode::kFdStepOutOfRange, "fd_step must be positive");
  }
}

}  // namespace liftlab
