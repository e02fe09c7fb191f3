#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace liftlab {

// Max-shifted log(sum(exp(v))); tolerates magnitudes up to ~700*l without
// overflow in either direction.
inline double logsumexp(std::span<const double> v) {
  double m = -HUGE_VAL;
  for (double x : v) {
    if (x > m) m = x;
  }
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

inline double logmeanexp(std::span<const double> v) {
  return logsumexp(v) - std::log(static_cast<double>(v.size()));
}

// Normalized weights exp(v_j - logsumexp(v)); sums to 1 up to rounding.
inline void softmax_inplace(std::span<double> v) {
  const double lse = logsumexp(v);
  for (double& x : v) x = std::exp(x - lse);
}

// Pairwise summation: deterministic for a fixed ordering and accurate for
// long accumulations.
inline double pairwise_sum(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

struct MeanStderr {
  double mean = 0.0;
  double std_error = 0.0;
};

inline MeanStderr mean_stderr(std::span<const double> v) {
  MeanStderr out;
  const std::size_t n = v.size();
  if (n == 0) return out;
  out.mean = pairwise_sum(v) / static_cast<double>(n);
  if (n == 1) return out;
  double ss = 0.0;
  for (double x : v) {
    const double dxy = x - out.mean;
    ss += dxy * dxy;
  }
  out.std_error = std::sqrt(ss / (static_cast<double>(n) * static_cast<double>(n - 1)));
  return out;
}

// Runs fn(i) for i in [0, count) over `threads` workers with static chunking.
// Callers write results into disjoint slots, so no synchronization is needed.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace liftlab
