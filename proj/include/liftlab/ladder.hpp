#pragma once

#include <cstdint>
#include <vector>

#include "liftlab/environment.hpp"
#include "liftlab/schedule.hpp"
#include "liftlab/sets.hpp"

namespace liftlab {

// Monte Carlo value with the standard error of the outer-node dispersion.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t n_outer = 0;
};

// Per-level sample counts plus the seed addressing scheme of the nested
// sample tree. counts[k] is the number of draws of U_k per parent node
// (index 0 unused); outer nodes draw (G, U_{r+1}).
struct SampleTree {
  std::uint64_t n_outer = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t master = 0;

  static SampleTree from_config(const EstimatorConfig& config, int r);
  std::uint64_t total_nodes() const;
};

// Address of a tree node: the outer index plus child indices descending from
// level r. A path of length d pins levels r .. r-d+1, i.e. the node holds
// every level above r-d.
struct NodeAddress {
  std::uint64_t outer = 0;
  std::vector<std::uint32_t> path;
};

// log of the nested MC estimate of zeta_k at the node addressed by
// `node` (which must pin exactly the levels above k). 1 <= k <= r.
double log_zeta(const LiftingSchedule& schedule, const IndexedSets& sets, double beta,
                double s, double t, const SampleTree& tree, int k, const NodeAddress& node,
                StreamSalts salts = {});

// The r-level interpolating free energy
//   psi = E_{G,U_{r+1}} (beta |s| sqrt(n) m_r)^{-1} log zeta_r
// estimated over samples_per_level[0] outer draws. Deterministic given
// (config.seed, inputs); reduction order is fixed regardless of threads.
Estimate psi(const LiftingSchedule& schedule, const IndexedSets& sets, double beta, double s,
             double t, const EstimatorConfig& config, int threads = 0);

// psi at t = 1 with the decoupled-side streams (u2, h) skipped entirely;
// bit-identical to psi(..., t=1, ...).
Estimate xi_endpoint(const LiftingSchedule& schedule, const IndexedSets& sets, double beta,
                     double s, const EstimatorConfig& config, int threads = 0);

namespace detail_ladder {

// Per-outer-node contributions backing psi; exposed for the seed-tree and
// decoupling diagnostics.
std::vector<double> psi_outer_values(const LiftingSchedule& schedule, const IndexedSets& sets,
                                     double beta, double s, double t,
                                     const EstimatorConfig& config, int threads,
                                     StreamSalts salts);

}  // namespace detail_ladder

}  // namespace liftlab
