#include "liftlab/ladder.hpp"

#include <cmath>
#include <string>

#include "liftlab/error.hpp"
#include "liftlab/mathutil.hpp"
#include "nested_engine.hpp"

namespace liftlab {

SampleTree SampleTree::from_config(const EstimatorConfig& config, int r) {
  if (config.samples_per_level.size() != static_cast<std::size_t>(r) + 1) {
    fail(ErrorCode::kInvalidParams,
         "samples_per_level must have length r+1 = " + std::to_string(r + 1));
  }
  SampleTree tree;
  tree.master = config.seed;
  tree.n_outer = config.samples_per_level[0];
  tree.counts.assign(static_cast<std::size_t>(r) + 1, 0);
  for (int k = 1; k <= r; ++k) {
    tree.counts[static_cast<std::size_t>(k)] =
        config.samples_per_level[static_cast<std::size_t>(r + 1 - k)];
  }
  return tree;
}

std::uint64_t SampleTree::total_nodes() const {
  std::uint64_t total = n_outer;
  for (std::size_t k = 1; k < counts.size(); ++k) total *= counts[k];
  return total;
}

namespace {

using detail::FieldState;
using detail::Geometry;
using detail::RunParams;
using detail::Walker;

void check_psi_params(double beta, double s, double t) {
  if (!(beta > 0.0) || s == 0.0 || !std::isfinite(beta) || !std::isfinite(s)) {
    fail(ErrorCode::kInvalidParams, "require beta > 0 and s != 0");
  }
  if (!(t >= 0.0 && t <= 1.0)) {
    fail(ErrorCode::kInvalidParams, "t must lie in [0,1]");
  }
}

RunParams params_from_tree(const LiftingSchedule& schedule, const Geometry& geo, double beta,
                           double s, double t, const SampleTree& tree, StreamSalts salts) {
  RunParams rp;
  rp.sched = &schedule;
  rp.geo = &geo;
  rp.beta = beta;
  rp.s = s;
  rp.t = t;
  rp.master = tree.master;
  rp.n_outer = tree.n_outer;
  rp.counts = tree.counts;
  rp.salts = salts;
  return rp;
}

// Walks to the node pinned by `address`, accumulating its field state.
// Returns the node key; `state` ends at the level just below the last pinned
// one.
std::uint64_t walk_to_node(Walker& walker, const LiftingSchedule& schedule,
                           const NodeAddress& address, FieldState& state) {
  walker.begin_outer(address.outer);
  std::uint64_t key = walker.outer_key();
  state = walker.outer_state();
  int level = schedule.r;
  for (std::uint32_t idx : address.path) {
    const std::uint64_t child = Walker::child_key(key, level, idx);
    FieldState next;
    walker.descend(level, child, state, next);
    state = std::move(next);
    key = child;
    --level;
  }
  return key;
}

}  // namespace

double log_zeta(const LiftingSchedule& schedule, const IndexedSets& sets, double beta, double s,
                double t, const SampleTree& tree, int k, const NodeAddress& node,
                StreamSalts salts) {
  if (k < 1 || k > schedule.r) {
    fail(ErrorCode::kLevelOutOfRange, "log_zeta level must lie in 1..r");
  }
  if (node.path.size() != static_cast<std::size_t>(schedule.r - k)) {
    fail(ErrorCode::kInvalidParams,
         "node path must pin levels r.." + std::to_string(k + 1) + " (length " +
             std::to_string(schedule.r - k) + ")");
  }
  // Unlike psi, the ladder itself is well defined at beta = 0.
  if (!(beta >= 0.0) || s == 0.0 || !(t >= 0.0 && t <= 1.0)) {
    fail(ErrorCode::kInvalidParams, "require beta >= 0, s != 0 and t in [0,1]");
  }
  Geometry geo(sets);
  RunParams rp = params_from_tree(schedule, geo, beta, s, t, tree, salts);
  Walker walker(rp);
  FieldState state;
  const std::uint64_t key = walk_to_node(walker, schedule, node, state);
  return walker.log_zeta(k, key, state);
}

namespace detail_ladder {

std::vector<double> psi_outer_values(const LiftingSchedule& schedule, const IndexedSets& sets,
                                     double beta, double s, double t,
                                     const EstimatorConfig& config, int threads,
                                     StreamSalts salts) {
  check_psi_params(beta, s, t);
  validate_config(config, schedule);
  Geometry geo(sets);
  RunParams rp = detail::make_run_params(schedule, geo, beta, s, t, config);
  rp.salts = salts;
  const double scale =
      1.0 / (beta * std::fabs(s) * std::sqrt(static_cast<double>(sets.n)) *
             schedule.m_vec[static_cast<std::size_t>(schedule.r)]);
  std::vector<double> values(rp.n_outer);
  parallel_for(rp.n_outer, threads, [&](std::size_t i) {
    Walker walker(rp);
    walker.begin_outer(i);
    values[i] = scale * walker.log_zeta(schedule.r, walker.outer_key(), walker.outer_state());
  });
  return values;
}

}  // namespace detail_ladder

Estimate psi(const LiftingSchedule& schedule, const IndexedSets& sets, double beta, double s,
             double t, const EstimatorConfig& config, int threads) {
  const std::vector<double> values =
      detail_ladder::psi_outer_values(schedule, sets, beta, s, t, config, threads, {});
  const MeanStderr ms = mean_stderr(values);
  return Estimate{ms.mean, ms.std_error, values.size()};
}

Estimate xi_endpoint(const LiftingSchedule& schedule, const IndexedSets& sets, double beta,
                     double s, const EstimatorConfig& config, int threads) {
  return psi(schedule, sets, beta, s, 1.0, config, threads);
}

}  // namespace liftlab
