#include "liftlab/gibbs.hpp"

#include <cmath>
#include <string>

#include "liftlab/error.hpp"
#include "liftlab/mathutil.hpp"
#include "nested_engine.hpp"

namespace liftlab {

namespace {

using detail::FieldState;
using detail::Geometry;
using detail::LeafObs;
using detail::RunParams;
using detail::ScalarObsSpec;
using detail::Walker;

void check_params(double beta, double s, double t) {
  if (!(beta >= 0.0) || s == 0.0 || !std::isfinite(beta) || !std::isfinite(s)) {
    fail(ErrorCode::kInvalidParams, "require beta >= 0 and s != 0");
  }
  if (!(t >= 0.0 && t <= 1.0)) {
    fail(ErrorCode::kInvalidParams, "t must lie in [0,1]");
  }
}

}  // namespace

std::vector<double> phi_weight(const LiftingSchedule& schedule, const IndexedSets& sets,
                               double beta, double s, double t, const SampleTree& tree,
                               int k, const NodeAddress& node) {
  if (k < 1 || k > schedule.r) {
    fail(ErrorCode::kLevelOutOfRange, "phi_weight level must lie in 1..r");
  }
  if (node.path.size() != static_cast<std::size_t>(schedule.r - k)) {
    fail(ErrorCode::kInvalidParams,
         "node path must pin levels r.." + std::to_string(k + 1));
  }
  check_params(beta, s, t);

  Geometry geo(sets);
  RunParams rp;
  rp.sched = &schedule;
  rp.geo = &geo;
  rp.beta = beta;
  rp.s = s;
  rp.t = t;
  rp.master = tree.master;
  rp.n_outer = tree.n_outer;
  rp.counts = tree.counts;
  Walker walker(rp);

  walker.begin_outer(node.outer);
  std::uint64_t key = walker.outer_key();
  FieldState state = walker.outer_state();
  int level = schedule.r;
  for (std::uint32_t idx : node.path) {
    const std::uint64_t child = Walker::child_key(key, level, idx);
    FieldState next;
    walker.descend(level, child, state, next);
    state = std::move(next);
    key = child;
    --level;
  }

  const std::uint64_t count = tree.counts[static_cast<std::size_t>(k)];
  const double ratio = schedule.exponent_ratio(k);
  std::vector<double> a(count);
  FieldState child;
  for (std::uint64_t j = 0; j < count; ++j) {
    const std::uint64_t ckey = Walker::child_key(key, k, j);
    walker.descend(k, ckey, state, child);
    const double inner =
        (k == 1) ? walker.leaf_log_z(child) : walker.log_zeta(k - 1, ckey, child);
    a[j] = ratio * inner;
  }
  softmax_inplace(a);
  return a;
}

namespace detail_gibbs {

OuterValues gibbs_outer_values(const ObservableKind& kind, int k1,
                               const LiftingSchedule& schedule, const IndexedSets& sets,
                               double beta, double s, double t, const EstimatorConfig& config,
                               int threads, const GibbsOptions& options) {
  check_params(beta, s, t);
  validate_config(config, schedule);

  const int coupling = (kind.tag == ObservableKind::Tag::kBracket ||
                        kind.tag == ObservableKind::Tag::kConstOne)
                           ? (kind.k1 > 0 ? kind.k1 : k1)
                           : 1;
  if (coupling < 1 || coupling > schedule.r + 1) {
    fail(ErrorCode::kInvalidParams,
         "coupling level k1 = " + std::to_string(coupling) + " outside 1..r+1");
  }

  Geometry geo(sets);
  RunParams rp = detail::make_run_params(schedule, geo, beta, s, t, config);
  rp.swap_replica_tags = options.swap_replica_tags;

  // Constant observable under a coupled measure: run it through the bracket
  // machinery with O(a,b) = 1, exercising the same weights and replicas.
  const bool bracket_like = (kind.tag == ObservableKind::Tag::kBracket ||
                             kind.tag == ObservableKind::Tag::kConstOne);
  Matrix bx, by;
  if (bracket_like) {
    if (kind.tag == ObservableKind::Tag::kBracket) {
      bx = geo.bracket_x(kind.p_ref);
      by = geo.bracket_y(kind.q_ref);
    } else {
      bx = Matrix(static_cast<std::size_t>(geo.lx), static_cast<std::size_t>(geo.lx), 1.0);
      by = Matrix(static_cast<std::size_t>(geo.ly), static_cast<std::size_t>(geo.ly), 1.0);
    }
  }
  const bool count_br = (kind.tag == ObservableKind::Tag::kBracket);

  OuterValues out;
  out.values.assign(rp.n_outer, 0.0);
  std::vector<detail::BracketStats> stats(rp.n_outer);

  const bool track = (kind.tag == ObservableKind::Tag::kBracket && kind.p_ref == 1.0 &&
                      kind.q_ref == 1.0);
  parallel_for(rp.n_outer, threads, [&](std::size_t i) {
    Walker walker(rp);
    walker.set_bracket_tracking(track);
    walker.begin_outer(i);
    double value = 0.0;
    switch (kind.tag) {
      case ObservableKind::Tag::kXY2: {
        ScalarObsSpec spec{LeafObs::kXY2, 1.0, nullptr, nullptr};
        walker.scalar_chain(schedule.r, walker.outer_key(), walker.outer_state(), {&spec, 1},
                            {&value, 1});
        break;
      }
      case ObservableKind::Tag::kXY2Cross: {
        ScalarObsSpec spec{LeafObs::kXY2Cross, kind.q_ref, nullptr, nullptr};
        walker.scalar_chain(schedule.r, walker.outer_key(), walker.outer_state(), {&spec, 1},
                            {&value, 1});
        break;
      }
      case ObservableKind::Tag::kBracket:
      case ObservableKind::Tag::kConstOne: {
        if (coupling == 1) {
          ScalarObsSpec spec{LeafObs::kBracketCoupled, 1.0, &bx, &by};
          walker.scalar_chain(schedule.r, walker.outer_key(), walker.outer_state(), {&spec, 1},
                              {&value, 1});
        } else if (coupling == schedule.r + 1) {
          double lz_sym = 0.0;
          value = walker.bracket_junction(schedule.r, walker.outer_key(),
                                          walker.outer_state(), bx, by, lz_sym);
        } else {
          walker.bracket_chain(schedule.r, coupling, walker.outer_key(),
                               walker.outer_state(), bx, by, value);
        }
        break;
      }
    }
    out.values[i] = value;
    if (count_br) stats[i] = walker.bracket_stats();
  });

  for (const auto& st : stats) {
    out.bracket_samples += st.samples;
    out.bracket_violations += st.violations;
  }
  return out;
}

}  // namespace detail_gibbs

Estimate gibbs_average(const ObservableKind& kind, int k1, const LiftingSchedule& schedule,
                       const IndexedSets& sets, double beta, double s, double t,
                       const EstimatorConfig& config, int threads) {
  const auto out = detail_gibbs::gibbs_outer_values(kind, k1, schedule, sets, beta, s, t,
                                                    config, threads);
  const MeanStderr ms = mean_stderr(out.values);
  return Estimate{ms.mean, ms.std_error, out.values.size()};
}

}  // namespace liftlab
