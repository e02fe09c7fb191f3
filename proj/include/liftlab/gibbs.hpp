#pragma once

#include <cstdint>
#include <vector>

#include "liftlab/ladder.hpp"
#include "liftlab/schedule.hpp"
#include "liftlab/sets.hpp"

namespace liftlab {

// Observables averaged under the reweighted Gibbs measures:
//   kXY2       |x|^2 |y|^2                          under gamma_01
//   kXY2Cross  |x|^2 (q_ref |y||y'| - y'^T y)       under gamma_02 (shared i1)
//   kBracket   (p_ref|x||x'| - x'^T x)(q_ref|y||y'| - y'^T y) under gamma_{k1}
//   kConstOne  1 (measure totality witness)         under gamma_{k1}
struct ObservableKind {
  enum class Tag { kXY2, kXY2Cross, kBracket, kConstOne };
  Tag tag = Tag::kXY2;
  int k1 = 1;           // coupling level for kBracket / kConstOne, in 1..r+1
  double p_ref = 1.0;
  double q_ref = 1.0;

  static ObservableKind xy2() { return {Tag::kXY2, 1, 1.0, 1.0}; }
  static ObservableKind xy2_cross(double q_ref) { return {Tag::kXY2Cross, 1, 1.0, q_ref}; }
  static ObservableKind bracket(int k1, double p_ref, double q_ref) {
    return {Tag::kBracket, k1, p_ref, q_ref};
  }
  static ObservableKind const_one(int k1) { return {Tag::kConstOne, k1, 1.0, 1.0}; }
};

// Self-normalized Phi weights over the N_k draws of U_k at the node addressed
// by `node` (which pins levels r+1..k+1):
//   w_j = exp((m_k/m_{k-1}) log zeta_{k-1}^{(j)} - log zeta_k) / N_k.
// Sums to 1 up to rounding.
std::vector<double> phi_weight(const LiftingSchedule& schedule, const IndexedSets& sets,
                               double beta, double s, double t, const SampleTree& tree,
                               int k, const NodeAddress& node);

// Nested-MC estimate of E_{G,U_{r+1}} <observable> under the matching gamma
// measure. For kBracket/kConstOne, `k1` selects gamma_{k1}: the two replica
// chains share the Phi weights of levels r..k1 and run independent inner
// subtrees at levels k1-1..1.
Estimate gibbs_average(const ObservableKind& kind, int k1, const LiftingSchedule& schedule,
                       const IndexedSets& sets, double beta, double s, double t,
                       const EstimatorConfig& config, int threads = 0);

namespace detail_gibbs {

struct OuterValues {
  std::vector<double> values;
  std::uint64_t bracket_samples = 0;
  std::uint64_t bracket_violations = 0;
};

struct GibbsOptions {
  bool swap_replica_tags = false;  // replica-symmetry test hook
};

OuterValues gibbs_outer_values(const ObservableKind& kind, int k1,
                               const LiftingSchedule& schedule, const IndexedSets& sets,
                               double beta, double s, double t, const EstimatorConfig& config,
                               int threads, const GibbsOptions& options = {});

}  // namespace detail_gibbs

}  // namespace liftlab
