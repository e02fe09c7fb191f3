#pragma once

// Shared nested-estimator core for the partition ladder, the reweighted Gibbs
// averages and the derivative evaluators. Not installed; internal to the
// library.

#include <cstdint>
#include <span>
#include <vector>

#include "liftlab/environment.hpp"
#include "liftlab/matrix.hpp"
#include "liftlab/schedule.hpp"
#include "liftlab/sets.hpp"

namespace liftlab::detail {

// Geometry cached once per run: norms, squared norms and Gram matrices.
struct Geometry {
  const IndexedSets* sets = nullptr;
  int lx = 0, ly = 0, n = 0, m = 0;
  std::vector<double> xn, yn, xn2, yn2;
  Matrix xgram, ygram;

  explicit Geometry(const IndexedSets& s);

  // p_ref*|x_i||x_p| - x_p^T x_i and the y analogue.
  Matrix bracket_x(double p_ref) const;
  Matrix bracket_y(double q_ref) const;
};

// Field projections accumulated along a root-to-leaf path:
//   u4_sum, y_{i2}^T (sum u2[k]), (sum h[k])^T x_{i1}.
struct FieldState {
  double u4_sum = 0.0;
  std::vector<double> yu2;  // length ly
  std::vector<double> hx;   // length lx
};

// Scalar observables contracted against gamma_0 at a leaf.
enum class LeafObs {
  kConstOne,         // sum of gamma_0 weights (normalization witness)
  kXY2,              // <|x|^2 |y|^2>
  kXY2Cross,         // <|x|^2 (q_ref |y||y'| - y'^T y)>, two i2 replicas sharing i1
  kBracketCoupled,   // full two-replica bracket on the shared draw
};

struct ScalarObsSpec {
  LeafObs kind;
  double q_ref = 1.0;          // kXY2Cross
  const Matrix* bx = nullptr;  // kBracketCoupled
  const Matrix* by = nullptr;
};

struct RunParams {
  const LiftingSchedule* sched = nullptr;
  const Geometry* geo = nullptr;
  double beta = 0.0;
  double s = 0.0;
  double t = 0.0;
  std::uint64_t master = 0;
  std::vector<std::uint64_t> counts;  // counts[k] = draws of U_k, k = 1..r; slot 0 unused
  std::uint64_t n_outer = 0;
  StreamSalts salts;
  bool replica_independent = true;
  bool swap_replica_tags = false;  // test hook for the replica-symmetry check
};

RunParams make_run_params(const LiftingSchedule& sched, const Geometry& geo, double beta,
                          double s, double t, const EstimatorConfig& config);

// Counters for the pointwise bracket checks (criterion: zero violations when
// p_ref = q_ref = 1). Aggregated across walkers by the callers.
struct BracketStats {
  std::uint64_t samples = 0;
  std::uint64_t violations = 0;

  void merge(const BracketStats& other) {
    samples += other.samples;
    violations += other.violations;
  }
};

// One walker per thread. Walks the seed tree of a single outer node at a
// time; all draws are pure functions of (master seed, node address), so any
// partition of outer nodes over walkers yields identical values.
class Walker {
 public:
  explicit Walker(const RunParams& rp);

  // Draws (G, U_{r+1}) for outer node i and prepares the projections.
  void begin_outer(std::uint64_t outer_index);
  std::uint64_t outer_key() const { return outer_key_; }

  // log of the MC estimate of zeta_k under the current outer node, rooted at
  // `parent_key` with ancestor fields `state`. Level 1 <= k <= r.
  double log_zeta(int k, std::uint64_t parent_key, const FieldState& state);

  // Same recursion, also propagating Phi-weighted scalar observables.
  // Returns log zeta_k; obs_out receives the reweighted averages.
  double scalar_chain(int k, std::uint64_t parent_key, const FieldState& state,
                      std::span<const ScalarObsSpec> obs, std::span<double> obs_out);

  // Phi-weighted measure chain: gamma_out (size lx*ly) receives the
  // reweighted gamma_0 estimate; returns log zeta_k.
  double measure_chain(int k, std::uint64_t parent_key, const FieldState& state,
                       std::span<double> gamma_out);

  // Two-replica bracket average under gamma_{k1}; junction at level k1 with
  // independent replica subtrees below. For k1 in 2..r the chain above the
  // junction is Phi-weighted; k1 = r+1 is handled by the caller via
  // bracket_junction directly at the outer node.
  double bracket_chain(int k, int k1, std::uint64_t parent_key, const FieldState& state,
                       const Matrix& bx, const Matrix& by, double& value_out);

  // Junction body: two independent measure chains over levels k..1 under
  // node_key, contracted against (bx, by). Returns the contracted value;
  // log_zeta_sym receives the symmetrized log zeta_k estimate.
  double bracket_junction(int k, std::uint64_t node_key, const FieldState& state,
                          const Matrix& bx, const Matrix& by, double& log_zeta_sym);

  // Leaf quantities for the current path state (all levels drawn).
  double leaf_log_z(const FieldState& state);
  double leaf_scalars(const FieldState& state, std::span<const ScalarObsSpec> obs,
                      std::span<double> out);
  double leaf_gamma0(const FieldState& state, std::span<double> gamma_out);

  // Field state already including the outer level r+1.
  const FieldState& outer_state() const { return outer_state_; }

  // Draws U_k at `node_key` and accumulates projections onto `out`.
  void descend(int k, std::uint64_t node_key, const FieldState& parent, FieldState& out);

  static std::uint64_t outer_node_key(std::uint64_t master, std::uint64_t outer_index);
  static std::uint64_t child_key(std::uint64_t parent_key, int level, std::uint64_t index);
  std::uint64_t replica_key(std::uint64_t node_key, bool second) const;

  const BracketStats& bracket_stats() const { return bracket_stats_; }

  // Sample counting is meaningful only for sign-definite brackets
  // (p_ref = q_ref = 1); callers enable it for those runs.
  void set_bracket_tracking(bool on) { track_brackets_ = on; }

 private:
  void compute_beta_d0(const FieldState& state);
  double contract_pair(const double* ma, const double* mb, const Matrix& bx, const Matrix& by);

  const RunParams rp_;
  const Geometry& geo_;
  double sqrt_t_ = 0.0;
  double sqrt_1mt_ = 0.0;
  bool skip_coupled_ = false;    // t == 0: G and u4 never drawn
  bool skip_decoupled_ = false;  // t == 1: u2 and h never drawn

  std::uint64_t outer_key_ = 0;
  Matrix g_;       // m x n
  Matrix g_proj_;  // lx x ly of y^T G x
  FieldState outer_state_;

  // Reused leaf buffers.
  LevelScratch draw_;
  std::vector<double> bd0_;    // lx*ly exponents
  std::vector<double> log_c_;  // lx
  std::vector<double> srow_;   // lx
  std::vector<double> gamma_;  // lx*ly
  std::vector<double> cond_;   // ly
  std::vector<double> tmp_t_;  // lx*ly contraction scratch

  // Per-level recursion buffers. Depth-first traversal touches one node per
  // level at a time, so each chain kind owns one slot per level.
  std::vector<FieldState> child_state_;
  std::vector<std::vector<double>> lz_a_;
  std::vector<std::vector<double>> sc_a_, sc_vals_;
  std::vector<std::vector<double>> mc_a_, mc_vals_;
  std::vector<std::vector<double>> bc_a_, bc_vals_;
  std::vector<double> junction_a_, junction_b_;

  bool track_brackets_ = false;
  BracketStats bracket_stats_;
};

}  // namespace liftlab::detail
