#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "liftlab/matrix.hpp"
#include "liftlab/sets.hpp"

namespace liftlab {

enum class GroundStateSign { kPos, kNeg };

enum class ModelKind {
  kHopfieldPos,
  kHopfieldNeg,
  kLittlePos,
  kLittleNeg,
  kPercSpherical,
  kPercBinary,
};

// One disorder instance of a model in the proportional regime alpha = m/n.
struct ModelInstance {
  ModelKind kind = ModelKind::kHopfieldPos;
  int n = 0;
  int m_dim = 0;
  Matrix G;
  double alpha = 0.0;

  static ModelInstance make(ModelKind kind, int n, int m_dim, std::uint64_t seed);

  // Exact (or, for the spherical perceptron, best-found heuristic) ground
  // state value of the instance.
  double ground_state() const;
  bool ground_state_is_heuristic() const { return kind == ModelKind::kPercSpherical; }
};

// All 2^n sign vectors scaled by 1/sqrt(n); every member has unit norm.
// n <= 20 (enumeration cap).
std::vector<std::vector<double>> hypercube_set(int n);

// `count` unit vectors uniform on the sphere (normalized Gaussians); with
// positive_orthant the componentwise absolute values are taken.
std::vector<std::vector<double>> sphere_set(int dim, int count, bool positive_orthant,
                                            std::uint64_t seed);

// max (pos) / min (neg) over x in {-1/sqrt(n), 1/sqrt(n)}^n of |Gx|_2 / sqrt(n),
// exact enumeration. n <= 20.
double hopfield_ground_state(const Matrix& g, GroundStateSign sign);

// max/min over the hypercube of |Gx|_1 / sqrt(n m); the inner maximization
// over y in {+-1/sqrt(m)}^m is carried out analytically.
double little_ground_state(const Matrix& g, GroundStateSign sign);

enum class PercDomain { kSphereAnalytic, kBinary };

struct PercResult {
  double value = 0.0;
  bool heuristic = false;  // set for the non-convex sphere minimization
};

// min over the x domain of |(Gx)_+|_2 / sqrt(n). BINARY enumerates the
// hypercube (n <= 20); SPHERE_ANALYTIC runs multi-start projected descent on
// the unit sphere and flags the result as best-effort.
PercResult perceptron_minmax(const Matrix& g, PercDomain domain, std::uint64_t seed = 1);

enum class SweepTarget { kSphere, kSpherePos, kHypercubeY };

struct SweepConfig {
  std::uint64_t seed = 0;
  int instances = 4;          // independent G draws
  double s = 1.0;
  bool zero_external_field = true;  // drop the u4 field so the target matches
  double p0q0 = 1.0;                // variance of the total u4 field otherwise
  SweepTarget target = SweepTarget::kSpherePos;
};

struct GroundStateRow {
  std::string model;
  int n = 0;
  int m_dim = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double estimate = 0.0;  // (1/(beta |s| sqrt(n))) log sum_i1 (sum_i2 e^{beta D0})^s
  double target = 0.0;    // exact enumeration over the continuous Y counterpart
  double gap = 0.0;
  double envelope = 0.0;     // log(l_x l_y) / (beta sqrt(n)), the soft-max bound
  double sampled_max = 0.0;  // max over the finite index pairs of D0 / sqrt(n)
  std::uint64_t seed = 0;
  bool sandwich_ok = true;  // per-instance log-sum-exp sandwich (s = 1 only)
};

// Plain (non-nested, t = 1) beta sweep of the log-partition quantity against
// the matching ground-state oracle, one row per (beta, instance).
std::vector<GroundStateRow> beta_sweep_ground_state(const IndexedSets& sets,
                                                    const std::vector<double>& betas,
                                                    const SweepConfig& config);

std::string ground_state_csv(const std::vector<GroundStateRow>& rows);

}  // namespace liftlab
