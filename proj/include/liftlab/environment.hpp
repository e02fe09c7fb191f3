#pragma once

#include <cstdint>
#include <vector>

#include "liftlab/matrix.hpp"
#include "liftlab/schedule.hpp"

namespace liftlab {

// Identifies one joint draw: (master seed, node id). Draws are pure functions
// of this pair, so environments replay bit-exactly.
struct SeedPath {
  std::uint64_t master = 0;
  std::uint64_t node = 0;
};

// Extra salts per component stream. Distinct salts give independent streams;
// equal salts replay identical draws. Used by the endpoint-decoupling checks.
struct StreamSalts {
  std::uint64_t u4 = 0;
  std::uint64_t u2 = 0;
  std::uint64_t h = 0;
  std::uint64_t g = 0;
};

// One joint draw of (G, u4[k], u2[k], h[k]) for k = 1..r+1 with the
// schedule-induced variances. Level arrays are indexed 1..r+1 (slot 0 unused).
// G belongs to the outermost level r+1 for resampling purposes.
struct Environment {
  int n = 0;
  int m_dim = 0;
  int r = 0;
  Matrix G;
  std::vector<double> u4;
  std::vector<std::vector<double>> u2;
  std::vector<std::vector<double>> h;
  SeedPath seed_path;
  StreamSalts salts;
  std::vector<std::uint64_t> level_salt;  // per-level resample salts, index 1..r+1

  // Components with zero scheduled variance are exactly 0 (copies of the
  // cached deviations make the environment self-contained for resampling).
  std::vector<double> sd4, sd2, sdh;
};

Environment sample_environment(const LiftingSchedule& schedule, int n, int m_dim,
                               SeedPath seed_path, StreamSalts salts = {});

// New environment identical except level k (and G when k = r+1) is redrawn
// under `new_sub_seed`. 1 <= k <= r+1.
Environment resample_level(const Environment& env, int k, std::uint64_t new_sub_seed);

namespace detail {

// Low-level draw primitives shared with the nested estimator. Each component
// stream hangs off its own derived key, so skipping one component never
// shifts another.
struct LevelScratch {
  double u4 = 0.0;
  std::vector<double> u2;
  std::vector<double> h;
};

std::uint64_t env_root_key(SeedPath seed_path);
std::uint64_t env_level_key(std::uint64_t root, int level, std::uint64_t salt);

// Draws the level-k scalar/vector fields into scratch (resized as needed).
// skip_u2h / skip_u4 leave those components exactly zero without consuming
// any randomness.
void draw_level_fields(std::uint64_t level_key, const std::vector<double>& sd4,
                       const std::vector<double>& sd2, const std::vector<double>& sdh,
                       int k, int n, int m_dim, const StreamSalts& salts,
                       LevelScratch& scratch, bool skip_u4 = false, bool skip_u2h = false);

void draw_g_matrix(std::uint64_t level_key, const StreamSalts& salts, Matrix& g);

}  // namespace detail

}  // namespace liftlab
