#include "liftlab/environment.hpp"

#include <string>

#include "liftlab/error.hpp"
#include "liftlab/rng.hpp"

namespace liftlab {

namespace detail {

std::uint64_t env_root_key(SeedPath seed_path) {
  return rng::key_combine(rng::key_combine(seed_path.master, rng::kTagEnvRoot),
                          seed_path.node);
}

std::uint64_t env_level_key(std::uint64_t root, int level, std::uint64_t salt) {
  const std::uint64_t k =
      rng::key_combine(rng::key_combine(root, rng::kTagEnvLevel),
                       static_cast<std::uint64_t>(level));
  return rng::key_combine(k, salt);
}

void draw_level_fields(std::uint64_t level_key, const std::vector<double>& sd4,
                       const std::vector<double>& sd2, const std::vector<double>& sdh,
                       int k, int n, int m_dim, const StreamSalts& salts,
                       LevelScratch& scratch, bool skip_u4, bool skip_u2h) {
  scratch.u2.assign(static_cast<std::size_t>(m_dim), 0.0);
  scratch.h.assign(static_cast<std::size_t>(n), 0.0);
  scratch.u4 = 0.0;

  if (!skip_u4 && sd4[k] != 0.0) {
    const std::uint64_t key = rng::key_combine(rng::key_combine(level_key, rng::kTagCompU4), salts.u4);
    scratch.u4 = sd4[k] * rng::std_normal(key, 0);
  }
  if (!skip_u2h) {
    if (sd2[k] != 0.0) {
      const std::uint64_t key = rng::key_combine(rng::key_combine(level_key, rng::kTagCompU2), salts.u2);
      for (int j = 0; j < m_dim; ++j) {
        scratch.u2[static_cast<std::size_t>(j)] =
            sd2[k] * rng::std_normal(key, static_cast<std::uint64_t>(j));
      }
    }
    if (sdh[k] != 0.0) {
      const std::uint64_t key = rng::key_combine(rng::key_combine(level_key, rng::kTagCompH), salts.h);
      for (int i = 0; i < n; ++i) {
        scratch.h[static_cast<std::size_t>(i)] =
            sdh[k] * rng::std_normal(key, static_cast<std::uint64_t>(i));
      }
    }
  }
}

void draw_g_matrix(std::uint64_t level_key, const StreamSalts& salts, Matrix& g) {
  const std::uint64_t key = rng::key_combine(rng::key_combine(level_key, rng::kTagCompG), salts.g);
  double* data = g.data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    data[i] = rng::std_normal(key, static_cast<std::uint64_t>(i));
  }
}

}  // namespace detail

namespace {

void fill_level(Environment& env, int k) {
  const std::uint64_t root = detail::env_root_key(env.seed_path);
  const std::uint64_t level_key = detail::env_level_key(root, k, env.level_salt[static_cast<std::size_t>(k)]);
  detail::LevelScratch scratch;
  detail::draw_level_fields(level_key, env.sd4, env.sd2, env.sdh, k, env.n, env.m_dim,
                            env.salts, scratch);
  env.u4[static_cast<std::size_t>(k)] = scratch.u4;
  env.u2[static_cast<std::size_t>(k)] = std::move(scratch.u2);
  env.h[static_cast<std::size_t>(k)] = std::move(scratch.h);
  if (k == env.r + 1) {
    detail::draw_g_matrix(level_key, env.salts, env.G);
  }
}

}  // namespace

Environment sample_environment(const LiftingSchedule& schedule, int n, int m_dim,
                               SeedPath seed_path, StreamSalts salts) {
  if (n < 1 || m_dim < 1) {
    fail(ErrorCode::kInvalidParams, "n and m_dim must be >= 1");
  }
  Environment env;
  env.n = n;
  env.m_dim = m_dim;
  env.r = schedule.r;
  env.seed_path = seed_path;
  env.salts = salts;
  env.sd4 = schedule.sd4;
  env.sd2 = schedule.sd2;
  env.sdh = schedule.sdh;
  const std::size_t levels = static_cast<std::size_t>(schedule.r) + 2;
  env.u4.assign(levels, 0.0);
  env.u2.assign(levels, {});
  env.h.assign(levels, {});
  env.level_salt.assign(levels, 0);
  env.G = Matrix(static_cast<std::size_t>(m_dim), static_cast<std::size_t>(n));
  for (int k = 1; k <= schedule.r + 1; ++k) fill_level(env, k);
  return env;
}

Environment resample_level(const Environment& env, int k, std::uint64_t new_sub_seed) {
  if (k < 1 || k > env.r + 1) {
    fail(ErrorCode::kLevelOutOfRange,
         "level " + std::to_string(k) + " outside 1..r+1 = 1.." + std::to_string(env.r + 1));
  }
  Environment out = env;
  out.level_salt[static_cast<std::size_t>(k)] = new_sub_seed;
  fill_level(out, k);
  return out;
}

}  // namespace liftlab
