#pragma once

#include <cstdint>

namespace liftlab::rng {

// Counter-mode generator built on 64-bit finalizer mixing. Every draw is a
// pure function of (key, counter), so any node of a nested sample tree can be
// reconstructed from its address without storing state.

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

// Derives a child key from (key, salt); used to address levels, node indices,
// components and replica branches in the seed tree.
inline std::uint64_t key_combine(std::uint64_t key, std::uint64_t salt) {
  return mix64(mix64(key + kGolden) ^ mix64(salt ^ 0xD1B54A32D192ED03ull));
}

inline std::uint64_t bits(std::uint64_t key, std::uint64_t counter) {
  return mix64(key + (counter + 1) * kGolden);
}

// Uniform on the open interval (0,1); never returns an endpoint.
inline double u01(std::uint64_t key, std::uint64_t counter) {
  return (static_cast<double>(bits(key, counter) >> 11) + 0.5) * 0x1.0p-53;
}

// Inverse of the standard normal CDF (Wichura's AS 241, double precision).
double normal_icdf(double p);

inline double std_normal(std::uint64_t key, std::uint64_t counter) {
  return normal_icdf(u01(key, counter));
}

// Stream tags for key derivation. Distinct per role so that skipping or
// reseeding one component never shifts another component's draws.
enum : std::uint64_t {
  kTagOuterNode = 0x101,
  kTagLevelNode = 0x102,
  kTagEnvRoot = 0x103,
  kTagEnvLevel = 0x104,
  kTagReplicaA = 0x105,
  kTagReplicaB = 0x106,
  kTagCompU4 = 0x201,
  kTagCompU2 = 0x202,
  kTagCompH = 0x203,
  kTagCompG = 0x204,
  kTagInstance = 0x301,
};

}  // namespace liftlab::rng
