#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace pcho {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent substream seeds.
std::uint64_t mix64(std::uint64_t x);

// Seed for the substream identified by `path` under `master`. Distinct paths give
// statistically independent streams, so adding a trajectory or node never shifts
// the draws of another.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(master, path));
}

// 64-bit FNV-1a. Stable across platforms; used for config and data hashes.
class Fnv1a {
 public:
  void update(const void* data, std::size_t size);
  void update(std::string_view s) { update(s.data(), s.size()); }
  void update(double v) { update(&v, sizeof v); }
  void update(std::uint64_t v) { update(&v, sizeof v); }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t fnv1a(std::string_view s);

}  // namespace pcho
