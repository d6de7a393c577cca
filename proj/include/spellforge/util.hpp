#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <thread>
#include <vector>

namespace spellforge {

// Deterministic sub-seed derivation: results must not depend on scheduling, so
// every parallel task owns a generator seeded from (master, stream ids).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0) {
  // splitmix64 over the mixed words
  std::uint64_t x = master ^ (0x9E3779B97F4A7C15ULL * (a + 1)) ^
                    (0xBF58476D1CE4E5B9ULL * (b + 1));
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

using Rng = std::mt19937_64;

// Bounded draw independent of std::uniform_int_distribution internals.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Fisher-Yates with the portable draw above.
template <typename T>
void shuffle_portable(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[uniform_below(rng, i)]);
}

// Static partition of [0, n) across worker threads. Each task writes disjoint
// output slots, so results are schedule-independent.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// --threads flag with SPELLFORGE_THREADS fallback; 0 -> hardware concurrency.
int resolve_threads(int requested);

}  // namespace spellforge
