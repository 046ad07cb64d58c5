#pragma once

#include <cstdint>

namespace orderspn {

// Applies ORDERSPN_THREADS (if set and positive) as the OpenMP thread cap.
// Returns the resulting maximum thread count.
int configure_threads_from_env();
void set_thread_count(int n);
int thread_count();

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of sub-stream `stream` of `seed`. Nearby seeds and streams give unrelated
// results, unlike splitmix64(seed + stream).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream ^ 0x632be59bd9b4e019ULL));
}

}  // namespace orderspn
