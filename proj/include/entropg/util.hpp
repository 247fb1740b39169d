#ifndef ENTROPG_UTIL_HPP
#define ENTROPG_UTIL_HPP

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

namespace entropg::util {

/// splitmix64 step; used to derive independent, well-separated seed streams
/// from (seed, stream id) pairs.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ stream));
}

/// Uniform double in [0, 1) with 53 random bits. Unlike
/// std::uniform_real_distribution, the mapping from engine output is fixed,
/// so results are reproducible across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller (deterministic given the engine state).
double standard_normal(std::mt19937_64& rng);

/// Writes content to a temp file in the target directory and renames it into
/// place, so interrupted runs never leave truncated files.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

std::string format_double(double v);

}  // namespace entropg::util

#endif
