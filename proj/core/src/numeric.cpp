#include "heightlab/numeric.hpp"

namespace heightlab {

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kLeaf = 8;
  if (values.size() <= kLeaf) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

std::uint64_t hash_mix(std::uint64_t key, std::uint64_t counter) {
  // splitmix64 finalizer applied to a keyed counter
  std::uint64_t z = key * 0x9E3779B97F4A7C15ull + counter + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  z += counter * 0xD6E8FEB86659FD93ull;
  z = (z ^ (z >> 32)) * 0xD6E8FEB86659FD93ull;
  z ^= z >> 32;
  return z;
}

double hash_uniform_signed(std::uint64_t key, std::uint64_t counter) {
  const std::uint64_t bits = hash_mix(key, counter) >> 11;  // 53 bits
  return static_cast<double>(bits) * 0x1.0p-52 - 1.0;
}

}  // namespace heightlab
