#pragma once

#include <cstdint>
#include <span>

namespace heightlab {

/// Pairwise (tree) summation. The association order depends only on the
/// length of the input, so results are reproducible regardless of how the
/// terms were produced.
double pairwise_sum(std::span<const double> values);

/// Counter-based hash RNG: maps (key, counter) to 64 uniformly mixed bits.
/// Stateless, so parallel and serial callers draw identical streams.
std::uint64_t hash_mix(std::uint64_t key, std::uint64_t counter);

/// Uniform double in [-1, 1) derived from hash_mix.
double hash_uniform_signed(std::uint64_t key, std::uint64_t counter);

}  // namespace heightlab
