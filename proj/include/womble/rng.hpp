#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace womble {

using Rng = std::mt19937_64;

// Every random stream in the pipeline is derived from one top-level seed plus a
// named stream and an index (chain, replicate, permutation, ...). The result
// depends only on those three values, never on scheduling.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0) noexcept;

inline Rng make_rng(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, stream, index));
}

}  // namespace womble
