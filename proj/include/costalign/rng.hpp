#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace costalign {

using Rng = std::mt19937_64;

/// Stage-keyed seed derivation: each named stage gets an independent stream
/// from one global seed, so inserting a stage never shifts another's draws.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage);

inline Rng make_rng(std::uint64_t seed, std::string_view stage) { return Rng(derive_seed(seed, stage)); }

}  // namespace costalign
