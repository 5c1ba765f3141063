#pragma once

#include <cstdint>

#include "skipgp/types.hpp"

namespace skipgp {

// Derives an independent stream seed from a base seed and a stream id
// (splitmix64 finalizer). All randomness in the library goes through explicit
// seeds; nothing reads the clock.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

Vector standard_normal(Index n, std::uint64_t seed);

// Standard normal vector scaled to unit Euclidean length.
Vector unit_normal_probe(Index n, std::uint64_t seed);

}  // namespace skipgp
