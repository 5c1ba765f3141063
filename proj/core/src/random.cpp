#include "skipgp/random.hpp"

#include <random>

namespace skipgp {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Vector standard_normal(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(n);
  for (Index i = 0; i < n; ++i) out[i] = normal(rng);
  return out;
}

Vector unit_normal_probe(Index n, std::uint64_t seed) {
  Vector z = standard_normal(n, seed);
  const double norm = z.norm();
  // A zero draw from mt19937 + Box-Muller is not reachable in practice, but
  // fall back to e_0 rather than dividing by zero.
  if (norm == 0.0) {
    z.setZero();
    z[0] = 1.0;
    return z;
  }
  return z / norm;
}

}  // namespace skipgp
