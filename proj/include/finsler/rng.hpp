#pragma once

// Deterministic random source.  We avoid std:: distributions on purpose:
// their output is implementation-defined, and report byte-stability across
// toolchains is part of the contract.  splitmix64 is plenty for sampling.

#include <cstdint>

namespace finsler {

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // derive an independent stream (stable under reordering of consumers)
    Rng fork(std::uint64_t salt) {
        return Rng(next_u64() ^ (0xa0761d6478bd642full * (salt + 1)));
    }

  private:
    std::uint64_t state_;
};

}  // namespace finsler
