#pragma once

#include <cstdint>
#include <random>

namespace cvarbai {

/// Deterministic RNG wrapper.  Uniform draws are produced from the raw 64-bit
/// stream directly so sequences do not depend on the standard library's
/// distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform on the open interval (0, 1).
    double uniform_open() {
        return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // modulo bias is < 2^-40 for the n used here (n << 2^24)
        return gen_() % n;
    }

  private:
    std::mt19937_64 gen_;
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

/// Independent reproducible stream for (seed, replication).  The pair is
/// hashed through two rounds of splitmix64 so neighbouring replications do
/// not share low-bit structure.
inline Rng seed_stream(std::uint64_t seed, std::uint64_t replication) {
    std::uint64_t h = detail::splitmix64(seed ^ 0x51c5fe9353fe5d1dULL);
    h = detail::splitmix64(h + detail::splitmix64(replication));
    return Rng(h);
}

}  // namespace cvarbai
