#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace sponge {

// Derives an independent seed for a named stream (epoch shuffles, poison
// masks, weight init) so consumers never share draws.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Deterministic random source. All distributions are implemented by hand on
// top of mt19937_64 because the standard library's distribution objects are
// implementation-defined and would break bit-exact reproducibility.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; pairs are cached.
    double normal();

    // Uniform index in [0, n) by rejection, no modulo bias.
    std::size_t index(std::size_t n);

    // Fisher-Yates, deterministic given engine state.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace sponge
