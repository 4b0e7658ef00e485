#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace fairhead {

// Seeded generator with distribution code written here rather than taken from
// <random>: the standard distributions are implementation-defined, and the
// experiment reports must be byte-identical on any toolchain. The engine itself
// (mt19937_64) is fully specified by the standard.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, bound), rejection-sampled so there is no modulo bias.
    std::uint64_t below(std::uint64_t bound);

    // Box-Muller; one draw per call, the sibling value is discarded.
    double normal();

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::span<T> xs) {
        for (std::size_t i = xs.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(below(i));
            std::swap(xs[i - 1], xs[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent stream seed from a base seed and a purpose tag, so
// that e.g. head initialization and sampling of one trial never share draws.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

}  // namespace fairhead
