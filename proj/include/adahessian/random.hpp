#pragma once

// Deterministic random streams.
//
// Every stream is a std::mt19937_64 seeded through std::seed_seq. Both are
// fully specified by the C++ standard, so the raw 64-bit output is identical
// on every conforming platform. The library never uses the <random>
// distribution classes (their algorithms are implementation-defined); all
// derived draws below are computed from raw words.

#include "adahessian/types.hpp"

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <vector>

namespace adahessian {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : Rng({seed}) {}

    // Independent stream for a tuple of keys, e.g. {seed, tag, iteration}.
    Rng(std::initializer_list<std::uint64_t> keys) {
        std::vector<std::uint32_t> words;
        words.reserve(keys.size() * 2);
        for (std::uint64_t k : keys) {
            words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
            words.push_back(static_cast<std::uint32_t>(k >> 32));
        }
        std::seed_seq seq(words.begin(), words.end());
        engine_.seed(seq);
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; the second variate is discarded to keep the stream simple.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Uniform integer in [0, n) by rejection, no modulo bias.
    std::uint64_t below(std::uint64_t n) {
        require(n > 0, "Rng::below: n must be positive");
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

private:
    std::mt19937_64 engine_;
};

// Stream tags so that data generation, batching and probing never share draws.
enum class StreamTag : std::uint64_t {
    data = 0x64617461,
    init = 0x696e6974,
    batch = 0x62617463,
    probe = 0x70726f62,
    verify = 0x76657269,
};

inline Rng make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t counter = 0) {
    return Rng({seed, static_cast<std::uint64_t>(tag), counter});
}

}  // namespace adahessian
