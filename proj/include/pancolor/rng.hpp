#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace pancolor {

// Deterministic xoshiro256++ generator with fully specified samplers.
//
// The standard library distributions are implementation-defined, which would
// break the bit-reproducibility contracts (seeded pipelines and training runs
// must replay identically), so sampling is spelled out here. Streams for
// parallel work items are derived with mix(), which hashes a list of words
// into an independent seed; the state is four words and serializes as-is.
class Rng {
public:
    explicit Rng(uint64_t seed);
    explicit Rng(const std::array<uint64_t, 4>& state) : s_(state) {}

    uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double next_double();

    // Uniform integer in [lo, hi], inclusive, via rejection (unbiased).
    int uniform_int(int lo, int hi);

    // Standard normal via Box-Muller; the spare value is discarded so the
    // stream position never depends on call history.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    const std::array<uint64_t, 4>& state() const { return s_; }

    // Collapses a list of words into one seed word (splitmix64 chain).
    static uint64_t mix(std::initializer_list<uint64_t> words);
    static uint64_t hash_string(const char* str);

private:
    std::array<uint64_t, 4> s_;
};

}  // namespace pancolor
