#include "pancolor/rng.hpp"

#include <cmath>

namespace pancolor {

namespace {

uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& word : s_) word = splitmix64(x);
}

uint64_t Rng::next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

int Rng::uniform_int(int lo, int hi) {
    const uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t draw;
    do {
        draw = next_u64();
    } while (draw >= limit);
    return lo + static_cast<int>(draw % span);
}

double Rng::normal() {
    // u1 in (0, 1] so the log is finite.
    const double u1 = 1.0 - next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

uint64_t Rng::mix(std::initializer_list<uint64_t> words) {
    uint64_t x = 0x6a09e667f3bcc909ULL;
    for (uint64_t word : words) {
        x ^= word + 0x9e3779b97f4a7c15ULL + (x << 6) + (x >> 2);
        (void)splitmix64(x);
    }
    uint64_t y = x;
    return splitmix64(y);
}

uint64_t Rng::hash_string(const char* str) {
    // FNV-1a.
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const char* p = str; *p; ++p) {
        h ^= static_cast<uint64_t>(static_cast<unsigned char>(*p));
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace pancolor
