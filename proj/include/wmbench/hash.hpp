#pragma once

#include <cstdint>
#include <string_view>

namespace wmbench {

// SplitMix64 finalizer. Full-avalanche mix used for all keyed hashing in the
// toolkit (green-list PRF, key-sequence entries, seed derivation).
constexpr uint64_t avalanche(uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// Keyed two-input combine with avalanche on the result.
constexpr uint64_t mix2(uint64_t a, uint64_t b) {
    return avalanche(a ^ (avalanche(b + kGolden) + (a << 6) + (a >> 2)));
}

constexpr uint64_t mix3(uint64_t a, uint64_t b, uint64_t c) {
    return mix2(mix2(a, b), c);
}

// Top 53 bits -> double in [0, 1).
constexpr double u64_to_unit(uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// FNV-1a over bytes, for hashing token strings and n-grams.
constexpr uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Deterministic counter-based RNG (SplitMix64 stream).
// Copyable; every generation path owns its own instance.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += kGolden;
        return avalanche(state_);
    }

    // Uniform double in [0, 1).
    double next_unit() { return u64_to_unit(next_u64()); }

    // Uniform integer in [0, bound). bound must be > 0.
    uint64_t next_below(uint64_t bound) { return next_u64() % bound; }

    uint64_t state() const { return state_; }

private:
    uint64_t state_;
};

} // namespace wmbench
