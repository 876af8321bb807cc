// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace rtnq {

// Deterministic, platform-independent PRNG used for synthetic checkpoints and
// eval inputs. The algorithm is pinned so a (seed, stream) pair reproduces the
// same bytes on any build: xoshiro256** (Blackman/Vigna), state initialized by
// four outputs of splitmix64(seed ^ stream * 0x9E3779B97F4A7C15).
//
// Streams keep tensors independent: stream = (kind << 32) | index, with kind 0
// for weights (index = layer * 4 + module_slot) and kind 1 for eval inputs.

struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
};

class Xoshiro256ss {
public:
    Xoshiro256ss(std::uint64_t seed, std::uint64_t stream) {
        SplitMix64 sm(seed ^ (stream * 0x9E3779B97F4A7C15ull));
        for (auto& w : s_) w = sm.next();
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform float in [-1, 1): top 24 bits -> lattice of step 2^-23, exact in f32.
    float next_unit() {
        const std::uint32_t u24 = static_cast<std::uint32_t>(next() >> 40);
        return static_cast<float>(u24) * (1.0f / 8388608.0f) - 1.0f;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

// Stream id helpers (see header comment).
constexpr std::uint64_t weight_stream(std::int64_t layer, int module_slot) {
    return static_cast<std::uint64_t>(layer) * 4u + static_cast<std::uint64_t>(module_slot);
}
constexpr std::uint64_t input_stream(std::int64_t index) {
    return (1ull << 32) | static_cast<std::uint64_t>(index);
}

}  // namespace rtnq
