// SPDX-License-Identifier: Apache-2.0
#include "rtnq/f16.hpp"

#include <bit>

namespace rtnq {

std::uint16_t f32_to_f16(float value) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
    const std::uint32_t sign = (bits >> 16) & 0x8000u;
    const std::uint32_t abs = bits & 0x7FFFFFFFu;

    if (abs >= 0x7F800000u) {  // inf / nan
        const std::uint32_t mant = abs > 0x7F800000u ? 0x0200u : 0u;  // quiet nan
        return static_cast<std::uint16_t>(sign | 0x7C00u | mant);
    }
    if (abs >= 0x47800000u)  // >= 65536: overflows f16, round to inf
        return static_cast<std::uint16_t>(sign | 0x7C00u);

    if (abs < 0x38800000u) {  // < 2^-14: f16 subnormal or zero
        if (abs < 0x33000000u)  // < 2^-25: underflows to zero even after rounding
            return static_cast<std::uint16_t>(sign);
        // Shift the 24-bit significand down so the unit is 2^-24 (one f16
        // subnormal step), rounding the dropped bits to nearest-even.
        const int shift = 126 - static_cast<int>(abs >> 23);  // 14..24
        const std::uint32_t mant = (abs & 0x007FFFFFu) | 0x00800000u;
        std::uint32_t out = mant >> shift;
        const std::uint32_t rem = mant & ((1u << shift) - 1u);
        const std::uint32_t half = 1u << (shift - 1);
        if (rem > half || (rem == half && (out & 1u))) ++out;
        return static_cast<std::uint16_t>(sign | out);
    }

    // Normal range: rebias exponent, round mantissa to nearest-even. A carry
    // out of the mantissa bumps the exponent; from 65504 it lands on inf,
    // which is the correct rounding for values at or above 65520.
    std::uint32_t out = (((abs >> 23) - 112u) << 10) | ((abs >> 13) & 0x3FFu);
    const std::uint32_t rem = abs & 0x1FFFu;
    if (rem > 0x1000u || (rem == 0x1000u && (out & 1u))) ++out;
    return static_cast<std::uint16_t>(sign | out);
}

float f16_to_f32(std::uint16_t h) {
    const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
    const std::uint32_t exp = (h >> 10) & 0x1Fu;
    const std::uint32_t mant = h & 0x3FFu;

    if (exp == 0x1Fu)  // inf / nan
        return std::bit_cast<float>(sign | 0x7F800000u | (mant << 13));
    if (exp == 0) {
        if (mant == 0) return std::bit_cast<float>(sign);
        // Subnormal: normalize into f32.
        int e = -1;
        std::uint32_t m = mant;
        do {
            ++e;
            m <<= 1;
        } while ((m & 0x400u) == 0);
        return std::bit_cast<float>(sign | ((113u - static_cast<std::uint32_t>(e) - 1u) << 23) |
                                    ((m & 0x3FFu) << 13));
    }
    return std::bit_cast<float>(sign | ((exp + 112u) << 23) | (mant << 13));
}

}  // namespace rtnq
