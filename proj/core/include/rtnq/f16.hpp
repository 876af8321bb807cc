// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace rtnq {

// IEEE 754 binary16 conversions. Scales are held as f32 in memory but stored
// as f16 in checkpoints; both directions are exact-or-correctly-rounded so a
// value that survived one store/load cycle re-stores to identical bits.

// Round-to-nearest-even f32 -> f16, with subnormal and inf/nan handling.
std::uint16_t f32_to_f16(float value);

// Exact widening f16 -> f32.
float f16_to_f32(std::uint16_t bits);

}  // namespace rtnq
