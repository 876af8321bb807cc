// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rtnq/types.hpp"

namespace rtnq {

// A 2-D weight tensor stored as packed integer codes plus per-group scales.
//
// Codes are signed values in [qmin(bits), qmax(bits)] stored offset-binary
// (code + 2^(b-1)): 4-bit codes two per byte with the lower-index element in
// the low nibble, 8-bit codes one per byte. `layout` describes the code
// order inside `data`: row_major follows rows*cols, kernel_interleaved is the
// tile permutation produced by reshuffle() (zero-padded to whole tiles, so
// data then covers padded_rows * padded_cols codes).
//
// Scales are f32 in memory, one per (row, group), groups running along the
// input dimension (cols); scales are never permuted or padded by layout
// changes. Quantizing from floats rounds half away from zero (computed with
// a double-precision intermediate) and clamps to the code range; a group
// whose max |value| is 0 gets scale 1.0 and all-zero codes.
struct QuantTensor {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    BitWidth bits = BitWidth::b4;
    GroupSpec group;
    LayoutTag layout;
    std::vector<std::uint8_t> data;
    std::vector<float> scales;  // rows * group.groups_per_row(cols)

    std::int64_t groups_per_row() const { return group.groups_per_row(cols); }
    float scale_at(std::int64_t r, std::int64_t g) const {
        return scales[static_cast<std::size_t>(r * groups_per_row() + g)];
    }
    // Number of code slots held in `data` (includes interleave padding).
    std::int64_t stored_codes() const;
    std::int64_t padded_rows() const;
    std::int64_t padded_cols() const;
    // Signed code at logical position (r, c), any layout. Bounds-unchecked
    // convenience for tools and tests, not a kernel path.
    int code_at(std::int64_t r, std::int64_t c) const;
};

// S = max|r| / (2^(b-1) - 0.5), as f32; 1.0 for an all-zero group.
// Throws InvalidInputError on NaN/inf input or an empty group.
float compute_scale(std::span<const float> values, BitWidth bits);

// codes[i] = clamp(round_half_away(values[i] / scale), qmin, qmax).
std::vector<std::int8_t> quantize_group(std::span<const float> values, BitWidth bits,
                                        float scale);
// Convenience: computes the scale, then quantizes; returns it via out-param.
std::vector<std::int8_t> quantize_group(std::span<const float> values, BitWidth bits,
                                        float* scale_out);

// out[i] = codes[i] * scale. Throws CorruptDataError if any code is outside
// the declared bit-width's range.
std::vector<float> dequantize_group(std::span<const std::int8_t> codes, float scale,
                                    BitWidth bits);

// Whole-tensor quantization: independent groups of `group.g` along each row.
// Result is row_major packed. Rows are processed in parallel; results are
// identical for every worker count.
QuantTensor quantize_tensor(const FloatTensor& w, BitWidth bits, GroupSpec group);

// Exact elementwise codes * scale reconstruction, any layout (interleave
// padding is stripped).
FloatTensor dequantize_tensor(const QuantTensor& q);

// Codes of q in logical row-major order (layout resolved, padding stripped).
std::vector<std::int8_t> logical_codes(const QuantTensor& q);

}  // namespace rtnq
