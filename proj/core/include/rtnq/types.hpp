// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "rtnq/error.hpp"

namespace rtnq {

// Storage widths supported by the integer grid.
enum class BitWidth : std::uint8_t { b4 = 4, b8 = 8 };

constexpr int bit_count(BitWidth b) { return static_cast<int>(b); }
constexpr int qmin(BitWidth b) { return -(1 << (bit_count(b) - 1)); }       // -8 / -128
constexpr int qmax(BitWidth b) { return (1 << (bit_count(b) - 1)) - 1; }    //  7 /  127

// Denominator of the symmetric scale: 2^(b-1) - 0.5, i.e. 7.5 and 127.5.
constexpr float scale_divisor(BitWidth b) {
    return static_cast<float>(1 << (bit_count(b) - 1)) - 0.5f;
}

// Quantization group geometry along the input (column) dimension.
// g must be a power of two. By default a row length that is not a multiple of
// g is an error; allow_ragged permits one short trailing group per row.
struct GroupSpec {
    std::int64_t g = 128;
    bool allow_ragged = false;

    std::int64_t groups_per_row(std::int64_t cols) const {
        if (g <= 0 || (g & (g - 1)) != 0)
            throw InvalidInputError("group size must be a positive power of two");
        if (cols % g != 0 && !allow_ragged)
            throw ShapeError("row length " + std::to_string(cols) +
                             " is not a multiple of group size " + std::to_string(g) +
                             " (ragged groups are disabled)");
        return (cols + g - 1) / g;
    }

    bool operator==(const GroupSpec&) const = default;
};

// The four per-layer linear modules of the reference transformer block.
// Numbering follows the conventional attention/FFN split: 1 and 2 live in
// attention, 3 and 4 in the feed-forward network.
enum class ModuleId : std::uint8_t {
    qkv_proj = 1,       // fused query/key/value projection
    attn_out_proj = 2,  // attention output projection
    ffn_up = 3,         // fused up/gate projection (SiLU-gated)
    ffn_down = 4,       // down projection
};

constexpr int kModuleCount = 4;

// All four module ids in storage order.
constexpr ModuleId kAllModules[kModuleCount] = {
    ModuleId::qkv_proj, ModuleId::attn_out_proj, ModuleId::ffn_up, ModuleId::ffn_down};

// Zero-based storage slot of a module id.
constexpr int module_index(ModuleId m) { return static_cast<int>(m) - 1; }

// Physical arrangement of quantized codes in memory or on disk.
//   row_major:          codes follow the logical rows*cols order.
//   kernel_interleaved: codes permuted into tile_rows x tile_cols tiles,
//                       column-major inside each tile, tiles row-major; the
//                       matrix is logically zero-padded up to whole tiles.
// The fused GEMM consumes kernel_interleaved so one tile column's nibbles are
// contiguous. Tile constants are fixed per build and recorded in checkpoints.
struct LayoutTag {
    enum class Kind : std::uint8_t { row_major = 0, kernel_interleaved = 1 };

    Kind kind = Kind::row_major;
    std::int32_t tile_rows = 16;
    std::int32_t tile_cols = 4;

    static LayoutTag row_major() { return LayoutTag{}; }
    static LayoutTag kernel(std::int32_t tr = 16, std::int32_t tc = 4) {
        return LayoutTag{Kind::kernel_interleaved, tr, tc};
    }

    bool interleaved() const { return kind == Kind::kernel_interleaved; }
    bool operator==(const LayoutTag&) const = default;
};

// Dense row-major float matrix. Activations, reference weights and GEMM
// outputs all use this type; rows is the token/batch dimension for
// activations and the output-channel dimension for weights.
struct FloatTensor {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::vector<float> data;  // rows * cols, row-major

    FloatTensor() = default;
    FloatTensor(std::int64_t r, std::int64_t c)
        : rows(r), cols(c), data(static_cast<std::size_t>(r * c), 0.0f) {
        if (r < 0 || c < 0) throw ShapeError("negative tensor dimension");
    }

    float& at(std::int64_t r, std::int64_t c) {
        return data[static_cast<std::size_t>(r * cols + c)];
    }
    float at(std::int64_t r, std::int64_t c) const {
        return data[static_cast<std::size_t>(r * cols + c)];
    }
    std::int64_t size() const { return rows * cols; }
};

}  // namespace rtnq
