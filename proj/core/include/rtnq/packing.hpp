// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rtnq/quant.hpp"
#include "rtnq/types.hpp"

namespace rtnq {

// A flat sequence of quantized codes in storage form: offset-binary
// (code + 2^(b-1)), 4-bit values two per byte (lower index in the low
// nibble, odd tail padded with 0), 8-bit values one per byte.
// bytes.size() == packed_size(logical_len, bits) always.
struct PackedBuffer {
    BitWidth bits = BitWidth::b4;
    std::int64_t logical_len = 0;
    std::vector<std::uint8_t> bytes;
};

// ceil(len * bits / 8)
constexpr std::int64_t packed_size(std::int64_t len, BitWidth bits) {
    return (len * bit_count(bits) + 7) / 8;
}

PackedBuffer pack(std::span<const std::int8_t> codes, BitWidth bits);

// Exact inverse of pack. Throws CorruptDataError when bytes.size() does not
// match packed_size(logical_len, bits).
std::vector<std::int8_t> unpack(const PackedBuffer& buf);

// Storage position of logical element (r, c) under `tag` for a rows x cols
// matrix: identity for row_major; for kernel_interleaved, tiles of
// tile_rows x tile_cols are laid out row-major over a zero-padded
// ceil-to-tile grid, codes column-major inside each tile.
std::int64_t layout_index(const LayoutTag& tag, std::int64_t rows, std::int64_t cols,
                          std::int64_t r, std::int64_t c);

// Total code slots a rows x cols matrix occupies under `tag` (padded for
// kernel_interleaved).
std::int64_t layout_slots(const LayoutTag& tag, std::int64_t rows, std::int64_t cols);

// Re-lays out the codes of q into `to` (pure permutation plus zero padding;
// values, scales and shape are unchanged). Converting to the current layout
// is a copy. Kernel tiles are those of `to` (or of q.layout when going back
// to row_major).
QuantTensor reshuffle(const QuantTensor& q, const LayoutTag& to);

}  // namespace rtnq
