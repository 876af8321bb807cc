// SPDX-License-Identifier: Apache-2.0
#include "rtnq/packing.hpp"

namespace rtnq {

PackedBuffer pack(std::span<const std::int8_t> codes, BitWidth bits) {
    const int lo = qmin(bits), hi = qmax(bits);
    for (std::int8_t c : codes)
        if (c < lo || c > hi)
            throw InvalidInputError("code " + std::to_string(int(c)) +
                                    " outside the " + std::to_string(bit_count(bits)) +
                                    "-bit range");

    PackedBuffer buf;
    buf.bits = bits;
    buf.logical_len = static_cast<std::int64_t>(codes.size());
    buf.bytes.assign(static_cast<std::size_t>(packed_size(buf.logical_len, bits)), 0);

    if (bits == BitWidth::b8) {
        for (std::size_t i = 0; i < codes.size(); ++i)
            buf.bytes[i] = static_cast<std::uint8_t>(int(codes[i]) + 128);
        return buf;
    }
    for (std::size_t i = 0; i < codes.size(); ++i) {
        const std::uint8_t u = static_cast<std::uint8_t>(int(codes[i]) + 8);
        if (i & 1)
            buf.bytes[i >> 1] |= static_cast<std::uint8_t>(u << 4);
        else
            buf.bytes[i >> 1] = u;  // low nibble first; odd tail keeps high nibble 0
    }
    return buf;
}

std::vector<std::int8_t> unpack(const PackedBuffer& buf) {
    if (buf.logical_len < 0 ||
        static_cast<std::int64_t>(buf.bytes.size()) != packed_size(buf.logical_len, buf.bits))
        throw CorruptDataError("packed buffer is " + std::to_string(buf.bytes.size()) +
                               " bytes; expected " +
                               std::to_string(packed_size(buf.logical_len, buf.bits)) +
                               " for " + std::to_string(buf.logical_len) + " codes at " +
                               std::to_string(bit_count(buf.bits)) + " bits");

    std::vector<std::int8_t> codes(static_cast<std::size_t>(buf.logical_len));
    if (buf.bits == BitWidth::b8) {
        for (std::size_t i = 0; i < codes.size(); ++i)
            codes[i] = static_cast<std::int8_t>(int(buf.bytes[i]) - 128);
        return codes;
    }
    for (std::size_t i = 0; i < codes.size(); ++i) {
        const std::uint8_t byte = buf.bytes[i >> 1];
        const int u = (i & 1) ? (byte >> 4) : (byte & 0x0F);
        codes[i] = static_cast<std::int8_t>(u - 8);
    }
    return codes;
}

std::int64_t layout_index(const LayoutTag& tag, std::int64_t rows, std::int64_t cols,
                          std::int64_t r, std::int64_t c) {
    if (r < 0 || r >= rows || c < 0 || c >= cols)
        throw ShapeError("layout index out of bounds");
    if (!tag.interleaved()) return r * cols + c;
    const std::int64_t tr = tag.tile_rows, tc = tag.tile_cols;
    const std::int64_t tiles_per_row = (cols + tc - 1) / tc;
    const std::int64_t tile = (r / tr) * tiles_per_row + c / tc;
    return tile * tr * tc + (c % tc) * tr + r % tr;
}

std::int64_t layout_slots(const LayoutTag& tag, std::int64_t rows, std::int64_t cols) {
    if (!tag.interleaved()) return rows * cols;
    const std::int64_t pr = (rows + tag.tile_rows - 1) / tag.tile_rows * tag.tile_rows;
    const std::int64_t pc = (cols + tag.tile_cols - 1) / tag.tile_cols * tag.tile_cols;
    return pr * pc;
}

QuantTensor reshuffle(const QuantTensor& q, const LayoutTag& to) {
    if (to == q.layout) return q;
    if (to.interleaved() && (to.tile_rows <= 0 || to.tile_cols <= 0))
        throw InvalidInputError("kernel tile dimensions must be positive");

    // Pure permutation over logical codes; padding slots stay 0.
    auto codes = logical_codes(q);
    std::vector<std::int8_t> placed(static_cast<std::size_t>(layout_slots(to, q.rows, q.cols)), 0);
    for (std::int64_t r = 0; r < q.rows; ++r)
        for (std::int64_t c = 0; c < q.cols; ++c)
            placed[static_cast<std::size_t>(layout_index(to, q.rows, q.cols, r, c))] =
                codes[static_cast<std::size_t>(r * q.cols + c)];

    QuantTensor out = q;
    out.layout = to;
    out.data = pack(placed, q.bits).bytes;
    return out;
}

}  // namespace rtnq
