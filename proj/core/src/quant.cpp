// SPDX-License-Identifier: Apache-2.0
#include "rtnq/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rtnq/packing.hpp"
#include "rtnq/threading.hpp"

namespace rtnq {

namespace {

// Nibble/byte accessors over packed storage.
inline int stored_code(const std::vector<std::uint8_t>& bytes, BitWidth bits,
                       std::int64_t idx) {
    if (bits == BitWidth::b8) return int(bytes[static_cast<std::size_t>(idx)]) - 128;
    const std::uint8_t byte = bytes[static_cast<std::size_t>(idx >> 1)];
    const int u = (idx & 1) ? (byte >> 4) : (byte & 0x0F);
    return u - 8;
}

inline std::int8_t quantize_one(float v, float scale, int lo, int hi) {
    // Double-precision intermediate: a pure-f32 division can misround values
    // that land within ~2^-17 of a .5 tie, breaching the S/2 error bound.
    const double q = std::round(double(v) / double(scale));
    return static_cast<std::int8_t>(std::clamp(q, double(lo), double(hi)));
}

}  // namespace

std::int64_t QuantTensor::padded_rows() const {
    if (!layout.interleaved()) return rows;
    return (rows + layout.tile_rows - 1) / layout.tile_rows * layout.tile_rows;
}

std::int64_t QuantTensor::padded_cols() const {
    if (!layout.interleaved()) return cols;
    return (cols + layout.tile_cols - 1) / layout.tile_cols * layout.tile_cols;
}

std::int64_t QuantTensor::stored_codes() const { return padded_rows() * padded_cols(); }

int QuantTensor::code_at(std::int64_t r, std::int64_t c) const {
    return stored_code(data, bits, layout_index(layout, rows, cols, r, c));
}

float compute_scale(std::span<const float> values, BitWidth bits) {
    if (values.empty()) throw InvalidInputError("cannot compute a scale for an empty group");
    float absmax = 0.0f;
    for (float v : values) {
        const float a = std::fabs(v);
        if (!(a <= std::numeric_limits<float>::max()))
            throw InvalidInputError("non-finite value in quantization group");
        absmax = std::max(absmax, a);
    }
    if (absmax == 0.0f) return 1.0f;
    // The f32 division is rounded upward (still within 1 ulp of the
    // nearest-rounded quotient). A downward-rounded scale would put the max
    // element at absmax/S up to (2^(b-1)-0.5)*(1+2^-24), whose clamped error
    // exceeds S/2 by ~2^(b-1)*2^-24 relative; rounding up keeps
    // absmax/S <= 2^(b-1)-0.5 so every element stays within half a step.
    const double sd = double(absmax) / double(scale_divisor(bits));
    float s = static_cast<float>(sd);
    if (double(s) < sd) s = std::nextafterf(s, std::numeric_limits<float>::infinity());
    return s;
}

std::vector<std::int8_t> quantize_group(std::span<const float> values, BitWidth bits,
                                        float scale) {
    const int lo = qmin(bits), hi = qmax(bits);
    std::vector<std::int8_t> codes(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        codes[i] = quantize_one(values[i], scale, lo, hi);
    return codes;
}

std::vector<std::int8_t> quantize_group(std::span<const float> values, BitWidth bits,
                                        float* scale_out) {
    const float s = compute_scale(values, bits);
    if (scale_out) *scale_out = s;
    return quantize_group(values, bits, s);
}

std::vector<float> dequantize_group(std::span<const std::int8_t> codes, float scale,
                                    BitWidth bits) {
    const int lo = qmin(bits), hi = qmax(bits);
    std::vector<float> out(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i] < lo || codes[i] > hi)
            throw CorruptDataError("code " + std::to_string(int(codes[i])) +
                                   " outside the " + std::to_string(bit_count(bits)) +
                                   "-bit range");
        out[i] = float(codes[i]) * scale;
    }
    return out;
}

QuantTensor quantize_tensor(const FloatTensor& w, BitWidth bits, GroupSpec group) {
    if (static_cast<std::int64_t>(w.data.size()) != w.rows * w.cols)
        throw ShapeError("tensor data size does not match rows*cols");
    const std::int64_t gpr = group.groups_per_row(w.cols);  // validates g and divisibility

    QuantTensor q;
    q.rows = w.rows;
    q.cols = w.cols;
    q.bits = bits;
    q.group = group;
    q.layout = LayoutTag::row_major();
    q.scales.assign(static_cast<std::size_t>(w.rows * gpr), 0.0f);

    std::vector<std::int8_t> codes(static_cast<std::size_t>(w.rows * w.cols));
    const int lo = qmin(bits), hi = qmax(bits);

    // Any exception inside workers (e.g. a NaN) must surface on the caller.
    std::exception_ptr failure = nullptr;
    parallel_for(w.rows, std::max<std::int64_t>(1, 65536 / std::max<std::int64_t>(1, w.cols)),
                 [&](std::int64_t r0, std::int64_t r1) {
                     try {
                         for (std::int64_t r = r0; r < r1; ++r) {
                             const float* row = w.data.data() + r * w.cols;
                             for (std::int64_t g = 0; g < gpr; ++g) {
                                 const std::int64_t c0 = g * group.g;
                                 const std::int64_t len = std::min(group.g, w.cols - c0);
                                 const float s = compute_scale({row + c0, std::size_t(len)}, bits);
                                 q.scales[static_cast<std::size_t>(r * gpr + g)] = s;
                                 std::int8_t* dst = codes.data() + r * w.cols + c0;
                                 for (std::int64_t i = 0; i < len; ++i)
                                     dst[i] = quantize_one(row[c0 + i], s, lo, hi);
                             }
                         }
                     } catch (...) {
                         failure = std::current_exception();
                     }
                 });
    if (failure) std::rethrow_exception(failure);

    q.data = pack(codes, bits).bytes;
    return q;
}

FloatTensor dequantize_tensor(const QuantTensor& q) {
    FloatTensor out(q.rows, q.cols);
    const std::int64_t gpr = q.groups_per_row();
    const std::int64_t g = q.group.g;

    if (!q.layout.interleaved()) {
        for (std::int64_t r = 0; r < q.rows; ++r) {
            float* dst = out.data.data() + r * q.cols;
            const float* srow = q.scales.data() + r * gpr;
            for (std::int64_t c = 0; c < q.cols; ++c)
                dst[c] = float(stored_code(q.data, q.bits, r * q.cols + c)) * srow[c / g];
        }
        return out;
    }

    const std::int64_t tr = q.layout.tile_rows, tc = q.layout.tile_cols;
    const std::int64_t tiles_per_row = q.padded_cols() / tc;
    for (std::int64_t r = 0; r < q.rows; ++r) {
        float* dst = out.data.data() + r * q.cols;
        const float* srow = q.scales.data() + r * gpr;
        const std::int64_t tile_r = r / tr, in_r = r % tr;
        for (std::int64_t c = 0; c < q.cols; ++c) {
            const std::int64_t idx =
                (tile_r * tiles_per_row + c / tc) * tr * tc + (c % tc) * tr + in_r;
            dst[c] = float(stored_code(q.data, q.bits, idx)) * srow[c / g];
        }
    }
    return out;
}

std::vector<std::int8_t> logical_codes(const QuantTensor& q) {
    std::vector<std::int8_t> codes(static_cast<std::size_t>(q.rows * q.cols));
    for (std::int64_t r = 0; r < q.rows; ++r)
        for (std::int64_t c = 0; c < q.cols; ++c)
            codes[static_cast<std::size_t>(r * q.cols + c)] =
                static_cast<std::int8_t>(q.code_at(r, c));
    return codes;
}

}  // namespace rtnq
