// SPDX-License-Identifier: Apache-2.0
#include "rtnq/gemm.hpp"

#include <cmath>
#include <vector>

#include "rtnq/error.hpp"
#include "rtnq/threading.hpp"

namespace rtnq {
namespace {

void check_shapes(const FloatTensor& a, const QuantTensor& w) {
    if (a.cols != w.cols)
        throw ShapeError("activation width " + std::to_string(a.cols) +
                         " does not match weight input width " + std::to_string(w.cols));
    for (float v : a.data)
        if (!std::isfinite(v)) throw InvalidInputError("non-finite activation value");
}

// Dense m x k times k x rows(wf) with the shared accumulation contract:
// per output element, k ascending in blocks of `g`.
FloatTensor dense_blocked_gemm(const FloatTensor& a, const FloatTensor& wf, std::int64_t g) {
    const std::int64_t m = a.rows, k = a.cols, n = wf.rows;
    FloatTensor out(m, n);
    parallel_for(m * n, 4096, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t e = begin; e < end; ++e) {
            const std::int64_t i = e / n, j = e % n;
            const float* arow = a.data.data() + i * k;
            const float* wrow = wf.data.data() + j * k;
            float acc = 0.0f;
            for (std::int64_t k0 = 0; k0 < k; k0 += g) {
                const std::int64_t k1 = std::min(k0 + g, k);
                float block = 0.0f;
                for (std::int64_t kk = k0; kk < k1; ++kk) block += arow[kk] * wrow[kk];
                acc += block;
            }
            out.data[static_cast<std::size_t>(e)] = acc;
        }
    });
    return out;
}

}  // namespace

FloatTensor gemm_fused(const FloatTensor& a, const QuantTensor& w) {
    check_shapes(a, w);
    if (!w.layout.interleaved())
        throw ShapeError("fused GEMM requires the kernel_interleaved layout");

    const std::int64_t m = a.rows, k = a.cols, n = w.rows;
    const std::int64_t g = w.group.g;
    const std::int64_t gpr = w.groups_per_row();
    const std::int64_t tr = w.layout.tile_rows, tc = w.layout.tile_cols;
    const std::int64_t tiles_per_row = w.padded_cols() / tc;
    const std::uint8_t* bytes = w.data.data();
    const bool four = w.bits == BitWidth::b4;

    FloatTensor out(m, n);
    parallel_for(m * n, 2048, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t e = begin; e < end; ++e) {
            const std::int64_t i = e / n, j = e % n;
            const float* arow = a.data.data() + i * k;
            // For a fixed output row j the interleave collapses to a constant
            // stride: slot(k) = base + k * tile_rows.
            const std::int64_t base = (j / tr) * tiles_per_row * tr * tc + j % tr;
            const float* srow = w.scales.data() + j * gpr;
            float acc = 0.0f;
            for (std::int64_t g0 = 0; g0 < gpr; ++g0) {
                const std::int64_t k0 = g0 * g;
                const std::int64_t k1 = std::min(k0 + g, k);
                float block = 0.0f;
                if (four) {
                    for (std::int64_t kk = k0; kk < k1; ++kk) {
                        const std::int64_t slot = base + kk * tr;
                        const std::uint8_t byte = bytes[slot >> 1];
                        const int code =
                            int((slot & 1) ? (byte >> 4) : (byte & 0x0f)) - 8;
                        block += arow[kk] * float(code);
                    }
                } else {
                    for (std::int64_t kk = k0; kk < k1; ++kk) {
                        block += arow[kk] * float(int(bytes[base + kk * tr]) - 128);
                    }
                }
                acc += srow[g0] * block;
            }
            out.data[static_cast<std::size_t>(e)] = acc;
        }
    });
    return out;
}

FloatTensor gemm_dequant(const FloatTensor& a, const QuantTensor& w) {
    check_shapes(a, w);
    const FloatTensor wf = dequantize_tensor(w);
    return dense_blocked_gemm(a, wf, w.group.g);
}

FloatTensor gemm_auto(const FloatTensor& a, const QuantTensor& w, std::int64_t threshold,
                      GemmPath* chosen) {
    if (threshold < 1) throw InvalidInputError("dispatch threshold must be >= 1");
    if (!w.layout.interleaved())
        throw ShapeError("auto GEMM requires the kernel_interleaved layout");
    const GemmPath path =
        a.rows >= threshold ? GemmPath::dequant_first : GemmPath::fused;
    if (chosen) *chosen = path;
    return path == GemmPath::dequant_first ? gemm_dequant(a, w) : gemm_fused(a, w);
}

FloatTensor gemm_float(const FloatTensor& a, const FloatTensor& w, std::int64_t block) {
    if (a.cols != w.cols)
        throw ShapeError("activation width " + std::to_string(a.cols) +
                         " does not match weight input width " + std::to_string(w.cols));
    if (block < 1) throw InvalidInputError("accumulation block must be >= 1");
    for (float v : a.data)
        if (!std::isfinite(v)) throw InvalidInputError("non-finite activation value");
    return dense_blocked_gemm(a, w, block);
}

FloatTensor gemm_oracle(const FloatTensor& a, const QuantTensor& w) {
    check_shapes(a, w);
    const std::int64_t m = a.rows, k = a.cols, n = w.rows;

    // Exact dequantization into doubles: code * scale is a product of two
    // exactly converted values.
    const auto codes = logical_codes(w);
    std::vector<double> wd(static_cast<std::size_t>(n * k));
    const std::int64_t g = w.group.g;
    for (std::int64_t j = 0; j < n; ++j)
        for (std::int64_t kk = 0; kk < k; ++kk)
            wd[static_cast<std::size_t>(j * k + kk)] =
                double(codes[static_cast<std::size_t>(j * k + kk)]) *
                double(w.scale_at(j, kk / g));

    FloatTensor out(m, n);
    parallel_for(m, 1, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t i = begin; i < end; ++i) {
            for (std::int64_t j = 0; j < n; ++j) {
                double acc = 0.0;
                const float* arow = a.data.data() + i * k;
                const double* wrow = wd.data() + j * k;
                for (std::int64_t kk = 0; kk < k; ++kk) acc += double(arow[kk]) * wrow[kk];
                out.at(i, j) = static_cast<float>(acc);
            }
        }
    });
    return out;
}

}  // namespace rtnq
