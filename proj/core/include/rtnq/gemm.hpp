// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "rtnq/quant.hpp"
#include "rtnq/types.hpp"

namespace rtnq {

// Which multiply implementation ran.
enum class GemmPath : std::uint8_t { fused = 0, dequant_first = 1 };

// Token count at or above which the dispatcher prefers materializing float
// weights over fused dequantization.
constexpr std::int64_t kDefaultGemmThreshold = 1024;

// out = a (m x k) times w^T (k x w.rows): out[i,j] = sum_k a[i,k] * w[j,k],
// where w[j,k] = scale(j, k/g) * code(j, k).
//
// Accumulation contract shared by both paths: each output element is reduced
// sequentially over k in group-sized blocks (block subtotal, then add);
// parallelism only spans output elements, so results are identical for every
// thread count. The fused path keeps weights packed, decoding codes tile by
// tile and applying the group scale to each block subtotal; it requires the
// kernel_interleaved layout. The dequant path materializes the float weight
// matrix first and accepts either layout.
//
// Throws ShapeError on k mismatch or wrong layout, InvalidInputError on
// non-finite activations.
FloatTensor gemm_fused(const FloatTensor& a, const QuantTensor& w);
FloatTensor gemm_dequant(const FloatTensor& a, const QuantTensor& w);

// Picks the path from the token count: m >= threshold runs dequant_first,
// otherwise fused. Requires the kernel_interleaved layout (the fused path
// must be runnable). threshold must be >= 1. The result is value-identical
// to calling the chosen path directly; *chosen reports it when non-null.
FloatTensor gemm_auto(const FloatTensor& a, const QuantTensor& w,
                      std::int64_t threshold = kDefaultGemmThreshold,
                      GemmPath* chosen = nullptr);

// Ground truth: naive triple loop accumulating in 64-bit over the exactly
// dequantized weights, rounded to f32 once at the end. Any layout.
FloatTensor gemm_oracle(const FloatTensor& a, const QuantTensor& w);

// Float-weight multiply with the same blocked accumulation contract, reducing
// k in blocks of `block`. Reference path for unquantized models and the
// baseline the benchmark speedups are measured against.
FloatTensor gemm_float(const FloatTensor& a, const FloatTensor& w, std::int64_t block);

}  // namespace rtnq
