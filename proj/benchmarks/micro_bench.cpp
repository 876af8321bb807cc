// SPDX-License-Identifier: Apache-2.0
// Microbenchmarks for the quantization and GEMM hot paths.
#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "rtnq/gemm.hpp"
#include "rtnq/packing.hpp"
#include "rtnq/quant.hpp"
#include "rtnq/rng.hpp"
#include "rtnq/types.hpp"

namespace {

using namespace rtnq;

constexpr std::int64_t kRows = 512;
constexpr std::int64_t kCols = 256;
constexpr std::int64_t kGroup = 128;

FloatTensor random_tensor(std::int64_t rows, std::int64_t cols, std::uint64_t stream) {
    FloatTensor t;
    t.rows = rows;
    t.cols = cols;
    t.data.resize(static_cast<std::size_t>(rows * cols));
    Xoshiro256ss rng(42, stream);
    for (auto& v : t.data) v = rng.next_unit();
    return t;
}

BitWidth bits_of(std::int64_t b) { return b == 8 ? BitWidth::b8 : BitWidth::b4; }

void bm_quantize_tensor(benchmark::State& state) {
    const FloatTensor w = random_tensor(kRows, kCols, 0);
    const BitWidth bits = bits_of(state.range(0));
    for (auto _ : state) {
        QuantTensor q = quantize_tensor(w, bits, GroupSpec{kGroup});
        benchmark::DoNotOptimize(q.data.data());
    }
    state.SetItemsProcessed(state.iterations() * kRows * kCols);
}

void bm_dequantize_tensor(benchmark::State& state) {
    const FloatTensor w = random_tensor(kRows, kCols, 0);
    const QuantTensor q = quantize_tensor(w, bits_of(state.range(0)), GroupSpec{kGroup});
    for (auto _ : state) {
        FloatTensor d = dequantize_tensor(q);
        benchmark::DoNotOptimize(d.data.data());
    }
    state.SetItemsProcessed(state.iterations() * kRows * kCols);
}

void bm_pack(benchmark::State& state) {
    const BitWidth bits = bits_of(state.range(0));
    std::vector<std::int8_t> codes(kRows * kCols);
    Xoshiro256ss rng(42, 1);
    for (auto& c : codes)
        c = static_cast<std::int8_t>(qmin(bits) +
                                     static_cast<std::int64_t>(rng.next() %
                                                               static_cast<std::uint64_t>(
                                                                   qmax(bits) - qmin(bits) + 1)));
    for (auto _ : state) {
        PackedBuffer buf = pack(codes, bits);
        benchmark::DoNotOptimize(buf.bytes.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(codes.size()));
}

void bm_unpack(benchmark::State& state) {
    const BitWidth bits = bits_of(state.range(0));
    std::vector<std::int8_t> codes(kRows * kCols);
    Xoshiro256ss rng(42, 1);
    for (auto& c : codes)
        c = static_cast<std::int8_t>(qmin(bits) +
                                     static_cast<std::int64_t>(rng.next() %
                                                               static_cast<std::uint64_t>(
                                                                   qmax(bits) - qmin(bits) + 1)));
    const PackedBuffer buf = pack(codes, bits);
    for (auto _ : state) {
        std::vector<std::int8_t> out = unpack(buf);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(codes.size()));
}

void bm_reshuffle(benchmark::State& state) {
    const FloatTensor w = random_tensor(kRows, kCols, 0);
    const QuantTensor q = quantize_tensor(w, bits_of(state.range(0)), GroupSpec{kGroup});
    const LayoutTag to = LayoutTag::kernel(16, 4);
    for (auto _ : state) {
        QuantTensor r = reshuffle(q, to);
        benchmark::DoNotOptimize(r.data.data());
    }
    state.SetItemsProcessed(state.iterations() * kRows * kCols);
}

// GEMM paths at a fixed weight shape, token count swept via Arg.
void bm_gemm_float(benchmark::State& state) {
    const std::int64_t m = state.range(0);
    const FloatTensor w = random_tensor(kRows, kCols, 0);
    const FloatTensor a = random_tensor(m, kCols, 2);
    for (auto _ : state) {
        FloatTensor out = gemm_float(a, w, kGroup);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(state.iterations() * m * kRows * kCols);
}

void bm_gemm_fused(benchmark::State& state) {
    const std::int64_t m = state.range(0);
    const QuantTensor q = reshuffle(
        quantize_tensor(random_tensor(kRows, kCols, 0), BitWidth::b4, GroupSpec{kGroup}),
        LayoutTag::kernel(16, 4));
    const FloatTensor a = random_tensor(m, kCols, 2);
    for (auto _ : state) {
        FloatTensor out = gemm_fused(a, q);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(state.iterations() * m * kRows * kCols);
}

void bm_gemm_dequant(benchmark::State& state) {
    const std::int64_t m = state.range(0);
    const QuantTensor q = reshuffle(
        quantize_tensor(random_tensor(kRows, kCols, 0), BitWidth::b4, GroupSpec{kGroup}),
        LayoutTag::kernel(16, 4));
    const FloatTensor a = random_tensor(m, kCols, 2);
    for (auto _ : state) {
        FloatTensor out = gemm_dequant(a, q);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(state.iterations() * m * kRows * kCols);
}

BENCHMARK(bm_quantize_tensor)->Arg(4)->Arg(8);
BENCHMARK(bm_dequantize_tensor)->Arg(4)->Arg(8);
BENCHMARK(bm_pack)->Arg(4)->Arg(8);
BENCHMARK(bm_unpack)->Arg(4)->Arg(8);
BENCHMARK(bm_reshuffle)->Arg(4)->Arg(8);
BENCHMARK(bm_gemm_float)->Arg(1)->Arg(32)->Arg(256);
BENCHMARK(bm_gemm_fused)->Arg(1)->Arg(32)->Arg(256);
BENCHMARK(bm_gemm_dequant)->Arg(1)->Arg(32)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
