// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rtnq/types.hpp"

namespace rtnq {

// One GEMM problem: weights are n output channels by k input features, so a
// multiply is (m x k) times the stored (n x k) tensor.
struct BenchShape {
    std::int64_t k = 0;
    std::int64_t n = 0;

    bool operator==(const BenchShape&) const = default;
};

// One timed measurement. path is "float" (dense f32 baseline), "fused"
// (packed codes consumed in place) or "dequant" (weights materialized
// first). bits is 32 for the baseline. speedup = baseline median / this
// median for the same (m, k, n); it is stored as f32 so the CSV's 9
// significant digits reproduce it exactly.
struct BenchRecord {
    std::string path;
    std::int64_t m = 0;
    std::int64_t k = 0;
    std::int64_t n = 0;
    int bits = 0;
    int reps = 0;
    std::int64_t median_ns = 0;
    float speedup = 0.0f;

    bool operator==(const BenchRecord&) const = default;
};

inline const std::vector<std::int64_t> kDefaultBenchTokenCounts = {
    1, 4, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096};

struct BenchOptions {
    std::vector<std::int64_t> m_values = kDefaultBenchTokenCounts;
    int reps = 20;     // timed calls per record, median reported
    int warmups = 5;   // untimed calls before the reps
    BitWidth bits = BitWidth::b4;
    GroupSpec group;   // must divide every shape's k
    std::uint64_t seed = 0;
    // Every Nth timed quantized-path call has its output checked against the
    // exact oracle (relative Frobenius <= 1e-4); a miss aborts the sweep.
    int spot_check_every = 100;
};

// Times all three paths for every (m, shape) pair. Weights and activations
// come from the pinned PRNG, so everything but the latencies is
// deterministic. Record order: shapes outer, m inner, paths float, fused,
// dequant. Throws InvalidInputError on empty shapes or unsorted m_values,
// Error when a spot check fails.
std::vector<BenchRecord> bench_sweep(const std::vector<BenchShape>& shapes,
                                     const BenchOptions& options = {});

// Per-shape smallest m whose dequant median is at or below the fused median,
// plus the median of those crossovers (lower median) as the recommended
// dispatch threshold. A shape whose dequant path never catches up reports
// nullopt, and is excluded from the recommendation. Throws InvalidInputError
// when any shape has fewer than two m values with both quantized paths.
struct CrossoverReport {
    struct PerShape {
        BenchShape shape;
        std::optional<std::int64_t> m;
    };
    std::vector<PerShape> shapes;
    std::optional<std::int64_t> recommended_threshold;
};
CrossoverReport find_crossover(const std::vector<BenchRecord>& records);

// CSV with '#' comment lines recording thread count, build revision and the
// configured dispatch threshold, then the header
// path,m,k,n,bits,reps,median_ns,speedup and one line per record. speedup is
// printed with 9 significant digits; parse_bench_csv inverts the format
// exactly (comments ignored). parse throws CorruptDataError on malformed
// input.
std::string bench_to_csv(const std::vector<BenchRecord>& records, int threads,
                         std::int64_t threshold);
std::vector<BenchRecord> parse_bench_csv(const std::string& csv);

}  // namespace rtnq
