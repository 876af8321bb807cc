// SPDX-License-Identifier: Apache-2.0
#include <string>
#include <vector>

#include <doctest.h>

#include "rtnq/bench.hpp"
#include "rtnq/error.hpp"

using namespace rtnq;

namespace {

BenchRecord rec(const char* path, std::int64_t m, std::int64_t k, std::int64_t n,
                int bits, std::int64_t median_ns, float speedup = 1.0f) {
    BenchRecord r;
    r.path = path;
    r.m = m;
    r.k = k;
    r.n = n;
    r.bits = bits;
    r.reps = 20;
    r.median_ns = median_ns;
    r.speedup = speedup;
    return r;
}

// Fused stays at 100 ns; dequant starts slow and drops to 80 ns at flip_m.
std::vector<BenchRecord> synthetic_records(std::int64_t k, std::int64_t n,
                                           std::int64_t flip_m) {
    std::vector<BenchRecord> records;
    for (std::int64_t m : {1, 4, 16, 64, 128, 256, 1024}) {
        records.push_back(rec("float", m, k, n, 32, 90));
        records.push_back(rec("fused", m, k, n, 4, 100));
        records.push_back(rec("dequant", m, k, n, 4, m >= flip_m ? 80 : 200));
    }
    return records;
}

}  // namespace

TEST_CASE("crossover search finds the forced flip point") {
    const auto report = find_crossover(synthetic_records(8192, 8192, 128));
    REQUIRE(report.shapes.size() == 1);
    CHECK(report.shapes[0].shape == BenchShape{8192, 8192});
    REQUIRE(report.shapes[0].m.has_value());
    CHECK(*report.shapes[0].m == 128);
    REQUIRE(report.recommended_threshold.has_value());
    CHECK(*report.recommended_threshold == 128);
}

TEST_CASE("crossover is none when fused never loses") {
    auto records = synthetic_records(512, 512, 1 << 30);
    const auto report = find_crossover(records);
    REQUIRE(report.shapes.size() == 1);
    CHECK_FALSE(report.shapes[0].m.has_value());
    CHECK_FALSE(report.recommended_threshold.has_value());

    // A tie counts as a crossover.
    for (auto& r : records)
        if (r.path == "dequant" && r.m == 256) r.median_ns = 100;
    const auto tied = find_crossover(records);
    REQUIRE(tied.shapes[0].m.has_value());
    CHECK(*tied.shapes[0].m == 256);
}

TEST_CASE("recommended threshold is the median crossover across shapes") {
    auto records = synthetic_records(1024, 1024, 64);
    const auto more = synthetic_records(2048, 2048, 256);
    records.insert(records.end(), more.begin(), more.end());
    const auto never = synthetic_records(4096, 4096, 1 << 30);
    records.insert(records.end(), never.begin(), never.end());

    const auto report = find_crossover(records);
    REQUIRE(report.shapes.size() == 3);
    CHECK(*report.shapes[0].m == 64);
    CHECK(*report.shapes[1].m == 256);
    CHECK_FALSE(report.shapes[2].m.has_value());
    // Lower median of {64, 256}.
    CHECK(*report.recommended_threshold == 64);
}

TEST_CASE("crossover search rejects starved inputs") {
    std::vector<BenchRecord> one_m{rec("fused", 16, 64, 64, 4, 100),
                                   rec("dequant", 16, 64, 64, 4, 90)};
    CHECK_THROWS_AS(find_crossover(one_m), InvalidInputError);

    std::vector<BenchRecord> missing_path{rec("fused", 16, 64, 64, 4, 100),
                                          rec("fused", 32, 64, 64, 4, 100)};
    CHECK_THROWS_AS(find_crossover(missing_path), InvalidInputError);

    CHECK_THROWS_AS(find_crossover({rec("float", 16, 64, 64, 32, 100)}),
                    InvalidInputError);
}

TEST_CASE("benchmark CSV roundtrips records exactly") {
    std::vector<BenchRecord> records;
    records.push_back(rec("float", 1, 64, 192, 32, 1234567, 1.0f));
    records.push_back(rec("fused", 1, 64, 192, 4, 987654, 1.24999994f));
    records.push_back(rec("dequant", 4096, 256, 64, 8, 3, 0.333333343f));

    const std::string csv = bench_to_csv(records, 3, 1024);
    CHECK(csv.find("# threads=3\n") != std::string::npos);
    CHECK(csv.find("# git_rev=") != std::string::npos);
    CHECK(csv.find("# threshold=1024\n") != std::string::npos);
    CHECK(csv.find("path,m,k,n,bits,reps,median_ns,speedup\n") != std::string::npos);

    const auto parsed = parse_bench_csv(csv);
    REQUIRE(parsed.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) CHECK(parsed[i] == records[i]);

    CHECK_THROWS_AS(parse_bench_csv("m,k\n1,2\n"), CorruptDataError);
    CHECK_THROWS_AS(parse_bench_csv(""), CorruptDataError);
    CHECK_THROWS_AS(parse_bench_csv("path,m,k,n,bits,reps,median_ns,speedup\nfused,1,2\n"),
                    CorruptDataError);
    CHECK_THROWS_AS(
        parse_bench_csv("path,m,k,n,bits,reps,median_ns,speedup\nfused,x,64,64,4,20,5,1\n"),
        CorruptDataError);
}

TEST_CASE("a small real sweep produces well-formed records") {
    BenchOptions options;
    options.m_values = {1, 8};
    options.reps = 3;
    options.warmups = 1;
    options.group = GroupSpec{32};
    options.spot_check_every = 1;  // oracle-check every quantized call

    const std::vector<BenchShape> shapes{{64, 48}};
    const auto records = bench_sweep(shapes, options);
    REQUIRE(records.size() == 6);  // 2 m x 1 shape x 3 paths

    const char* expected_paths[] = {"float", "fused", "dequant"};
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        CHECK(r.path == expected_paths[i % 3]);
        CHECK(r.m == (i < 3 ? 1 : 8));
        CHECK(r.k == 64);
        CHECK(r.n == 48);
        CHECK(r.bits == (r.path == "float" ? 32 : 4));
        CHECK(r.reps == 3);
        CHECK(r.median_ns >= 1);
        CHECK(r.speedup > 0.0f);
    }
    CHECK(records[0].speedup == 1.0f);
    CHECK(records[3].speedup == 1.0f);

    // Crossover on real records exists or not (hardware decides), but the
    // search itself must accept them.
    const auto report = find_crossover(records);
    CHECK(report.shapes.size() == 1);

    // Non-latency fields are deterministic across runs.
    const auto again = bench_sweep(shapes, options);
    REQUIRE(again.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(again[i].path == records[i].path);
        CHECK(again[i].m == records[i].m);
        CHECK(again[i].bits == records[i].bits);
    }
}

TEST_CASE("sweep input validation") {
    BenchOptions options;
    options.m_values = {8, 4};
    CHECK_THROWS_AS(bench_sweep({{64, 64}}, options), InvalidInputError);
    options.m_values = {4, 4};
    CHECK_THROWS_AS(bench_sweep({{64, 64}}, options), InvalidInputError);
    options.m_values = {0, 4};
    CHECK_THROWS_AS(bench_sweep({{64, 64}}, options), InvalidInputError);
    options.m_values = {1};
    CHECK_THROWS_AS(bench_sweep({}, options), InvalidInputError);
    options.reps = 0;
    CHECK_THROWS_AS(bench_sweep({{64, 64}}, options), InvalidInputError);
}
