// SPDX-License-Identifier: Apache-2.0
#include "rtnq/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <string_view>

#include "rtnq/error.hpp"
#include "rtnq/gemm.hpp"
#include "rtnq/packing.hpp"
#include "rtnq/quant.hpp"
#include "rtnq/rng.hpp"

#ifndef RTNQ_GIT_REV
#define RTNQ_GIT_REV "unknown"
#endif

namespace rtnq {
namespace {

constexpr double kSpotCheckTolerance = 1e-4;

FloatTensor random_tensor(std::int64_t rows, std::int64_t cols, std::uint64_t seed,
                          std::uint64_t stream) {
    Xoshiro256ss rng(seed, stream);
    FloatTensor t(rows, cols);
    for (float& v : t.data) v = rng.next_unit();
    return t;
}

double rel_frobenius(const FloatTensor& a, const FloatTensor& b) {
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = double(a.data[i]) - double(b.data[i]);
        diff += d * d;
        ref += double(b.data[i]) * double(b.data[i]);
    }
    return ref > 0.0 ? std::sqrt(diff / ref) : std::sqrt(diff);
}

// Lower median of an unsorted sample.
std::int64_t median_of(std::vector<std::int64_t> v) {
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
}

std::string fmt_speedup(float v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", double(v));
    return buf;
}

std::int64_t parse_int_field(std::string_view s, const char* what) {
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw CorruptDataError(std::string("bad ") + what + " field '" + std::string(s) +
                               "' in benchmark CSV");
    return value;
}

}  // namespace

std::vector<BenchRecord> bench_sweep(const std::vector<BenchShape>& shapes,
                                     const BenchOptions& options) {
    if (shapes.empty()) throw InvalidInputError("benchmark needs at least one shape");
    if (options.m_values.empty())
        throw InvalidInputError("benchmark needs at least one token count");
    if (!std::is_sorted(options.m_values.begin(), options.m_values.end()) ||
        std::adjacent_find(options.m_values.begin(), options.m_values.end()) !=
            options.m_values.end())
        throw InvalidInputError("token counts must be strictly ascending");
    if (options.m_values.front() < 1)
        throw InvalidInputError("token counts must be positive");
    if (options.reps < 1 || options.warmups < 0 || options.spot_check_every < 1)
        throw InvalidInputError("bad benchmark repetition settings");

    using clock = std::chrono::steady_clock;
    const std::int64_t max_m = options.m_values.back();
    const int qbits = bit_count(options.bits);

    std::vector<BenchRecord> records;
    std::int64_t timed_quant_calls = 0;

    for (std::size_t si = 0; si < shapes.size(); ++si) {
        const BenchShape& shape = shapes[si];
        if (shape.k < 1 || shape.n < 1)
            throw InvalidInputError("benchmark shape dimensions must be positive");

        const FloatTensor wf = random_tensor(
            shape.n, shape.k, options.seed, weight_stream(std::int64_t(si), 0));
        const QuantTensor wq = reshuffle(
            quantize_tensor(wf, options.bits, options.group), LayoutTag::kernel());
        const FloatTensor a_full =
            random_tensor(max_m, shape.k, options.seed, input_stream(std::int64_t(si)));

        for (const std::int64_t m : options.m_values) {
            FloatTensor a(m, shape.k);
            std::copy_n(a_full.data.begin(), a.data.size(), a.data.begin());

            // Times one path; quantized paths feed the oracle spot check.
            const auto time_path = [&](const char* name, int bits, auto&& call,
                                       bool quantized) {
                for (int w = 0; w < options.warmups; ++w) (void)call();
                std::vector<std::int64_t> times(static_cast<std::size_t>(options.reps));
                for (int r = 0; r < options.reps; ++r) {
                    const auto t0 = clock::now();
                    const FloatTensor out = call();
                    const auto t1 = clock::now();
                    times[static_cast<std::size_t>(r)] = std::max<std::int64_t>(
                        1, std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0)
                               .count());
                    if (quantized &&
                        ++timed_quant_calls % options.spot_check_every == 0) {
                        const double err = rel_frobenius(out, gemm_oracle(a, wq));
                        if (!(err <= kSpotCheckTolerance))
                            throw Error("benchmark output diverged from the oracle");
                    }
                }
                BenchRecord rec;
                rec.path = name;
                rec.m = m;
                rec.k = shape.k;
                rec.n = shape.n;
                rec.bits = bits;
                rec.reps = options.reps;
                rec.median_ns = median_of(times);
                records.push_back(std::move(rec));
            };

            time_path("float", 32, [&] { return gemm_float(a, wf, options.group.g); },
                      false);
            time_path("fused", qbits, [&] { return gemm_fused(a, wq); }, true);
            time_path("dequant", qbits, [&] { return gemm_dequant(a, wq); }, true);

            const double base = double(records[records.size() - 3].median_ns);
            records[records.size() - 3].speedup = 1.0f;
            records[records.size() - 2].speedup =
                float(base / double(records[records.size() - 2].median_ns));
            records[records.size() - 1].speedup =
                float(base / double(records[records.size() - 1].median_ns));
        }
    }
    return records;
}

CrossoverReport find_crossover(const std::vector<BenchRecord>& records) {
    struct PairMedians {
        std::optional<std::int64_t> fused, dequant;
    };
    std::vector<BenchShape> order;
    std::map<std::pair<std::int64_t, std::int64_t>, std::map<std::int64_t, PairMedians>>
        by_shape;
    for (const BenchRecord& r : records) {
        if (r.path != "fused" && r.path != "dequant") continue;
        const auto key = std::make_pair(r.k, r.n);
        if (by_shape.find(key) == by_shape.end()) order.push_back({r.k, r.n});
        auto& slot = by_shape[key][r.m];
        (r.path == "fused" ? slot.fused : slot.dequant) = r.median_ns;
    }
    if (order.empty())
        throw InvalidInputError("no quantized-path records to analyze");

    CrossoverReport report;
    std::vector<std::int64_t> crossovers;
    for (const BenchShape& shape : order) {
        const auto& per_m = by_shape[{shape.k, shape.n}];
        std::vector<std::pair<std::int64_t, PairMedians>> usable;
        for (const auto& [m, meds] : per_m)
            if (meds.fused && meds.dequant) usable.emplace_back(m, meds);
        if (usable.size() < 2)
            throw InvalidInputError(
                "crossover search needs both paths at two or more token counts per shape");

        std::optional<std::int64_t> cross;
        for (const auto& [m, meds] : usable) {  // map order: m ascending
            if (*meds.dequant <= *meds.fused) {
                cross = m;
                break;
            }
        }
        report.shapes.push_back({shape, cross});
        if (cross) crossovers.push_back(*cross);
    }
    if (!crossovers.empty()) report.recommended_threshold = median_of(crossovers);
    return report;
}

std::string bench_to_csv(const std::vector<BenchRecord>& records, int threads,
                         std::int64_t threshold) {
    std::string out;
    out += "# threads=" + std::to_string(threads) + "\n";
    out += "# git_rev=" RTNQ_GIT_REV "\n";
    out += "# threshold=" + std::to_string(threshold) + "\n";
    out += "path,m,k,n,bits,reps,median_ns,speedup\n";
    for (const BenchRecord& r : records) {
        out += r.path;
        out += ',' + std::to_string(r.m);
        out += ',' + std::to_string(r.k);
        out += ',' + std::to_string(r.n);
        out += ',' + std::to_string(r.bits);
        out += ',' + std::to_string(r.reps);
        out += ',' + std::to_string(r.median_ns);
        out += ',' + fmt_speedup(r.speedup);
        out += '\n';
    }
    return out;
}

std::vector<BenchRecord> parse_bench_csv(const std::string& csv) {
    std::vector<BenchRecord> records;
    bool saw_header = false;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t eol = csv.find('\n', pos);
        if (eol == std::string::npos) eol = csv.size();
        const std::string_view line(csv.data() + pos, eol - pos);
        pos = eol + 1;
        if (line.empty() || line.front() == '#') continue;
        if (!saw_header) {
            if (line != "path,m,k,n,bits,reps,median_ns,speedup")
                throw CorruptDataError("unexpected benchmark CSV header");
            saw_header = true;
            continue;
        }

        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 8)
            throw CorruptDataError("benchmark CSV row does not have 8 fields");

        BenchRecord r;
        r.path = std::string(fields[0]);
        if (r.path.empty()) throw CorruptDataError("empty path in benchmark CSV");
        r.m = parse_int_field(fields[1], "m");
        r.k = parse_int_field(fields[2], "k");
        r.n = parse_int_field(fields[3], "n");
        r.bits = int(parse_int_field(fields[4], "bits"));
        r.reps = int(parse_int_field(fields[5], "reps"));
        r.median_ns = parse_int_field(fields[6], "median_ns");
        const std::string spd(fields[7]);
        char* end = nullptr;
        r.speedup = std::strtof(spd.c_str(), &end);
        if (end != spd.c_str() + spd.size() || spd.empty())
            throw CorruptDataError("bad speedup field '" + spd + "' in benchmark CSV");
        records.push_back(std::move(r));
    }
    if (!saw_header) throw CorruptDataError("benchmark CSV has no header");
    return records;
}

}  // namespace rtnq
