// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rtnq/gemm.hpp"
#include "rtnq/plan.hpp"
#include "rtnq/store.hpp"
#include "rtnq/toy.hpp"
#include "rtnq/types.hpp"

namespace rtnq {

// Weight-space distortion of one tensor against its full-precision original.
struct TensorError {
    std::int64_t layer = 0;
    ModuleId module = ModuleId::qkv_proj;
    double max_abs = 0.0;        // max |ref - cand|
    double mse = 0.0;            // mean (ref - cand)^2
    double rel_frobenius = 0.0;  // ||ref - cand||_F / ||ref||_F, 0 when ||ref|| = 0
};

// Full distortion picture of a candidate model against a float reference:
// weight-space per tensor, output-space over a set of forward inputs.
// mean_kl averages KL(softmax(ref row) || softmax(cand row)) at temperature 1
// over every row of every input; max_logit_dev is the worst elementwise
// logit difference. Both are computed in double and are exactly zero when a
// model is compared with itself.
struct ErrorReport {
    std::string plan_text;        // canonical plan, empty for a float candidate
    double effective_bits = 0.0;  // stored weight bits per parameter (scales excluded)
    std::vector<TensorError> tensors;
    double max_logit_dev = 0.0;
    double mean_kl = 0.0;
};

// Candidate quantized under a plan. inputs must all be seq x dim; threshold
// feeds gemm_auto. Throws ShapeError/InvalidInputError on mismatched models
// or inputs.
ErrorReport compare(const FloatModel& ref, const QuantModel& cand,
                    const std::vector<FloatTensor>& inputs,
                    std::int64_t threshold = kDefaultGemmThreshold);

// Float candidate; comparing a model with itself yields an all-zero report
// with effective_bits 32.
ErrorReport compare(const FloatModel& ref, const FloatModel& cand,
                    const std::vector<FloatTensor>& inputs);

// One sweep measurement: a plan point reduced to the output-space metrics.
struct SweepRow {
    std::string strategy;   // "first" | "middle" | "last" | "modules"
    std::string label;      // X as decimal, or a module mask like "1+3"
    double effective_bits = 0.0;
    double max_logit_dev = 0.0;
    double mean_kl = 0.0;
};

// Module mask in '+' notation: "1+2+4"; the empty mask renders as "none".
std::string mask_label(VerticalMask mask);

// Layer-count sweep: for X = 0..layer_count, the chosen block of X layers
// runs fully at 8 bits and everything else at 4. One row per X.
std::vector<SweepRow> horizontal_sweep(const FloatModel& model,
                                       HorizontalStrategy::Kind kind,
                                       const std::vector<FloatTensor>& inputs,
                                       std::int64_t threshold = kDefaultGemmThreshold);

// Module-mask sweep: all 16 masks, each applied across every layer (masked
// modules 8-bit, the rest 4-bit). Rows ordered by mask value 0..15.
std::vector<SweepRow> vertical_sweep(const FloatModel& model,
                                     const std::vector<FloatTensor>& inputs,
                                     std::int64_t threshold = kDefaultGemmThreshold);

// CSV with header strategy,x_or_mask,effective_bits,max_logit_dev,mean_kl;
// numbers printed with 9 significant digits. Byte-deterministic.
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace rtnq
