// SPDX-License-Identifier: Apache-2.0
#include "rtnq/eval.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "rtnq/error.hpp"
#include "rtnq/quant.hpp"

namespace rtnq {
namespace {

std::string fmt9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void check_topology(const ModelManifest& a, const ModelManifest& b) {
    if (a.layer_count != b.layer_count || a.modules != b.modules || a.toy != b.toy)
        throw InvalidInputError("compared models disagree on topology");
}

void check_tensor_count(std::size_t have, const ModelManifest& m) {
    if (have != static_cast<std::size_t>(m.layer_count) * kModuleCount)
        throw ShapeError("model tensor count does not match its manifest");
}

TensorError tensor_error(std::int64_t layer, ModuleId module, const FloatTensor& ref,
                         const FloatTensor& cand) {
    if (ref.rows != cand.rows || ref.cols != cand.cols)
        throw ShapeError("compared tensors have different shapes");
    TensorError e;
    e.layer = layer;
    e.module = module;
    double diff_ss = 0.0, ref_ss = 0.0;
    for (std::size_t i = 0; i < ref.data.size(); ++i) {
        const double d = double(ref.data[i]) - double(cand.data[i]);
        e.max_abs = std::max(e.max_abs, std::abs(d));
        diff_ss += d * d;
        ref_ss += double(ref.data[i]) * double(ref.data[i]);
    }
    const double count = double(ref.data.size());
    e.mse = count > 0.0 ? diff_ss / count : 0.0;
    e.rel_frobenius = ref_ss > 0.0 ? std::sqrt(diff_ss / ref_ss) : 0.0;
    return e;
}

// Row softmax at temperature 1 in double; KL(ref || cand) per row, clamped
// at zero against roundoff. Identical rows give exactly zero.
void accumulate_logit_metrics(const FloatTensor& yr, const FloatTensor& yc,
                              double& max_dev, double& kl_sum, std::int64_t& row_count) {
    const std::int64_t rows = yr.rows, cols = yr.cols;
    for (std::int64_t i = 0; i < rows; ++i) {
        const float* a = yr.data.data() + i * cols;
        const float* b = yc.data.data() + i * cols;
        double peak_a = -std::numeric_limits<double>::infinity();
        double peak_b = peak_a;
        for (std::int64_t c = 0; c < cols; ++c) {
            max_dev = std::max(max_dev, std::abs(double(a[c]) - double(b[c])));
            peak_a = std::max(peak_a, double(a[c]));
            peak_b = std::max(peak_b, double(b[c]));
        }
        double sum_a = 0.0, sum_b = 0.0;
        for (std::int64_t c = 0; c < cols; ++c) {
            sum_a += std::exp(double(a[c]) - peak_a);
            sum_b += std::exp(double(b[c]) - peak_b);
        }
        const double lse_a = peak_a + std::log(sum_a);
        const double lse_b = peak_b + std::log(sum_b);
        double kl = 0.0;
        for (std::int64_t c = 0; c < cols; ++c) {
            const double log_p = double(a[c]) - lse_a;
            kl += std::exp(log_p) * (log_p - (double(b[c]) - lse_b));
        }
        kl_sum += std::max(0.0, kl);
        ++row_count;
    }
}

template <typename ForwardFn, typename WeightFn>
ErrorReport compare_impl(const FloatModel& ref, const std::vector<FloatTensor>& inputs,
                         const ForwardFn& cand_forward, const WeightFn& cand_weight) {
    ErrorReport report;
    for (std::int64_t layer = 0; layer < ref.manifest.layer_count; ++layer)
        for (ModuleId m : kAllModules)
            report.tensors.push_back(
                tensor_error(layer, m, ref.tensor(layer, m), cand_weight(layer, m)));

    std::int64_t row_count = 0;
    double kl_sum = 0.0;
    for (const FloatTensor& input : inputs) {
        const FloatTensor yr = toy_forward(ref, input);
        const FloatTensor yc = cand_forward(input);
        accumulate_logit_metrics(yr, yc, report.max_logit_dev, kl_sum, row_count);
    }
    report.mean_kl = row_count > 0 ? kl_sum / double(row_count) : 0.0;
    return report;
}

const char* kind_name(HorizontalStrategy::Kind kind) {
    switch (kind) {
        case HorizontalStrategy::Kind::first: return "first";
        case HorizontalStrategy::Kind::middle: return "middle";
        case HorizontalStrategy::Kind::last: return "last";
        case HorizontalStrategy::Kind::explicit_list: break;
    }
    throw InvalidInputError("sweeps cover the first/middle/last strategies only");
}

// Sweep core: the reference forward runs once per input, candidates reuse it.
struct SweepContext {
    const FloatModel& model;
    const std::vector<FloatTensor>& inputs;
    std::vector<FloatTensor> ref_logits;
    std::int64_t threshold;

    SweepContext(const FloatModel& m, const std::vector<FloatTensor>& in, std::int64_t th)
        : model(m), inputs(in), threshold(th) {
        check_tensor_count(m.tensors.size(), m.manifest);
        ref_logits.reserve(in.size());
        for (const FloatTensor& input : in) ref_logits.push_back(toy_forward(m, input));
    }

    SweepRow measure(const SelectionPlan& plan, std::string strategy, std::string label) {
        const QuantModel qm = quantize_model(model, plan);
        SweepRow row;
        row.strategy = std::move(strategy);
        row.label = std::move(label);
        row.effective_bits =
            effective_bits(resolve_plan(plan, model.manifest.layer_count), model.manifest);
        std::int64_t row_count = 0;
        double kl_sum = 0.0;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            const FloatTensor yc = toy_forward(qm, inputs[i], threshold);
            accumulate_logit_metrics(ref_logits[i], yc, row.max_logit_dev, kl_sum,
                                     row_count);
        }
        row.mean_kl = row_count > 0 ? kl_sum / double(row_count) : 0.0;
        return row;
    }
};

}  // namespace

ErrorReport compare(const FloatModel& ref, const QuantModel& cand,
                    const std::vector<FloatTensor>& inputs, std::int64_t threshold) {
    check_topology(ref.manifest, cand.manifest);
    check_tensor_count(ref.tensors.size(), ref.manifest);
    check_tensor_count(cand.tensors.size(), cand.manifest);

    ErrorReport report = compare_impl(
        ref, inputs,
        [&](const FloatTensor& input) { return toy_forward(cand, input, threshold); },
        [&](std::int64_t layer, ModuleId m) {
            return dequantize_tensor(cand.tensor(layer, m));
        });
    report.plan_text = cand.manifest.plan_text.value_or("");

    std::int64_t bit_sum = 0, param_sum = 0;
    for (const QuantTensor& t : cand.tensors) {
        const std::int64_t params = t.rows * t.cols;
        bit_sum += std::int64_t(bit_count(t.bits)) * params;
        param_sum += params;
    }
    report.effective_bits = param_sum > 0 ? double(bit_sum) / double(param_sum) : 0.0;
    return report;
}

ErrorReport compare(const FloatModel& ref, const FloatModel& cand,
                    const std::vector<FloatTensor>& inputs) {
    check_topology(ref.manifest, cand.manifest);
    check_tensor_count(ref.tensors.size(), ref.manifest);
    check_tensor_count(cand.tensors.size(), cand.manifest);

    ErrorReport report = compare_impl(
        ref, inputs, [&](const FloatTensor& input) { return toy_forward(cand, input); },
        [&](std::int64_t layer, ModuleId m) { return cand.tensor(layer, m); });
    report.effective_bits = 32.0;
    return report;
}

std::string mask_label(VerticalMask mask) {
    if (mask == VerticalMask::none()) return "none";
    std::string out;
    for (ModuleId m : kAllModules) {
        if (!mask.has(m)) continue;
        if (!out.empty()) out += '+';
        out += std::to_string(static_cast<int>(m));
    }
    return out;
}

std::vector<SweepRow> horizontal_sweep(const FloatModel& model,
                                       HorizontalStrategy::Kind kind,
                                       const std::vector<FloatTensor>& inputs,
                                       std::int64_t threshold) {
    const char* name = kind_name(kind);
    SweepContext ctx(model, inputs, threshold);
    std::vector<SweepRow> rows;
    for (std::int64_t x = 0; x <= model.manifest.layer_count; ++x) {
        SelectionPlan plan;
        plan.horizontal = HorizontalStrategy{kind, x, {}};
        rows.push_back(ctx.measure(plan, name, std::to_string(x)));
    }
    return rows;
}

std::vector<SweepRow> vertical_sweep(const FloatModel& model,
                                     const std::vector<FloatTensor>& inputs,
                                     std::int64_t threshold) {
    SweepContext ctx(model, inputs, threshold);
    std::vector<SweepRow> rows;
    for (int bits = 0; bits < 16; ++bits) {
        const VerticalMask mask{static_cast<std::uint8_t>(bits)};
        SelectionPlan plan;
        plan.horizontal =
            HorizontalStrategy{HorizontalStrategy::Kind::first, model.manifest.layer_count, {}};
        plan.vertical = mask;
        rows.push_back(ctx.measure(plan, "modules", mask_label(mask)));
    }
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::string out = "strategy,x_or_mask,effective_bits,max_logit_dev,mean_kl\n";
    for (const SweepRow& r : rows) {
        out += r.strategy;
        out += ',';
        out += r.label;
        out += ',';
        out += fmt9(r.effective_bits);
        out += ',';
        out += fmt9(r.max_logit_dev);
        out += ',';
        out += fmt9(r.mean_kl);
        out += '\n';
    }
    return out;
}

}  // namespace rtnq
