// SPDX-License-Identifier: Apache-2.0
#include "rtnq/toy.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "rtnq/error.hpp"
#include "rtnq/rng.hpp"

namespace rtnq {
namespace {

constexpr double kRmsEps = 1e-5;

// Row-wise RMS normalization, no learnable scale. Accumulates in double so
// the result does not depend on how the compiler reassociates float sums.
FloatTensor rmsnorm(const FloatTensor& x) {
    FloatTensor y(x.rows, x.cols);
    for (std::int64_t i = 0; i < x.rows; ++i) {
        const float* row = x.data.data() + i * x.cols;
        double ss = 0.0;
        for (std::int64_t c = 0; c < x.cols; ++c) ss += double(row[c]) * double(row[c]);
        const float inv = float(1.0 / std::sqrt(ss / double(x.cols) + kRmsEps));
        float* out = y.data.data() + i * x.cols;
        for (std::int64_t c = 0; c < x.cols; ++c) out[c] = row[c] * inv;
    }
    return y;
}

// Multi-head softmax attention over a fused s x 3d QKV activation whose
// columns are [Q | K | V]. Scores, softmax and the value reduction run in
// double; each output element is rounded to f32 once.
FloatTensor attention(const FloatTensor& qkv, std::int64_t heads, bool causal) {
    const std::int64_t s = qkv.rows;
    const std::int64_t d = qkv.cols / 3;
    const std::int64_t dh = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(double(dh));

    FloatTensor out(s, d);
    std::vector<double> prob(static_cast<std::size_t>(s));
    for (std::int64_t t = 0; t < heads; ++t) {
        const std::int64_t q0 = t * dh, k0 = d + t * dh, v0 = 2 * d + t * dh;
        for (std::int64_t i = 0; i < s; ++i) {
            const std::int64_t jmax = causal ? i : s - 1;
            double peak = -std::numeric_limits<double>::infinity();
            for (std::int64_t j = 0; j <= jmax; ++j) {
                double score = 0.0;
                for (std::int64_t c = 0; c < dh; ++c)
                    score += double(qkv.at(i, q0 + c)) * double(qkv.at(j, k0 + c));
                score *= inv_sqrt_dh;
                prob[static_cast<std::size_t>(j)] = score;
                peak = std::max(peak, score);
            }
            double denom = 0.0;
            for (std::int64_t j = 0; j <= jmax; ++j) {
                const double p = std::exp(prob[static_cast<std::size_t>(j)] - peak);
                prob[static_cast<std::size_t>(j)] = p;
                denom += p;
            }
            for (std::int64_t c = 0; c < dh; ++c) {
                double acc = 0.0;
                for (std::int64_t j = 0; j <= jmax; ++j)
                    acc += prob[static_cast<std::size_t>(j)] * double(qkv.at(j, v0 + c));
                out.at(i, t * dh + c) = float(acc / denom);
            }
        }
    }
    return out;
}

// z * sigmoid(z), evaluated in double for cross-compiler determinism.
float silu(float z) { return float(double(z) / (1.0 + std::exp(-double(z)))); }

ModuleShape toy_shape(const ToyTransformerConfig& cfg, ModuleId m) {
    switch (m) {
        case ModuleId::qkv_proj: return {3 * cfg.dim, cfg.dim};
        case ModuleId::attn_out_proj: return {cfg.dim, cfg.dim};
        case ModuleId::ffn_up: return {2 * cfg.ffn, cfg.dim};
        case ModuleId::ffn_down: return {cfg.dim, cfg.ffn};
    }
    throw InvalidInputError("unknown module id");
}

using LinearFn =
    std::function<FloatTensor(std::int64_t layer, ModuleId m, const FloatTensor& x)>;

// Shared block structure of both forward passes; only the linear op differs.
// The fused gate/up activation has gate in columns [0, f) and up in [f, 2f).
FloatTensor forward_impl(const ModelManifest& manifest, const FloatTensor& input,
                         bool causal, const LinearFn& linear) {
    const ToyTransformerConfig cfg = toy_config_of(manifest);
    if (input.rows < 1) throw ShapeError("forward input needs at least one row");
    if (input.cols != cfg.dim)
        throw ShapeError("forward input width " + std::to_string(input.cols) +
                         " does not match model width " + std::to_string(cfg.dim));
    for (float v : input.data)
        if (!std::isfinite(v)) throw InvalidInputError("non-finite forward input");

    FloatTensor x = input;
    for (std::int64_t layer = 0; layer < cfg.layers; ++layer) {
        const FloatTensor qkv = linear(layer, ModuleId::qkv_proj, rmsnorm(x));
        const FloatTensor att = attention(qkv, cfg.heads, causal);
        const FloatTensor proj = linear(layer, ModuleId::attn_out_proj, att);
        for (std::size_t e = 0; e < x.data.size(); ++e) x.data[e] += proj.data[e];

        const FloatTensor ug = linear(layer, ModuleId::ffn_up, rmsnorm(x));
        FloatTensor gated(input.rows, cfg.ffn);
        for (std::int64_t i = 0; i < input.rows; ++i)
            for (std::int64_t c = 0; c < cfg.ffn; ++c)
                gated.at(i, c) = silu(ug.at(i, c)) * ug.at(i, cfg.ffn + c);
        const FloatTensor down = linear(layer, ModuleId::ffn_down, gated);
        for (std::size_t e = 0; e < x.data.size(); ++e) x.data[e] += down.data[e];
    }
    return x;
}

}  // namespace

void ToyTransformerConfig::validate() const {
    if (layers < 1 || dim < 1 || heads < 1 || ffn < 1 || seq < 1)
        throw InvalidInputError("toy config dimensions must be positive");
    if (dim % heads != 0)
        throw InvalidInputError("head count " + std::to_string(heads) +
                                " does not divide model width " + std::to_string(dim));
}

ModelManifest make_toy_manifest(const ToyTransformerConfig& config, GroupSpec group) {
    config.validate();
    ModelManifest m;
    m.name = "toy-decoder";
    m.layer_count = config.layers;
    m.group = group;
    m.layout = LayoutTag::row_major();
    for (ModuleId id : kAllModules) m.shape(id) = toy_shape(config, id);
    m.toy = ToyInfo{config.dim, config.heads, config.ffn, config.seq, config.seed};
    m.validate();
    return m;
}

ToyTransformerConfig toy_config_of(const ModelManifest& manifest) {
    if (!manifest.toy)
        throw InvalidInputError("manifest carries no toy topology block");
    const ToyInfo& t = *manifest.toy;
    const ToyTransformerConfig cfg{manifest.layer_count, t.dim, t.heads,
                                   t.ffn,                t.seq, t.seed};
    cfg.validate();
    for (ModuleId id : kAllModules)
        if (manifest.shape(id) != toy_shape(cfg, id))
            throw ShapeError("manifest module shapes contradict its toy block");
    return cfg;
}

FloatTensor make_toy_weight(const ToyTransformerConfig& config, std::int64_t layer,
                            ModuleId module) {
    config.validate();
    if (layer < 0 || layer >= config.layers)
        throw InvalidInputError("weight layer index out of range");
    const ModuleShape shape = toy_shape(config, module);
    Xoshiro256ss rng(config.seed, weight_stream(layer, module_index(module)));
    const float amp = float(std::sqrt(3.0 / double(shape.cols)));
    FloatTensor w(shape.rows, shape.cols);
    for (float& v : w.data) v = amp * rng.next_unit();
    return w;
}

FloatModel make_toy_model(const ToyTransformerConfig& config) {
    FloatModel model;
    model.manifest = make_toy_manifest(config);
    model.tensors.reserve(static_cast<std::size_t>(config.layers) * kModuleCount);
    for (std::int64_t layer = 0; layer < config.layers; ++layer)
        for (ModuleId id : kAllModules)
            model.tensors.push_back(make_toy_weight(config, layer, id));
    return model;
}

FloatTensor make_toy_input(const ToyTransformerConfig& config, std::int64_t index) {
    config.validate();
    if (index < 0) throw InvalidInputError("input index must be nonnegative");
    Xoshiro256ss rng(config.seed, input_stream(index));
    FloatTensor x(config.seq, config.dim);
    for (float& v : x.data) v = rng.next_unit();
    return x;
}

void gen_synthetic_checkpoint(ToyTransformerConfig config, std::uint64_t seed,
                              const std::string& path) {
    config.seed = seed;
    write_checkpoint(make_toy_model(config), path);
}

FloatTensor toy_forward(const FloatModel& model, const FloatTensor& input, bool causal) {
    const std::int64_t g = model.manifest.group.g;
    return forward_impl(model.manifest, input, causal,
                        [&](std::int64_t layer, ModuleId m, const FloatTensor& x) {
                            return gemm_float(x, model.tensor(layer, m), g);
                        });
}

FloatTensor toy_forward(const QuantModel& model, const FloatTensor& input,
                        std::int64_t threshold, bool causal) {
    return forward_impl(model.manifest, input, causal,
                        [&](std::int64_t layer, ModuleId m, const FloatTensor& x) {
                            return gemm_auto(x, model.tensor(layer, m), threshold);
                        });
}

}  // namespace rtnq
