// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "rtnq/gemm.hpp"
#include "rtnq/manifest.hpp"
#include "rtnq/store.hpp"
#include "rtnq/types.hpp"

namespace rtnq {

// Desk-scale decoder used to measure precision plans end to end. Topology per
// layer: RMS pre-norm, fused QKV projection, causal multi-head softmax
// attention, output projection with residual add, RMS pre-norm, fused
// gate/up projection with SiLU gating, down projection with residual add.
// The final residual stream is returned as the logits; there is no
// tokenizer, embedding or unembedding.
struct ToyTransformerConfig {
    std::int64_t layers = 8;
    std::int64_t dim = 64;    // model width d
    std::int64_t heads = 4;   // attention heads, must divide dim
    std::int64_t ffn = 256;   // feed-forward width f
    std::int64_t seq = 32;    // default sequence length
    std::uint64_t seed = 0;   // PRNG seed for weights and inputs

    // Throws InvalidInputError on nonpositive dims or heads not dividing dim.
    void validate() const;

    bool operator==(const ToyTransformerConfig&) const = default;
};

// Groups of 64 divide both toy input widths (64 and 256).
inline constexpr std::int64_t kToyGroupSize = 64;

// Manifest for the toy topology. Module shapes: fused QKV 3d x d, output
// projection d x d, fused gate/up 2f x d, down d x f. Carries the config in
// the manifest's toy block so a checkpoint is self-describing.
ModelManifest make_toy_manifest(const ToyTransformerConfig& config,
                                GroupSpec group = GroupSpec{kToyGroupSize, false});

// Reads the config back out of a manifest written by make_toy_manifest.
// Throws InvalidInputError when the manifest has no toy block, ShapeError
// when the module shapes contradict the block.
ToyTransformerConfig toy_config_of(const ModelManifest& manifest);

// Deterministic weight fill: tensor element [r, c] is the next draw from
// Xoshiro256ss(seed, weight_stream(layer, slot)) scaled by sqrt(3 / cols),
// drawn row-major. The uniform [-1, 1) draw times that amplitude gives unit
// fan-in variance, keeping activations O(1) at any width.
FloatTensor make_toy_weight(const ToyTransformerConfig& config, std::int64_t layer,
                            ModuleId module);

// All weights of all layers, in memory.
FloatModel make_toy_model(const ToyTransformerConfig& config);

// Row-major seq x dim input drawn from Xoshiro256ss(seed, input_stream(index)),
// uniform [-1, 1).
FloatTensor make_toy_input(const ToyTransformerConfig& config, std::int64_t index = 0);

// Writes the float checkpoint of make_toy_model(config with seed) to path.
// Byte-identical output for identical (config, seed).
void gen_synthetic_checkpoint(ToyTransformerConfig config, std::uint64_t seed,
                              const std::string& path);

// Forward pass over the full-precision weights. input is seq x dim with any
// seq >= 1; returns the same shape. causal=false removes the attention mask
// (used to check permutation equivariance). Throws ShapeError when input or
// model shapes are inconsistent, InvalidInputError on non-finite input.
FloatTensor toy_forward(const FloatModel& model, const FloatTensor& input,
                        bool causal = true);

// Forward pass with every linear routed through gemm_auto at the given
// dispatch threshold.
FloatTensor toy_forward(const QuantModel& model, const FloatTensor& input,
                        std::int64_t threshold = kDefaultGemmThreshold,
                        bool causal = true);

}  // namespace rtnq
