// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "rtnq/types.hpp"

namespace rtnq {

// Weight shape of one linear module: rows output channels, cols input
// features. The same shape applies to that module role in every layer.
struct ModuleShape {
    std::int64_t rows = 0;
    std::int64_t cols = 0;

    std::int64_t params() const { return rows * cols; }
    bool operator==(const ModuleShape&) const = default;
};

// Extra topology carried by checkpoints of the small reference transformer so
// a forward pass can be reconstructed from the file alone.
struct ToyInfo {
    std::int64_t dim = 0;    // model width
    std::int64_t heads = 0;  // attention heads
    std::int64_t ffn = 0;    // feed-forward width
    std::int64_t seq = 0;    // default sequence length
    std::uint64_t seed = 0;  // generator seed for weights and inputs

    bool operator==(const ToyInfo&) const = default;
};

// Model topology: what a checkpoint contains, independent of the tensor
// bytes themselves. Every layer holds the same four linear modules.
struct ModelManifest {
    std::string name;
    std::int64_t layer_count = 0;
    GroupSpec group;
    LayoutTag layout = LayoutTag::row_major();
    std::array<ModuleShape, kModuleCount> modules{};
    std::optional<std::string> plan_text;  // canonical plan, set once quantized
    std::optional<ToyInfo> toy;

    const ModuleShape& shape(ModuleId m) const { return modules[module_index(m)]; }
    ModuleShape& shape(ModuleId m) { return modules[module_index(m)]; }

    std::int64_t params(ModuleId m) const { return shape(m).params(); }
    std::int64_t layer_params() const {
        std::int64_t total = 0;
        for (ModuleId m : kAllModules) total += params(m);
        return total;
    }
    std::int64_t total_params() const { return layer_count * layer_params(); }

    // Scale-group count of one module's weight tensor under this manifest's
    // group spec.
    std::int64_t groups(ModuleId m) const {
        return shape(m).rows * group.groups_per_row(shape(m).cols);
    }

    // Throws InvalidInputError or ShapeError if the topology is unusable.
    void validate() const;

    bool operator==(const ModelManifest&) const = default;
};

// All four modules share one rows x cols shape: the accounting fixture where
// every module weighs the same.
ModelManifest make_uniform_manifest(std::int64_t layers, std::int64_t rows,
                                    std::int64_t cols, GroupSpec group = GroupSpec{});

// 80-layer 70B-class decoder shapes: hidden 8192, intermediate 28672, fused
// QKV with two grouped KV heads of width 1024, fused up/gate projection.
ModelManifest make_70b_manifest();

}  // namespace rtnq
