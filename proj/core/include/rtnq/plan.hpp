// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rtnq/manifest.hpp"
#include "rtnq/types.hpp"

namespace rtnq {

// Which of the four per-layer modules a plan raises to high precision.
// A mask applies uniformly within every selected layer.
struct VerticalMask {
    std::uint8_t bits = 0;  // bit (id - 1) set when module id is included

    static VerticalMask all() { return VerticalMask{0b1111}; }
    static VerticalMask none() { return VerticalMask{0}; }
    static VerticalMask of(std::initializer_list<ModuleId> ids) {
        VerticalMask m;
        for (ModuleId id : ids) m.add(id);
        return m;
    }

    void add(ModuleId m) { bits |= std::uint8_t(1u << module_index(m)); }
    bool has(ModuleId m) const { return (bits >> module_index(m)) & 1u; }
    int count() const {
        int n = 0;
        for (ModuleId m : kAllModules) n += has(m) ? 1 : 0;
        return n;
    }

    bool operator==(const VerticalMask&) const = default;
};

// Which layers a plan selects. first/middle/last take a count x; the middle
// block starts at floor((n - x) / 2). explicit_list carries the indices
// directly and ignores x.
struct HorizontalStrategy {
    enum class Kind : std::uint8_t { first, middle, last, explicit_list };

    Kind kind = Kind::first;
    std::int64_t x = 0;
    std::vector<std::int64_t> layers;  // explicit_list only, sorted ascending

    bool operator==(const HorizontalStrategy&) const = default;
};

// A selective-quantization plan: selected layers get high_bits on the masked
// modules, everything else gets base_bits. high_bits must exceed base_bits.
struct SelectionPlan {
    BitWidth base_bits = BitWidth::b4;
    BitWidth high_bits = BitWidth::b8;
    HorizontalStrategy horizontal;
    VerticalMask vertical = VerticalMask::all();

    bool operator==(const SelectionPlan&) const = default;
};

// Fully resolved precision choice for every (layer, module) slot.
struct PrecisionAssignment {
    std::int64_t layer_count = 0;
    std::vector<BitWidth> table;  // layer_count * 4, slot = layer * 4 + module_index

    static PrecisionAssignment uniform(std::int64_t layers, BitWidth b) {
        PrecisionAssignment a;
        a.layer_count = layers;
        a.table.assign(static_cast<std::size_t>(layers) * kModuleCount, b);
        return a;
    }

    BitWidth at(std::int64_t layer, ModuleId m) const {
        return table[static_cast<std::size_t>(layer) * kModuleCount + module_index(m)];
    }
    BitWidth& at(std::int64_t layer, ModuleId m) {
        return table[static_cast<std::size_t>(layer) * kModuleCount + module_index(m)];
    }

    bool operator==(const PrecisionAssignment&) const = default;
};

// Plan text grammar, one strategy field then optional fields in this order:
//
//   <first|middle|last>:<X> [modules:<m(+m)*>] [base:<b>] [high:<b>]
//   explicit:<i(,i)*>       [modules:<m(+m)*>] [base:<b>] [high:<b>]
//
// X is a non-negative layer count, module ids are 1..4 (no duplicates),
// explicit layer indices are non-negative (any order, no duplicates), and
// bit widths are 4 or 8. "modules:none" selects no module (an empty vertical
// mask). Omitted fields default to modules:1+2+3+4 base:4 high:8. Examples:
// "first:8 modules:1+3+4", "middle:3", "explicit:0,39,79".
// Errors are PlanError carrying the byte offset of the offending token.
SelectionPlan parse_plan(std::string_view text);

// Canonical, fully explicit text form; parse_plan(render_plan(p)) == p.
std::string render_plan(const SelectionPlan& plan);

// Expands a plan against a layer count. Throws PlanError when the plan
// selects more layers than exist (or an explicit index is out of range) and
// InvalidInputError when n < 1.
PrecisionAssignment resolve_plan(const SelectionPlan& plan, std::int64_t n);

// Mean stored bits per weight: sum(bits * params) / sum(params) over every
// (layer, module) slot, exact integer sums divided once. With include_scales
// each scale group adds 16 bits (the checkpoint stores scales as IEEE half),
// i.e. exactly 16/g extra bits per weight when g divides all module widths.
double effective_bits(const PrecisionAssignment& assign, const ModelManifest& manifest,
                      bool include_scales = false);

}  // namespace rtnq
