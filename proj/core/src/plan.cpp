// SPDX-License-Identifier: Apache-2.0
#include "rtnq/plan.hpp"

#include <algorithm>
#include <charconv>

#include "rtnq/error.hpp"

namespace rtnq {
namespace {

struct Token {
    std::string_view key;
    std::string_view value;
    std::size_t key_off = 0;
    std::size_t value_off = 0;
};

std::vector<Token> lex(std::string_view text) {
    std::vector<Token> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (text[pos] == ' ') {
            ++pos;
            continue;
        }
        std::size_t end = text.find(' ', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view tok = text.substr(pos, end - pos);
        const std::size_t colon = tok.find(':');
        if (colon == std::string_view::npos)
            throw PlanError("expected '<field>:<value>', got '" + std::string(tok) + "'", pos);
        out.push_back({tok.substr(0, colon), tok.substr(colon + 1), pos, pos + colon + 1});
        pos = end;
    }
    return out;
}

std::int64_t parse_int(std::string_view s, std::size_t off, const char* what) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw PlanError("malformed " + std::string(what) + " '" + std::string(s) + "'", off);
    if (v < 0) throw PlanError(std::string(what) + " must be non-negative", off);
    return v;
}

BitWidth parse_width(std::string_view s, std::size_t off) {
    if (s == "4") return BitWidth::b4;
    if (s == "8") return BitWidth::b8;
    throw PlanError("unsupported bit width '" + std::string(s) + "' (expected 4 or 8)", off);
}

// Walks a separator-joined list, reporting each item with its byte offset.
template <typename Fn>
void for_each_item(std::string_view list, std::size_t off, char sep, Fn&& fn) {
    std::size_t pos = 0;
    while (true) {
        std::size_t end = list.find(sep, pos);
        if (end == std::string_view::npos) end = list.size();
        fn(list.substr(pos, end - pos), off + pos);
        if (end == list.size()) break;
        pos = end + 1;
    }
}

VerticalMask parse_modules(std::string_view value, std::size_t off) {
    if (value == "none") return VerticalMask::none();
    if (value.empty()) throw PlanError("module list is empty", off);
    VerticalMask mask = VerticalMask::none();
    for_each_item(value, off, '+', [&](std::string_view item, std::size_t item_off) {
        const std::int64_t id = parse_int(item, item_off, "module id");
        if (id < 1 || id > kModuleCount)
            throw PlanError("unknown module id '" + std::string(item) + "'", item_off);
        const auto m = static_cast<ModuleId>(id);
        if (mask.has(m))
            throw PlanError("duplicate module id '" + std::string(item) + "'", item_off);
        mask.add(m);
    });
    return mask;
}

std::vector<std::int64_t> parse_layer_list(std::string_view value, std::size_t off) {
    if (value.empty()) throw PlanError("explicit layer list is empty", off);
    std::vector<std::int64_t> layers;
    for_each_item(value, off, ',', [&](std::string_view item, std::size_t item_off) {
        const std::int64_t idx = parse_int(item, item_off, "layer index");
        if (std::find(layers.begin(), layers.end(), idx) != layers.end())
            throw PlanError("duplicate layer index '" + std::string(item) + "'", item_off);
        layers.push_back(idx);
    });
    std::sort(layers.begin(), layers.end());
    return layers;
}

}  // namespace

SelectionPlan parse_plan(std::string_view text) {
    const auto toks = lex(text);
    if (toks.empty()) throw PlanError("empty plan", 0);

    SelectionPlan plan;
    auto& h = plan.horizontal;
    const Token& head = toks[0];
    using Kind = HorizontalStrategy::Kind;
    if (head.key == "first") {
        h.kind = Kind::first;
    } else if (head.key == "middle") {
        h.kind = Kind::middle;
    } else if (head.key == "last") {
        h.kind = Kind::last;
    } else if (head.key == "explicit") {
        h.kind = Kind::explicit_list;
    } else {
        throw PlanError("unknown strategy '" + std::string(head.key) + "'", head.key_off);
    }
    if (h.kind == Kind::explicit_list)
        h.layers = parse_layer_list(head.value, head.value_off);
    else
        h.x = parse_int(head.value, head.value_off, "layer count");

    // Optional fields must follow in grammar order, each at most once.
    bool have_modules = false, have_base = false, have_high = false;
    std::size_t width_off = 0;
    for (std::size_t i = 1; i < toks.size(); ++i) {
        const Token& t = toks[i];
        if (t.key == "modules") {
            if (have_modules || have_base || have_high)
                throw PlanError("field 'modules' repeated or out of order", t.key_off);
            plan.vertical = parse_modules(t.value, t.value_off);
            have_modules = true;
        } else if (t.key == "base") {
            if (have_base || have_high)
                throw PlanError("field 'base' repeated or out of order", t.key_off);
            plan.base_bits = parse_width(t.value, t.value_off);
            have_base = true;
            width_off = t.value_off;
        } else if (t.key == "high") {
            if (have_high) throw PlanError("duplicate field 'high'", t.key_off);
            plan.high_bits = parse_width(t.value, t.value_off);
            have_high = true;
            width_off = t.value_off;
        } else {
            throw PlanError("unknown field '" + std::string(t.key) + "'", t.key_off);
        }
    }

    if (bit_count(plan.high_bits) <= bit_count(plan.base_bits))
        throw PlanError("high bits must exceed base bits", width_off);
    return plan;
}

std::string render_plan(const SelectionPlan& plan) {
    using Kind = HorizontalStrategy::Kind;
    const auto& h = plan.horizontal;
    std::string out;
    switch (h.kind) {
        case Kind::first: out = "first:" + std::to_string(h.x); break;
        case Kind::middle: out = "middle:" + std::to_string(h.x); break;
        case Kind::last: out = "last:" + std::to_string(h.x); break;
        case Kind::explicit_list: {
            out = "explicit:";
            auto sorted = h.layers;
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t i = 0; i < sorted.size(); ++i) {
                if (i) out += ',';
                out += std::to_string(sorted[i]);
            }
            break;
        }
    }
    out += " modules:";
    if (plan.vertical.count() == 0) {
        out += "none";
    } else {
        bool first = true;
        for (ModuleId m : kAllModules) {
            if (!plan.vertical.has(m)) continue;
            if (!first) out += '+';
            out += std::to_string(static_cast<int>(m));
            first = false;
        }
    }
    out += " base:" + std::to_string(bit_count(plan.base_bits));
    out += " high:" + std::to_string(bit_count(plan.high_bits));
    return out;
}

PrecisionAssignment resolve_plan(const SelectionPlan& plan, std::int64_t n) {
    if (n < 1) throw InvalidInputError("layer count must be at least 1");
    if (bit_count(plan.high_bits) <= bit_count(plan.base_bits))
        throw PlanError("high bits must exceed base bits");

    auto assign = PrecisionAssignment::uniform(n, plan.base_bits);
    const auto mark = [&](std::int64_t layer) {
        for (ModuleId m : kAllModules)
            if (plan.vertical.has(m)) assign.at(layer, m) = plan.high_bits;
    };

    using Kind = HorizontalStrategy::Kind;
    const auto& h = plan.horizontal;
    if (h.kind == Kind::explicit_list) {
        for (std::int64_t idx : h.layers) {
            if (idx >= n)
                throw PlanError("layer index " + std::to_string(idx) +
                                " out of range for " + std::to_string(n) + " layers");
            mark(idx);
        }
        return assign;
    }

    if (h.x > n)
        throw PlanError("plan selects " + std::to_string(h.x) + " layers but the model has " +
                        std::to_string(n));
    std::int64_t start = 0;
    switch (h.kind) {
        case Kind::first: start = 0; break;
        case Kind::middle: start = (n - h.x) / 2; break;
        case Kind::last: start = n - h.x; break;
        case Kind::explicit_list: break;  // handled above
    }
    for (std::int64_t l = start; l < start + h.x; ++l) mark(l);
    return assign;
}

double effective_bits(const PrecisionAssignment& assign, const ModelManifest& manifest,
                      bool include_scales) {
    if (assign.layer_count != manifest.layer_count)
        throw InvalidInputError("assignment covers " + std::to_string(assign.layer_count) +
                                " layers but the manifest has " +
                                std::to_string(manifest.layer_count));
    manifest.validate();

    // Exact integer sums, one division at the end. The largest supported
    // manifest (70B-class) keeps the numerator below 2^40.
    std::int64_t weight_bits = 0;
    const std::int64_t total = manifest.total_params();
    for (std::int64_t l = 0; l < manifest.layer_count; ++l)
        for (ModuleId m : kAllModules)
            weight_bits += static_cast<std::int64_t>(bit_count(assign.at(l, m))) *
                           manifest.params(m);

    double bits = static_cast<double>(weight_bits) / static_cast<double>(total);
    if (include_scales) {
        std::int64_t groups = 0;
        for (ModuleId m : kAllModules) groups += manifest.groups(m);
        groups *= manifest.layer_count;
        bits += 16.0 * static_cast<double>(groups) / static_cast<double>(total);
    }
    return bits;
}

void ModelManifest::validate() const {
    if (layer_count < 1) throw InvalidInputError("manifest needs at least one layer");
    for (ModuleId m : kAllModules) {
        const ModuleShape& s = shape(m);
        if (s.rows < 1 || s.cols < 1)
            throw InvalidInputError("module " + std::to_string(static_cast<int>(m)) +
                                    " has empty shape");
        group.groups_per_row(s.cols);  // throws on incompatible grouping
    }
}

ModelManifest make_uniform_manifest(std::int64_t layers, std::int64_t rows,
                                    std::int64_t cols, GroupSpec group) {
    ModelManifest m;
    m.name = "uniform";
    m.layer_count = layers;
    m.group = group;
    for (ModuleId id : kAllModules) m.shape(id) = ModuleShape{rows, cols};
    m.validate();
    return m;
}

ModelManifest make_70b_manifest() {
    ModelManifest m;
    m.name = "decoder-70b";
    m.layer_count = 80;
    m.group = GroupSpec{128};
    m.shape(ModuleId::qkv_proj) = ModuleShape{8192 + 2 * 1024, 8192};
    m.shape(ModuleId::attn_out_proj) = ModuleShape{8192, 8192};
    m.shape(ModuleId::ffn_up) = ModuleShape{2 * 28672, 8192};
    m.shape(ModuleId::ffn_down) = ModuleShape{8192, 28672};
    m.validate();
    return m;
}

}  // namespace rtnq
