// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rtnq/manifest.hpp"
#include "rtnq/plan.hpp"
#include "rtnq/quant.hpp"
#include "rtnq/types.hpp"

namespace rtnq {

// Checkpoint container layout (all integers little-endian):
//
//   bytes 0..7    magic "RTNCKPT1"
//   bytes 8..15   u64 manifest length in bytes
//   bytes 16..    manifest: JSON with sorted keys (byte-deterministic)
//   zero padding up to the next 64-byte boundary = payload base
//   blobs, each starting 64-byte aligned; record offsets are relative to
//   the payload base
//
// Float tensors store raw f32 row-major data and no scales. Quantized
// tensors store packed offset-binary codes in logical row-major order
// (ceil(rows*cols*bits/8) bytes) plus IEEE-half scales; the manifest's
// layout tag says which in-memory layout the loader should produce, the
// file bytes themselves are always row-major.
inline constexpr char kCheckpointMagic[8] = {'R', 'T', 'N', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint64_t kBlobAlign = 64;

// One stored tensor. dtype is "f32", "q8" or "q4"; shapes live in the
// manifest's module table. scales_len is 0 for f32 tensors.
struct TensorRecord {
    std::int64_t layer = 0;
    ModuleId module = ModuleId::qkv_proj;
    std::string dtype;
    std::uint64_t data_off = 0;
    std::uint64_t data_len = 0;
    std::uint64_t scales_off = 0;
    std::uint64_t scales_len = 0;
};

// Parsed header of a checkpoint, no tensor bytes loaded.
struct CheckpointInfo {
    ModelManifest manifest;
    std::vector<TensorRecord> tensors;  // layer-major, module order 1..4
    std::uint64_t payload_bytes = 0;    // sum of record lengths, padding excluded
    std::uint64_t file_bytes = 0;
};

// Full-precision model in memory. tensors[layer * 4 + module_index].
struct FloatModel {
    ModelManifest manifest;
    std::vector<FloatTensor> tensors;

    FloatTensor& tensor(std::int64_t layer, ModuleId m) {
        return tensors[static_cast<std::size_t>(layer) * kModuleCount + module_index(m)];
    }
    const FloatTensor& tensor(std::int64_t layer, ModuleId m) const {
        return tensors[static_cast<std::size_t>(layer) * kModuleCount + module_index(m)];
    }
};

// Quantized model in memory; every tensor shares manifest.layout and
// manifest.group, bit widths vary per tensor as the plan dictated.
struct QuantModel {
    ModelManifest manifest;
    std::vector<QuantTensor> tensors;

    QuantTensor& tensor(std::int64_t layer, ModuleId m) {
        return tensors[static_cast<std::size_t>(layer) * kModuleCount + module_index(m)];
    }
    const QuantTensor& tensor(std::int64_t layer, ModuleId m) const {
        return tensors[static_cast<std::size_t>(layer) * kModuleCount + module_index(m)];
    }
};

// Float-buffer residency accounting for the streaming-load guarantee: the
// loader never holds more than one tensor's float data at a time.
struct LoadStats {
    std::int64_t current_float_bytes = 0;
    std::int64_t peak_float_bytes = 0;

    void alloc(std::int64_t n) {
        current_float_bytes += n;
        peak_float_bytes = std::max(peak_float_bytes, current_float_bytes);
    }
    void release(std::int64_t n) { current_float_bytes -= n; }
};

// Writers produce byte-identical files for identical input. Throws
// InvalidInputError/ShapeError on model-manifest mismatches, IoError on
// filesystem failures.
void write_checkpoint(const FloatModel& model, const std::string& path);
void write_checkpoint(const QuantModel& model, const std::string& path);

// Header-only read: manifest plus tensor records. Throws CorruptDataError
// on malformed content, IoError when the file cannot be read.
CheckpointInfo inspect_checkpoint(const std::string& path);

// Whole-model readers. Each checks that the file holds the expected tensor
// kind (InvalidInputError otherwise) and validates blob shapes against the
// manifest (CorruptDataError).
FloatModel load_float_checkpoint(const std::string& path);
QuantModel load_quant_checkpoint(const std::string& path);

// Streams a float checkpoint into a quantized model: each tensor is read,
// quantized to the width resolve_plan(plan) assigns, packed and reshuffled
// to the kernel layout, then its float buffer is dropped before the next
// tensor is touched. group overrides the manifest's group spec when given.
// stats (optional) reports the float-residency watermark.
QuantModel quantize_on_load(const std::string& path, const SelectionPlan& plan,
                            std::optional<GroupSpec> group = std::nullopt,
                            LoadStats* stats = nullptr);

// In-memory counterpart of quantize_on_load for models that are already
// loaded; produces the identical QuantModel a write/quantize_on_load cycle
// would.
QuantModel quantize_model(const FloatModel& model, const SelectionPlan& plan,
                          std::optional<GroupSpec> group = std::nullopt);

// Hex SHA-256 of a whole file. Throws IoError when unreadable.
std::string sha256_file(const std::string& path);

}  // namespace rtnq
