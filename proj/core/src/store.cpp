// SPDX-License-Identifier: Apache-2.0
#include "rtnq/store.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "rtnq/error.hpp"
#include "rtnq/f16.hpp"
#include "rtnq/packing.hpp"

namespace rtnq {
namespace {

using nlohmann::json;

std::uint64_t align_up(std::uint64_t n, std::uint64_t a) { return (n + a - 1) / a * a; }

const char* dtype_name(BitWidth b) { return b == BitWidth::b4 ? "q4" : "q8"; }

json layout_to_json(const LayoutTag& t) {
    return json{{"kind", t.interleaved() ? "kernel_interleaved" : "row_major"},
                {"tile_rows", t.tile_rows},
                {"tile_cols", t.tile_cols}};
}

LayoutTag layout_from_json(const json& j) {
    LayoutTag t;
    t.tile_rows = j.at("tile_rows").get<std::int32_t>();
    t.tile_cols = j.at("tile_cols").get<std::int32_t>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "kernel_interleaved")
        t.kind = LayoutTag::Kind::kernel_interleaved;
    else if (kind == "row_major")
        t.kind = LayoutTag::Kind::row_major;
    else
        throw CorruptDataError("unknown layout kind '" + kind + "'");
    return t;
}

json manifest_to_json(const ModelManifest& m) {
    json mods = json::array();
    for (ModuleId id : kAllModules)
        mods.push_back(json{{"id", static_cast<int>(id)},
                            {"rows", m.shape(id).rows},
                            {"cols", m.shape(id).cols}});
    json j{{"format", 1},
           {"name", m.name},
           {"layers", m.layer_count},
           {"group", json{{"g", m.group.g}, {"ragged", m.group.allow_ragged}}},
           {"layout", layout_to_json(m.layout)},
           {"modules", mods}};
    if (m.plan_text) j["plan"] = *m.plan_text;
    if (m.toy)
        j["toy"] = json{{"dim", m.toy->dim},
                        {"heads", m.toy->heads},
                        {"ffn", m.toy->ffn},
                        {"seq", m.toy->seq},
                        {"seed", m.toy->seed}};
    return j;
}

ModelManifest manifest_from_json(const json& j) {
    if (j.at("format").get<int>() != 1)
        throw CorruptDataError("unsupported checkpoint format version");
    ModelManifest m;
    m.name = j.at("name").get<std::string>();
    m.layer_count = j.at("layers").get<std::int64_t>();
    m.group.g = j.at("group").at("g").get<std::int64_t>();
    m.group.allow_ragged = j.at("group").at("ragged").get<bool>();
    m.layout = layout_from_json(j.at("layout"));
    const json& mods = j.at("modules");
    if (!mods.is_array() || mods.size() != kModuleCount)
        throw CorruptDataError("manifest must list exactly four modules");
    for (const json& rec : mods) {
        const int id = rec.at("id").get<int>();
        if (id < 1 || id > kModuleCount)
            throw CorruptDataError("module id out of range in manifest");
        auto& shape = m.shape(static_cast<ModuleId>(id));
        shape.rows = rec.at("rows").get<std::int64_t>();
        shape.cols = rec.at("cols").get<std::int64_t>();
    }
    if (j.contains("plan")) m.plan_text = j.at("plan").get<std::string>();
    if (j.contains("toy")) {
        ToyInfo t;
        t.dim = j.at("toy").at("dim").get<std::int64_t>();
        t.heads = j.at("toy").at("heads").get<std::int64_t>();
        t.ffn = j.at("toy").at("ffn").get<std::int64_t>();
        t.seq = j.at("toy").at("seq").get<std::int64_t>();
        t.seed = j.at("toy").at("seed").get<std::uint64_t>();
        m.toy = t;
    }
    return m;
}

void write_zeros(std::ofstream& os, std::uint64_t count) {
    static const char zeros[256] = {};
    while (count > 0) {
        const std::uint64_t chunk = std::min<std::uint64_t>(count, sizeof zeros);
        os.write(zeros, static_cast<std::streamsize>(chunk));
        count -= chunk;
    }
}

// Expected blob lengths for one tensor of the given type.
std::uint64_t data_length(const ModuleShape& s, const std::string& dtype) {
    const std::uint64_t elems = static_cast<std::uint64_t>(s.rows) * s.cols;
    if (dtype == "f32") return elems * 4;
    if (dtype == "q8") return elems;
    if (dtype == "q4") return (elems + 1) / 2;
    throw CorruptDataError("unknown dtype '" + dtype + "'");
}

std::uint64_t scales_length(const ModelManifest& m, ModuleId id, const std::string& dtype) {
    if (dtype == "f32") return 0;
    return static_cast<std::uint64_t>(m.groups(id)) * 2;  // IEEE half per group
}

// Lays out records sequentially, 64-byte aligned, offsets relative to the
// payload base. Returns the payload end.
std::uint64_t assign_offsets(std::vector<TensorRecord>& records) {
    std::uint64_t cursor = 0;
    for (auto& r : records) {
        r.data_off = align_up(cursor, kBlobAlign);
        cursor = r.data_off + r.data_len;
        if (r.scales_len > 0) {
            r.scales_off = align_up(cursor, kBlobAlign);
            cursor = r.scales_off + r.scales_len;
        } else {
            r.scales_off = 0;
        }
    }
    return cursor;
}

json records_to_json(const std::vector<TensorRecord>& records) {
    json arr = json::array();
    for (const auto& r : records)
        arr.push_back(json{{"layer", r.layer},
                           {"module", static_cast<int>(r.module)},
                           {"dtype", r.dtype},
                           {"data_off", r.data_off},
                           {"data_len", r.data_len},
                           {"scales_off", r.scales_off},
                           {"scales_len", r.scales_len}});
    return arr;
}

// Opens the output, writes header + manifest and positions the stream at the
// payload base; emit() is then called once per record to append its blobs.
template <typename Emit>
void write_file(const std::string& path, const ModelManifest& manifest,
                std::vector<TensorRecord>& records, Emit&& emit) {
    assign_offsets(records);
    json j = manifest_to_json(manifest);
    j["tensors"] = records_to_json(records);
    const std::string text = j.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os.is_open()) throw IoError("cannot open '" + path + "' for writing");
    os.write(kCheckpointMagic, sizeof kCheckpointMagic);
    const std::uint64_t mlen = text.size();
    os.write(reinterpret_cast<const char*>(&mlen), sizeof mlen);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    const std::uint64_t base = align_up(16 + text.size(), kBlobAlign);
    write_zeros(os, base - (16 + text.size()));

    std::uint64_t cursor = 0;
    const auto put = [&](std::uint64_t off, const void* data, std::uint64_t len) {
        write_zeros(os, off - cursor);
        os.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
        cursor = off + len;
    };
    for (std::size_t i = 0; i < records.size(); ++i) emit(records[i], put);
    if (!os.good()) throw IoError("write failed for '" + path + "'");
}

void check_model_shape(const ModelManifest& manifest, std::size_t tensor_count) {
    manifest.validate();
    if (tensor_count !=
        static_cast<std::size_t>(manifest.layer_count) * kModuleCount)
        throw ShapeError("model holds " + std::to_string(tensor_count) +
                         " tensors but the manifest expects " +
                         std::to_string(manifest.layer_count * kModuleCount));
}

void read_exact(std::ifstream& is, void* dst, std::uint64_t len, const char* what) {
    is.read(static_cast<char*>(dst), static_cast<std::streamsize>(len));
    if (static_cast<std::uint64_t>(is.gcount()) != len)
        throw CorruptDataError(std::string("truncated checkpoint while reading ") + what);
}

struct OpenCheckpoint {
    std::ifstream file;
    CheckpointInfo info;
    std::uint64_t payload_base = 0;
};

OpenCheckpoint open_checkpoint(const std::string& path) {
    OpenCheckpoint c;
    c.file.open(path, std::ios::binary);
    if (!c.file.is_open()) throw IoError("cannot open '" + path + "'");
    c.file.seekg(0, std::ios::end);
    const std::uint64_t file_size = static_cast<std::uint64_t>(c.file.tellg());
    c.file.seekg(0);

    char magic[8];
    read_exact(c.file, magic, sizeof magic, "magic");
    if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
        throw CorruptDataError("bad checkpoint magic");
    std::uint64_t mlen = 0;
    read_exact(c.file, &mlen, sizeof mlen, "manifest length");
    if (16 + mlen > file_size) throw CorruptDataError("manifest length exceeds file size");

    std::string text(mlen, '\0');
    read_exact(c.file, text.data(), mlen, "manifest");
    json j;
    try {
        j = json::parse(text);
        c.info.manifest = manifest_from_json(j);
    } catch (const json::exception& e) {
        throw CorruptDataError(std::string("malformed manifest: ") + e.what());
    }
    c.info.manifest.validate();

    c.payload_base = align_up(16 + mlen, kBlobAlign);
    if (c.payload_base > file_size) throw CorruptDataError("missing payload");
    const std::uint64_t payload_size = file_size - c.payload_base;

    const json& tensors = j.at("tensors");
    const std::size_t expected =
        static_cast<std::size_t>(c.info.manifest.layer_count) * kModuleCount;
    if (!tensors.is_array() || tensors.size() != expected)
        throw CorruptDataError("checkpoint must hold exactly layers x 4 tensor records");

    std::uint64_t payload_bytes = 0;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const json& rec = tensors[i];
        TensorRecord r;
        try {
            r.layer = rec.at("layer").get<std::int64_t>();
            const int id = rec.at("module").get<int>();
            if (id < 1 || id > kModuleCount)
                throw CorruptDataError("module id out of range in tensor record");
            r.module = static_cast<ModuleId>(id);
            r.dtype = rec.at("dtype").get<std::string>();
            r.data_off = rec.at("data_off").get<std::uint64_t>();
            r.data_len = rec.at("data_len").get<std::uint64_t>();
            r.scales_off = rec.at("scales_off").get<std::uint64_t>();
            r.scales_len = rec.at("scales_len").get<std::uint64_t>();
        } catch (const json::exception& e) {
            throw CorruptDataError(std::string("malformed tensor record: ") + e.what());
        }
        // Records are canonical: layer-major, module order 1..4.
        if (r.layer != static_cast<std::int64_t>(i) / kModuleCount ||
            module_index(r.module) != static_cast<int>(i) % kModuleCount)
            throw CorruptDataError("tensor records out of canonical order");
        if (r.data_len != data_length(c.info.manifest.shape(r.module), r.dtype))
            throw CorruptDataError("tensor data length does not match its shape");
        if (r.scales_len != scales_length(c.info.manifest, r.module, r.dtype))
            throw CorruptDataError("scale blob length does not match the group spec");
        if (r.data_off % kBlobAlign != 0 || r.scales_off % kBlobAlign != 0)
            throw CorruptDataError("unaligned blob offset");
        if (r.data_off + r.data_len > payload_size ||
            r.scales_off + r.scales_len > payload_size)
            throw CorruptDataError("blob extends past end of file");
        payload_bytes += r.data_len + r.scales_len;
        c.info.tensors.push_back(std::move(r));
    }
    c.info.payload_bytes = payload_bytes;
    c.info.file_bytes = file_size;
    return c;
}

FloatTensor read_float_tensor(OpenCheckpoint& c, const TensorRecord& r) {
    const ModuleShape& s = c.info.manifest.shape(r.module);
    FloatTensor t(s.rows, s.cols);
    c.file.seekg(static_cast<std::streamoff>(c.payload_base + r.data_off));
    read_exact(c.file, t.data.data(), r.data_len, "float tensor");
    return t;
}

QuantTensor read_quant_tensor(OpenCheckpoint& c, const TensorRecord& r) {
    const ModuleShape& s = c.info.manifest.shape(r.module);
    QuantTensor q;
    q.rows = s.rows;
    q.cols = s.cols;
    q.bits = r.dtype == "q4" ? BitWidth::b4 : BitWidth::b8;
    q.group = c.info.manifest.group;
    q.layout = LayoutTag::row_major();
    q.data.resize(r.data_len);
    c.file.seekg(static_cast<std::streamoff>(c.payload_base + r.data_off));
    read_exact(c.file, q.data.data(), r.data_len, "quantized tensor");

    std::vector<std::uint16_t> half(r.scales_len / 2);
    c.file.seekg(static_cast<std::streamoff>(c.payload_base + r.scales_off));
    read_exact(c.file, half.data(), r.scales_len, "scales");
    q.scales.resize(half.size());
    for (std::size_t i = 0; i < half.size(); ++i) q.scales[i] = f16_to_f32(half[i]);

    if (c.info.manifest.layout.interleaved()) q = reshuffle(q, c.info.manifest.layout);
    return q;
}

}  // namespace

void write_checkpoint(const FloatModel& model, const std::string& path) {
    check_model_shape(model.manifest, model.tensors.size());
    std::vector<TensorRecord> records;
    for (std::int64_t l = 0; l < model.manifest.layer_count; ++l) {
        for (ModuleId m : kAllModules) {
            const FloatTensor& t = model.tensor(l, m);
            const ModuleShape& s = model.manifest.shape(m);
            if (t.rows != s.rows || t.cols != s.cols ||
                t.data.size() != static_cast<std::size_t>(s.rows * s.cols))
                throw ShapeError("float tensor does not match its manifest shape");
            TensorRecord r;
            r.layer = l;
            r.module = m;
            r.dtype = "f32";
            r.data_len = data_length(s, r.dtype);
            records.push_back(r);
        }
    }
    write_file(path, model.manifest, records, [&](const TensorRecord& r, auto&& put) {
        const FloatTensor& t = model.tensor(r.layer, r.module);
        put(r.data_off, t.data.data(), r.data_len);
    });
}

void write_checkpoint(const QuantModel& model, const std::string& path) {
    check_model_shape(model.manifest, model.tensors.size());
    std::vector<TensorRecord> records;
    for (std::int64_t l = 0; l < model.manifest.layer_count; ++l) {
        for (ModuleId m : kAllModules) {
            const QuantTensor& q = model.tensor(l, m);
            const ModuleShape& s = model.manifest.shape(m);
            if (q.rows != s.rows || q.cols != s.cols)
                throw ShapeError("quantized tensor does not match its manifest shape");
            if (!(q.group == model.manifest.group) || !(q.layout == model.manifest.layout))
                throw ShapeError("tensor group/layout disagrees with the manifest");
            TensorRecord r;
            r.layer = l;
            r.module = m;
            r.dtype = dtype_name(q.bits);
            r.data_len = data_length(s, r.dtype);
            r.scales_len = scales_length(model.manifest, m, r.dtype);
            if (q.scales.size() * 2 != r.scales_len)
                throw ShapeError("scale count disagrees with the manifest group spec");
            records.push_back(r);
        }
    }
    write_file(path, model.manifest, records, [&](const TensorRecord& r, auto&& put) {
        // File codes are always row-major; undo the kernel interleave here.
        QuantTensor q = reshuffle(model.tensor(r.layer, r.module), LayoutTag::row_major());
        put(r.data_off, q.data.data(), r.data_len);
        std::vector<std::uint16_t> half(q.scales.size());
        for (std::size_t i = 0; i < half.size(); ++i) half[i] = f32_to_f16(q.scales[i]);
        put(r.scales_off, half.data(), r.scales_len);
    });
}

CheckpointInfo inspect_checkpoint(const std::string& path) {
    return open_checkpoint(path).info;
}

FloatModel load_float_checkpoint(const std::string& path) {
    OpenCheckpoint c = open_checkpoint(path);
    FloatModel model;
    model.manifest = c.info.manifest;
    for (const TensorRecord& r : c.info.tensors) {
        if (r.dtype != "f32")
            throw InvalidInputError("checkpoint holds quantized tensors; expected float");
        model.tensors.push_back(read_float_tensor(c, r));
    }
    return model;
}

QuantModel load_quant_checkpoint(const std::string& path) {
    OpenCheckpoint c = open_checkpoint(path);
    QuantModel model;
    model.manifest = c.info.manifest;
    for (const TensorRecord& r : c.info.tensors) {
        if (r.dtype == "f32")
            throw InvalidInputError("checkpoint holds float tensors; expected quantized");
        model.tensors.push_back(read_quant_tensor(c, r));
    }
    return model;
}

QuantModel quantize_on_load(const std::string& path, const SelectionPlan& plan,
                            std::optional<GroupSpec> group, LoadStats* stats) {
    OpenCheckpoint c = open_checkpoint(path);
    for (const TensorRecord& r : c.info.tensors)
        if (r.dtype != "f32")
            throw InvalidInputError("quantize-on-load needs a float checkpoint");

    QuantModel model;
    model.manifest = c.info.manifest;
    if (group) model.manifest.group = *group;
    model.manifest.layout = LayoutTag::kernel();
    model.manifest.plan_text = render_plan(plan);
    model.manifest.validate();  // rejects group/shape mismatches up front

    const PrecisionAssignment assign = resolve_plan(plan, model.manifest.layer_count);
    LoadStats local;
    LoadStats& st = stats ? *stats : local;
    for (const TensorRecord& r : c.info.tensors) {
        // One float tensor lives at a time; quantize, reshuffle, drop.
        FloatTensor t = read_float_tensor(c, r);
        st.alloc(static_cast<std::int64_t>(t.data.size() * sizeof(float)));
        QuantTensor q =
            quantize_tensor(t, assign.at(r.layer, r.module), model.manifest.group);
        st.release(static_cast<std::int64_t>(t.data.size() * sizeof(float)));
        t = FloatTensor();
        model.tensors.push_back(reshuffle(q, model.manifest.layout));
    }
    return model;
}

QuantModel quantize_model(const FloatModel& model, const SelectionPlan& plan,
                          std::optional<GroupSpec> group) {
    QuantModel out;
    out.manifest = model.manifest;
    if (group) out.manifest.group = *group;
    out.manifest.layout = LayoutTag::kernel();
    out.manifest.plan_text = render_plan(plan);
    out.manifest.validate();
    if (model.tensors.size() !=
        static_cast<std::size_t>(out.manifest.layer_count) * kModuleCount)
        throw ShapeError("float model tensor count does not match its manifest");

    const PrecisionAssignment assign = resolve_plan(plan, out.manifest.layer_count);
    out.tensors.reserve(model.tensors.size());
    for (std::int64_t layer = 0; layer < out.manifest.layer_count; ++layer) {
        for (ModuleId m : kAllModules) {
            QuantTensor q = quantize_tensor(model.tensor(layer, m), assign.at(layer, m),
                                            out.manifest.group);
            out.tensors.push_back(reshuffle(q, out.manifest.layout));
        }
    }
    return out;
}

std::string sha256_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is.is_open()) throw IoError("cannot open '" + path + "'");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw Error("EVP context allocation failed");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[65536];
    while (is) {
        is.read(buf, sizeof buf);
        if (is.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(is.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);

    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0x0f]);
    }
    return out;
}

}  // namespace rtnq
