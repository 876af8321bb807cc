// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: generate, quantize, inspect, evaluate and benchmark
// checkpoints. Exit codes: 0 success, 2 plan errors, 3 I/O or corrupt-file
// errors, 1 anything else. Diagnostics go to stderr prefixed "error:".
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rtnq/bench.hpp"
#include "rtnq/error.hpp"
#include "rtnq/eval.hpp"
#include "rtnq/plan.hpp"
#include "rtnq/store.hpp"
#include "rtnq/threading.hpp"
#include "rtnq/toy.hpp"

namespace {

using namespace rtnq;

std::string fmt9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

const char* module_name(ModuleId m) {
    switch (m) {
        case ModuleId::qkv_proj: return "qkv_proj";
        case ModuleId::attn_out_proj: return "attn_out_proj";
        case ModuleId::ffn_up: return "ffn_up";
        case ModuleId::ffn_down: return "ffn_down";
    }
    return "?";
}

int dtype_bits(const std::string& dtype) {
    if (dtype == "f32") return 32;
    if (dtype == "q8") return 8;
    if (dtype == "q4") return 4;
    throw CorruptDataError("unknown dtype '" + dtype + "'");
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os.is_open()) throw IoError("cannot open '" + path + "' for writing");
    os << text;
    if (!os.good()) throw IoError("failed writing '" + path + "'");
}

void emit(const std::string& text, const std::string& csv_path) {
    if (csv_path.empty()) {
        std::cout << text;
    } else {
        write_text_file(csv_path, text);
        std::cout << "wrote " << csv_path << "\n";
    }
}

int cmd_gen(const ToyTransformerConfig& config, std::uint64_t seed,
            const std::string& out) {
    gen_synthetic_checkpoint(config, seed, out);
    const auto info = inspect_checkpoint(out);
    std::cout << "wrote " << out << " (" << info.tensors.size() << " tensors, "
              << info.file_bytes << " bytes)\n";
    return 0;
}

int cmd_quantize(const std::string& in, const std::string& plan_text,
                 std::optional<GroupSpec> group, const std::string& out) {
    const SelectionPlan plan = parse_plan(plan_text);
    const QuantModel qm = quantize_on_load(in, plan, group);
    const double bits =
        effective_bits(resolve_plan(plan, qm.manifest.layer_count), qm.manifest);
    std::cout << "effective bits: " << fmt9(bits) << "\n";
    write_checkpoint(qm, out);
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_inspect(const std::string& in) {
    const CheckpointInfo info = inspect_checkpoint(in);
    const ModelManifest& m = info.manifest;
    std::cout << "name: " << m.name << "\n";
    std::cout << "layers: " << m.layer_count << "\n";
    std::cout << "group: " << m.group.g << (m.group.allow_ragged ? " (ragged)" : "")
              << "\n";
    std::cout << "layout: "
              << (m.layout.interleaved() ? "kernel_interleaved" : "row_major");
    if (m.layout.interleaved())
        std::cout << " " << m.layout.tile_rows << "x" << m.layout.tile_cols;
    std::cout << "\n";
    if (m.plan_text) std::cout << "plan: " << *m.plan_text << "\n";
    if (m.toy)
        std::cout << "toy: dim=" << m.toy->dim << " heads=" << m.toy->heads
                  << " ffn=" << m.toy->ffn << " seq=" << m.toy->seq
                  << " seed=" << m.toy->seed << "\n";
    std::cout << "modules:\n";
    for (ModuleId id : kAllModules)
        std::cout << "  " << static_cast<int>(id) << " " << module_name(id) << " "
                  << m.shape(id).rows << " x " << m.shape(id).cols << "\n";

    std::int64_t bit_sum = 0, param_sum = 0;
    std::cout << "tensors:\n";
    for (const TensorRecord& r : info.tensors) {
        std::cout << "  layer " << r.layer << " " << module_name(r.module) << " "
                  << r.dtype << " data " << r.data_len << " B scales " << r.scales_len
                  << " B\n";
        const std::int64_t params = m.params(r.module);
        bit_sum += std::int64_t(dtype_bits(r.dtype)) * params;
        param_sum += params;
    }
    std::cout << "payload bytes: " << info.payload_bytes << "\n";
    std::cout << "file bytes: " << info.file_bytes << "\n";
    if (param_sum > 0)
        std::cout << "effective bits: " << fmt9(double(bit_sum) / double(param_sum))
                  << "\n";
    return 0;
}

std::vector<FloatTensor> eval_inputs(const ModelManifest& manifest, int count) {
    const ToyTransformerConfig cfg = toy_config_of(manifest);
    std::vector<FloatTensor> inputs;
    for (int i = 0; i < count; ++i) inputs.push_back(make_toy_input(cfg, i));
    return inputs;
}

int cmd_eval_compare(const FloatModel& model, const std::string& plan_text,
                     std::optional<GroupSpec> group, int input_count,
                     std::int64_t threshold) {
    const SelectionPlan plan = parse_plan(plan_text);
    const QuantModel qm = quantize_model(model, plan, group);
    const ErrorReport report =
        compare(model, qm, eval_inputs(model.manifest, input_count), threshold);
    std::cout << "plan: " << report.plan_text << "\n";
    std::cout << "effective bits: " << fmt9(report.effective_bits) << "\n";
    std::cout << "max logit deviation: " << fmt9(report.max_logit_dev) << "\n";
    std::cout << "mean KL: " << fmt9(report.mean_kl) << "\n";
    return 0;
}

int cmd_eval_sweep(const FloatModel& model, const std::string& mode, int input_count,
                   std::int64_t threshold, const std::string& csv_path) {
    const auto inputs = eval_inputs(model.manifest, input_count);
    std::vector<SweepRow> rows;
    const auto run_horizontal = [&] {
        for (auto kind : {HorizontalStrategy::Kind::first, HorizontalStrategy::Kind::middle,
                          HorizontalStrategy::Kind::last}) {
            const auto part = horizontal_sweep(model, kind, inputs, threshold);
            rows.insert(rows.end(), part.begin(), part.end());
        }
    };
    const auto run_vertical = [&] {
        const auto part = vertical_sweep(model, inputs, threshold);
        rows.insert(rows.end(), part.begin(), part.end());
    };
    if (mode == "horizontal") {
        run_horizontal();
    } else if (mode == "vertical") {
        run_vertical();
    } else if (mode == "all") {
        run_horizontal();
        run_vertical();
    } else {
        throw InvalidInputError("unknown sweep mode '" + mode + "'");
    }
    emit(sweep_to_csv(rows), csv_path);
    return 0;
}

int cmd_bench(const std::string& in, std::optional<GroupSpec> group,
              const BenchOptions& base, std::int64_t threshold,
              const std::string& csv_path) {
    std::vector<BenchShape> shapes;
    BenchOptions options = base;
    ModelManifest manifest;
    if (in.empty()) {
        manifest = make_toy_manifest(ToyTransformerConfig{});
    } else {
        manifest = inspect_checkpoint(in).manifest;
    }
    for (ModuleId id : kAllModules)
        shapes.push_back({manifest.shape(id).cols, manifest.shape(id).rows});
    options.group = group ? *group : manifest.group;

    const auto records = bench_sweep(shapes, options);
    emit(bench_to_csv(records, threads(), threshold), csv_path);

    const CrossoverReport crossover = find_crossover(records);
    for (const auto& s : crossover.shapes) {
        std::cout << "crossover k=" << s.shape.k << " n=" << s.shape.n << ": ";
        if (s.m)
            std::cout << "m=" << *s.m << "\n";
        else
            std::cout << "none\n";
    }
    if (crossover.recommended_threshold)
        std::cout << "recommended threshold: " << *crossover.recommended_threshold
                  << "\n";
    else
        std::cout << "recommended threshold: none observed\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"group-wise 4/8-bit weight quantization toolkit"};
    app.require_subcommand(1);
    app.failure_message([](const CLI::App*, const CLI::Error& e) {
        return std::string("error: ") + e.what() + "\n";
    });

    int threads_flag = 0;
    app.add_option("--threads", threads_flag, "worker thread count (default: hardware)");

    // gen
    auto* gen = app.add_subcommand("gen", "write a synthetic float checkpoint");
    ToyTransformerConfig gen_cfg;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--layers", gen_cfg.layers, "decoder layer count");
    gen->add_option("--dim", gen_cfg.dim, "model width");
    gen->add_option("--heads", gen_cfg.heads, "attention heads");
    gen->add_option("--ffn", gen_cfg.ffn, "feed-forward width");
    gen->add_option("--seq", gen_cfg.seq, "default sequence length");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output checkpoint path")->required();

    // quantize
    auto* quant = app.add_subcommand("quantize", "quantize a float checkpoint");
    std::string quant_in, quant_plan = "first:0", quant_out;
    std::int64_t quant_group = 128;
    quant->add_option("checkpoint", quant_in, "input float checkpoint")->required();
    quant->add_option("--plan", quant_plan, "selection plan text");
    auto* quant_group_opt =
        quant->add_option("--group", quant_group, "group size (default: manifest's)");
    quant->add_option("--out", quant_out, "output checkpoint path")->required();

    // inspect
    auto* inspect = app.add_subcommand("inspect", "print a checkpoint's manifest");
    std::string inspect_in;
    inspect->add_option("checkpoint", inspect_in, "checkpoint path")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "measure plan distortion on a checkpoint");
    std::string eval_in, eval_plan, eval_sweep = "all", eval_csv;
    std::int64_t eval_group = 128, eval_threshold = kDefaultGemmThreshold;
    int eval_inputs_count = 2;
    eval->add_option("checkpoint", eval_in, "float checkpoint to evaluate")->required();
    auto* eval_plan_opt =
        eval->add_option("--plan", eval_plan, "compare this plan against f32");
    eval->add_option("--sweep", eval_sweep, "sweep mode: horizontal, vertical or all");
    auto* eval_group_opt =
        eval->add_option("--group", eval_group, "group size (default: manifest's)");
    eval->add_option("--threshold", eval_threshold, "gemm dispatch threshold");
    eval->add_option("--inputs", eval_inputs_count, "number of PRNG eval inputs");
    eval->add_option("--csv", eval_csv, "write sweep CSV here instead of stdout");

    // bench
    auto* bench = app.add_subcommand("bench", "time the GEMM paths");
    std::string bench_in, bench_csv;
    std::int64_t bench_group = 128, bench_threshold = kDefaultGemmThreshold;
    BenchOptions bench_options;
    bench->add_option("checkpoint", bench_in, "checkpoint supplying shapes (default: toy)");
    auto* bench_group_opt =
        bench->add_option("--group", bench_group, "group size (default: manifest's)");
    bench->add_option("--threshold", bench_threshold, "threshold recorded in the CSV");
    bench->add_option("--seed", bench_options.seed, "PRNG seed for weights/activations");
    bench->add_option("--reps", bench_options.reps, "timed repetitions per record");
    bench->add_option("--m", bench_options.m_values,
                      "token counts to sweep (default: 1..4096)");
    bench->add_option("--csv", bench_csv, "write CSV here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help or the failure message
        return code == 0 ? 0 : 1;
    }

    try {
        if (threads_flag > 0) set_threads(threads_flag);
        const auto group_of = [](const CLI::Option* opt,
                                 std::int64_t g) -> std::optional<GroupSpec> {
            if (opt->count() == 0) return std::nullopt;
            return GroupSpec{g, false};
        };

        if (gen->parsed()) return cmd_gen(gen_cfg, gen_seed, gen_out);
        if (quant->parsed())
            return cmd_quantize(quant_in, quant_plan,
                                group_of(quant_group_opt, quant_group), quant_out);
        if (inspect->parsed()) return cmd_inspect(inspect_in);
        if (eval->parsed()) {
            const FloatModel model = load_float_checkpoint(eval_in);
            if (eval_plan_opt->count() > 0)
                return cmd_eval_compare(model, eval_plan,
                                        group_of(eval_group_opt, eval_group),
                                        eval_inputs_count, eval_threshold);
            return cmd_eval_sweep(model, eval_sweep, eval_inputs_count, eval_threshold,
                                  eval_csv);
        }
        if (bench->parsed())
            return cmd_bench(bench_in, group_of(bench_group_opt, bench_group),
                             bench_options, bench_threshold, bench_csv);
        throw InvalidInputError("no subcommand given");
    } catch (const PlanError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const CorruptDataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
