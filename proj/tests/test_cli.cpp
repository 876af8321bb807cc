// SPDX-License-Identifier: Apache-2.0
// End-to-end tests driving the rtnq binary as a subprocess.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int code = -1;
    std::string out;  // stdout and stderr, merged
};

// Runs the CLI with the given argument string and captures merged output.
CmdResult run_cli(const std::string& args) {
    const std::string cmd = std::string(RTNQ_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CmdResult result;
    char buf[4096];
    while (std::fgets(buf, sizeof(buf), pipe) != nullptr) result.out += buf;
    const int status = pclose(pipe);
    result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

// Scratch directory shared by the cases below; unique per process.
fs::path scratch_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() /
                     ("rtnq_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string path_of(const char* name) { return (scratch_dir() / name).string(); }

int count_lines_containing(const std::string& text, const std::string& needle) {
    int count = 0;
    std::size_t pos = 0;
    std::string line;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        if (line.find(needle) != std::string::npos) ++count;
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    return count;
}

}  // namespace

TEST_CASE("cli gen, quantize and inspect form a pipeline") {
    const std::string ckpt = path_of("toy.ckpt");
    const std::string quant = path_of("toy_q.ckpt");

    const CmdResult gen = run_cli("gen --seed 7 --out " + ckpt);
    CHECK(gen.code == 0);
    CHECK(gen.out.find("wrote " + ckpt) != std::string::npos);
    CHECK(gen.out.find("32 tensors") != std::string::npos);
    CHECK(fs::exists(ckpt));

    // first:2 over 8 uniform layers: 4 + 4 * 2/8 = 5 bits exactly.
    const CmdResult q =
        run_cli("quantize " + ckpt + " --plan 'first:2' --out " + quant);
    CHECK(q.code == 0);
    CHECK(q.out.find("effective bits: 5\n") != std::string::npos);
    CHECK(q.out.find("wrote " + quant) != std::string::npos);

    const CmdResult ins = run_cli("inspect " + quant);
    CHECK(ins.code == 0);
    CHECK(ins.out.find("name: toy-decoder") != std::string::npos);
    CHECK(ins.out.find("layers: 8") != std::string::npos);
    CHECK(ins.out.find("plan: first:2 modules:1+2+3+4 base:4 high:8") !=
          std::string::npos);
    CHECK(count_lines_containing(ins.out, " q8 ") == 8);
    CHECK(count_lines_containing(ins.out, " q4 ") == 24);

    const CmdResult ins_f = run_cli("inspect " + ckpt);
    CHECK(ins_f.code == 0);
    CHECK(count_lines_containing(ins_f.out, " f32 ") == 32);
    CHECK(ins_f.out.find("effective bits: 32\n") != std::string::npos);
}

TEST_CASE("cli gen respects shape flags") {
    const std::string ckpt = path_of("small.ckpt");
    // Dims must stay multiples of the pinned toy group size (64).
    const CmdResult gen = run_cli(
        "gen --layers 2 --dim 64 --heads 2 --ffn 64 --seq 8 --seed 1 --out " + ckpt);
    CHECK(gen.code == 0);
    const CmdResult ins = run_cli("inspect " + ckpt);
    CHECK(ins.code == 0);
    CHECK(ins.out.find("layers: 2") != std::string::npos);
    CHECK(count_lines_containing(ins.out, " f32 ") == 8);
}

TEST_CASE("cli quantize honors group override") {
    const std::string ckpt = path_of("toy.ckpt");
    if (!fs::exists(ckpt)) run_cli("gen --seed 7 --out " + ckpt);
    const std::string quant = path_of("toy_g32.ckpt");
    const CmdResult q = run_cli("quantize " + ckpt + " --plan 'first:0' --group 32 --out " +
                                quant);
    CHECK(q.code == 0);
    const CmdResult ins = run_cli("inspect " + quant);
    CHECK(ins.code == 0);
    CHECK(ins.out.find("group: 32") != std::string::npos);
}

TEST_CASE("cli exit codes distinguish failure classes") {
    const std::string ckpt = path_of("toy.ckpt");
    if (!fs::exists(ckpt)) run_cli("gen --seed 7 --out " + ckpt);

    SUBCASE("plan syntax errors exit 2 and name the byte offset") {
        const CmdResult r = run_cli("quantize " + ckpt +
                                    " --plan 'first:zz' --out " + path_of("x.ckpt"));
        CHECK(r.code == 2);
        CHECK(r.out.find("error:") != std::string::npos);
        CHECK(r.out.find("byte") != std::string::npos);
    }
    SUBCASE("missing input files exit 3") {
        const CmdResult r = run_cli("inspect " + path_of("no_such.ckpt"));
        CHECK(r.code == 3);
        CHECK(r.out.find("error:") != std::string::npos);
    }
    SUBCASE("corrupt checkpoints exit 3") {
        const std::string bad = path_of("bad.ckpt");
        std::ofstream f(bad, std::ios::binary);
        f << "NOTACKPTjunkjunkjunkjunkjunkjunkjunkjunkjunkjunk";
        f.close();
        const CmdResult r = run_cli("inspect " + bad);
        CHECK(r.code == 3);
        CHECK(r.out.find("error:") != std::string::npos);
    }
    SUBCASE("usage errors exit 1") {
        CHECK(run_cli("").code == 1);
        CHECK(run_cli("frobnicate").code == 1);
        CHECK(run_cli("quantize").code == 1);  // missing required args
    }
    SUBCASE("help exits 0") {
        const CmdResult r = run_cli("--help");
        CHECK(r.code == 0);
        CHECK(r.out.find("gen") != std::string::npos);
        CHECK(r.out.find("bench") != std::string::npos);
    }
}

TEST_CASE("cli eval reports single-plan metrics") {
    const std::string ckpt = path_of("toy.ckpt");
    if (!fs::exists(ckpt)) run_cli("gen --seed 7 --out " + ckpt);
    const CmdResult r = run_cli("eval " + ckpt + " --plan 'first:8' --inputs 1");
    CHECK(r.code == 0);
    CHECK(r.out.find("plan: first:8 modules:1+2+3+4 base:4 high:8") !=
          std::string::npos);
    CHECK(r.out.find("effective bits: 8\n") != std::string::npos);
    CHECK(r.out.find("max logit deviation:") != std::string::npos);
    CHECK(r.out.find("mean KL:") != std::string::npos);
}

TEST_CASE("cli eval sweep output is deterministic across runs") {
    const std::string ckpt = path_of("toy.ckpt");
    if (!fs::exists(ckpt)) run_cli("gen --seed 7 --out " + ckpt);
    const std::string args = "eval " + ckpt + " --sweep vertical --inputs 1";
    const CmdResult first = run_cli(args);
    const CmdResult second = run_cli(args);
    CHECK(first.code == 0);
    CHECK(second.code == 0);
    CHECK(first.out == second.out);
    CHECK(first.out.rfind("strategy,x_or_mask,effective_bits,max_logit_dev,mean_kl\n",
                          0) == 0);
    // Header plus 16 module masks.
    CHECK(count_lines_containing(first.out, ",") == 17);
}

TEST_CASE("cli bench runs a small sweep and reports a crossover") {
    const std::string ckpt = path_of("toy.ckpt");
    if (!fs::exists(ckpt)) run_cli("gen --seed 7 --out " + ckpt);
    const std::string csv = path_of("bench.csv");
    const CmdResult r =
        run_cli("bench " + ckpt + " --m 1 4 --reps 2 --csv " + csv);
    CHECK(r.code == 0);
    CHECK(r.out.find("crossover k=") != std::string::npos);
    CHECK(r.out.find("recommended threshold:") != std::string::npos);

    std::ifstream f(csv);
    REQUIRE(f.good());
    std::string text((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    CHECK(text.find("path,m,k,n,bits,reps,median_ns,speedup") != std::string::npos);
    // 4 distinct toy shapes, 2 token counts, 3 paths each.
    CHECK(count_lines_containing(text, "float,") == 8);
    CHECK(count_lines_containing(text, "fused,") == 8);
    CHECK(count_lines_containing(text, "dequant,") == 8);
}
