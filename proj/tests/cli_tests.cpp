#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

std::string g_binary;

struct CmdResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr interleaved
};

CmdResult run_cli(const std::string& args) {
    CmdResult r;
    std::string cmd = "TCJEPA_THREADS=2 " + g_binary + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf;
    while (size_t n = fread(buf.data(), 1, buf.size(), pipe)) r.output.append(buf.data(), n);
    int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string tiny_sets() {
    return "--set image_size=16 --set patch_size=4 --set embed_dim=16 --set depth=2 "
           "--set heads=2 --set mlp_ratio=2 --set pred_dim=16 --set pred_depth=2 "
           "--set pred_heads=2 --set pred_mlp_ratio=2 --set steps=3 "
           "--set warmup_steps=1 --set batch_size=1 --set dataset_size=4 "
           "--set n_captions=2 --set log_every=1 --set probe_train_size=16 "
           "--set probe_eval_size=8 --set probe_epochs=5";
}

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("no subcommand is a usage error") {
    CmdResult r = run_cli("");
    CHECK(r.exit_code != 0);
}

TEST_CASE("dry run prints the fully resolved configuration") {
    CmdResult r = run_cli("train --dry-run " + tiny_sets() + " --conditioner fine");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("conditioner=fine\n") != std::string::npos);
    CHECK(r.output.find("image_size=16\n") != std::string::npos);
    CHECK(r.output.find("steps=3\n") != std::string::npos);
}

TEST_CASE("missing config file and unknown keys fail with clear messages") {
    CmdResult r = run_cli("train --dry-run --config /nonexistent/path.cfg");
    CHECK(r.exit_code != 0);
    CHECK(r.output.find("cannot open config file") != std::string::npos);

    r = run_cli("train --dry-run --set bogus_key=1");
    CHECK(r.exit_code != 0);
    CHECK(r.output.find("unknown config keys: bogus_key") != std::string::npos);

    r = run_cli("train --dry-run --conditioner banana");
    CHECK(r.exit_code != 0);
    CHECK(r.output.find("unknown conditioner") != std::string::npos);
}

TEST_CASE("train, probe, export-maps, stats, ablate work end to end") {
    namespace fs = std::filesystem;
    std::string dir = (fs::temp_directory_path() / "tcjepa_cli_run").string();
    fs::remove_all(dir);

    CmdResult t = run_cli("train " + tiny_sets() + " --conditioner fine --out " + dir);
    CHECK(t.exit_code == 0);
    CHECK(t.output.find("trained 3 steps") != std::string::npos);
    std::string metrics = read_file(dir + "/metrics.csv");
    CHECK(metrics.rfind("step,l_predict,l_sparse,l_consistency,total,lr,wd,ema_m\n", 0) == 0);
    // header + one row per logged step
    CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 4);
    CHECK(fs::exists(dir + "/checkpoint.ckpt"));

    CmdResult p = run_cli("probe " + tiny_sets() + " --conditioner fine --checkpoint " +
                          dir + "/checkpoint.ckpt");
    CHECK(p.exit_code == 0);
    CHECK(p.output.find("train_acc=") != std::string::npos);
    CHECK(p.output.find("eval_acc=") != std::string::npos);

    std::string maps_path = dir + "/maps.json";
    CmdResult m = run_cli("export-maps " + tiny_sets() + " --conditioner fine --checkpoint " +
                          dir + "/checkpoint.ckpt --out " + maps_path);
    CHECK(m.exit_code == 0);
    std::string maps = read_file(maps_path);
    CHECK(maps.find("\"records\"") != std::string::npos);
    CHECK(maps.find("\"layer_averaged\"") != std::string::npos);

    // export-maps requires the fine conditioner
    CmdResult bad = run_cli("export-maps " + tiny_sets());
    CHECK(bad.exit_code != 0);

    CmdResult s = run_cli("stats " + tiny_sets() + " --conditioner fine");
    CHECK(s.exit_code == 0);
    CHECK(s.output.find("overhead_ratio=") != std::string::npos);
    CHECK(s.output.find("conditioner_params=") != std::string::npos);

    std::string csv_path = dir + "/fusion.csv";
    CmdResult a = run_cli("ablate --kind fusion " + tiny_sets() +
                          " --conditioner fine --set steps=2 --set warmup_steps=1 --out " +
                          csv_path);
    CHECK(a.exit_code == 0);
    std::string csv = read_file(csv_path);
    CHECK(csv.rfind("kind,point,config_hash,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 strategies
    CHECK(csv.find("fusion,max,") != std::string::npos);
    CHECK(csv.find("fusion,attention,") != std::string::npos);
    CHECK(csv.find("failed") == std::string::npos);

    CmdResult u = run_cli("ablate --kind nonsense");
    CHECK(u.exit_code != 0);
    CHECK(u.output.find("unknown ablation kind") != std::string::npos);

    fs::remove_all(dir);
}

TEST_CASE("metrics files are byte-identical across reruns") {
    namespace fs = std::filesystem;
    std::string d1 = (fs::temp_directory_path() / "tcjepa_cli_det1").string();
    std::string d2 = (fs::temp_directory_path() / "tcjepa_cli_det2").string();
    fs::remove_all(d1);
    fs::remove_all(d2);
    CHECK(run_cli("train " + tiny_sets() + " --out " + d1).exit_code == 0);
    CHECK(run_cli("train " + tiny_sets() + " --out " + d2).exit_code == 0);
    CHECK(read_file(d1 + "/metrics.csv") == read_file(d2 + "/metrics.csv"));
    CHECK(!read_file(d1 + "/metrics.csv").empty());
    fs::remove_all(d1);
    fs::remove_all(d2);
}

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: cli_tests <path-to-binary> [doctest args]\n");
        return 2;
    }
    g_binary = argv[1];
    doctest::Context ctx;
    ctx.applyCommandLine(argc - 1, argv + 1);
    return ctx.run();
}
