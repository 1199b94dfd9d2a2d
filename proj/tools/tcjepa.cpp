#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tcjepa/config.hpp"
#include "tcjepa/gradsuite.hpp"
#include "tcjepa/maps.hpp"
#include "tcjepa/stats.hpp"

namespace {

using namespace tcjepa;

void apply_thread_cap() {
    if (const char* env = std::getenv("TCJEPA_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) kernels::set_threads(n);
    }
}

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string conditioner, fusion;
};

void add_common(CLI::App* app, CommonOpts& o) {
    app->add_option("--config", o.config_path, "flat key=value config file");
    app->add_option("--set", o.sets, "override, key=value (repeatable)");
    app->add_option("--conditioner", o.conditioner,
                    "shorthand for --set conditioner=...");
    app->add_option("--fusion", o.fusion, "shorthand for --set fusion=...");
}

RunConfig resolve(const CommonOpts& o) {
    RunConfig cfg;
    if (!o.config_path.empty()) load_config_file(cfg, o.config_path);
    std::vector<std::string> sets = o.sets;
    if (!o.conditioner.empty()) sets.push_back("conditioner=" + o.conditioner);
    if (!o.fusion.empty()) sets.push_back("fusion=" + o.fusion);
    apply_assignments(cfg, sets);
    return cfg;
}

int cmd_train(const CommonOpts& common, const std::string& out_dir, long ckpt_every,
              const std::string& resume, bool dry_run) {
    RunConfig cfg = resolve(common);
    cfg.train.validate();
    if (dry_run) {
        std::cout << resolved_config(cfg);
        return 0;
    }
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    Trainer<float> trainer(cfg.train);
    std::ofstream metrics;
    if (resume.empty()) {
        metrics.open(fs::path(out_dir) / "metrics.csv", std::ios::trunc);
        metrics << metrics_header() << "\n";
    } else {
        trainer.load(resume);
        metrics.open(fs::path(out_dir) / "metrics.csv", std::ios::app);
    }
    std::string ckpt_path = (fs::path(out_dir) / "checkpoint.ckpt").string();
    while (trainer.step() < cfg.train.steps) {
        StepMetrics m = trainer.train_step();
        if (m.step % cfg.train.log_every == 0 || m.step == cfg.train.steps - 1) {
            metrics << format_metrics(m) << "\n";
            metrics.flush();
        }
        if (ckpt_every > 0 && (m.step + 1) % ckpt_every == 0) trainer.save(ckpt_path);
    }
    trainer.save(ckpt_path);
    std::cout << "trained " << cfg.train.steps << " steps; checkpoint: " << ckpt_path
              << "\n";
    return 0;
}

int cmd_probe(const CommonOpts& common, const std::string& checkpoint) {
    RunConfig cfg = resolve(common);
    cfg.train.validate();
    Trainer<float> trainer(cfg.train);
    if (!checkpoint.empty()) trainer.load(checkpoint);
    ProbeResult r = run_probe(trainer.encoders().target, cfg.train.synth,
                              trainer.vocab(), cfg.probe);
    std::cout << "train_acc=" << r.train_acc << "\n"
              << "eval_acc=" << r.eval_acc << "\n";
    return 0;
}

int cmd_gradcheck() {
    bool ok = true;
    for (const auto& [name, rep] : run_op_gradchecks()) {
        std::cout << name << ": " << rep.describe() << "\n";
        ok = ok && rep.pass;
    }
    GradCheckReport comp = run_composite_gradcheck();
    std::cout << "composite_eq4: " << comp.describe() << "\n";
    ok = ok && comp.pass;
    std::cout << (ok ? "GRADCHECK PASS" : "GRADCHECK FAIL") << "\n";
    return ok ? 0 : 1;
}

int cmd_stats(const CommonOpts& common) {
    RunConfig cfg = resolve(common);
    ModelStats s = compute_stats(cfg.train);
    std::cout << s.describe();
    return 0;
}

int cmd_export_maps(const CommonOpts& common, const std::string& checkpoint,
                    long sample_index, uint64_t mask_seed, const std::string& out_path) {
    RunConfig cfg = resolve(common);
    cfg.train.validate();
    Trainer<float> trainer(cfg.train);
    if (!checkpoint.empty()) trainer.load(checkpoint);
    SynthSample sample = make_sample(cfg.train.synth, trainer.vocab(),
                                     cfg.train.n_captions, cfg.train.seed, sample_index);
    Rng mrng(mask_seed);
    MaskSpec mask = sample_mask(cfg.train.masking, cfg.train.encoder.grid(), mrng);
    nlohmann::json maps =
        export_similarity_maps(trainer.encoders().online, trainer.encoders(),
                               trainer.predictor(), trainer.vocab(), sample, mask);
    if (out_path.empty()) {
        std::cout << maps.dump(2) << "\n";
    } else {
        std::ofstream f(out_path);
        f << maps.dump(2) << "\n";
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

struct AblateRow {
    std::string kind, point;
    uint64_t hash = 0;
    std::string status = "ok";
    StepMetrics last{};
    ProbeResult probe{};
};

AblateRow run_point(const std::string& kind, const std::string& point, RunConfig cfg) {
    AblateRow row;
    row.kind = kind;
    row.point = point;
    row.hash = config_hash(cfg);
    try {
        cfg.train.validate();
        Trainer<float> trainer(cfg.train);
        while (trainer.step() < cfg.train.steps) row.last = trainer.train_step();
        row.probe = run_probe(trainer.encoders().target, cfg.train.synth,
                              trainer.vocab(), cfg.probe);
    } catch (const std::exception& e) {
        row.status = std::string("failed: ") + e.what();
    }
    return row;
}

void print_row(std::ostream& os, const AblateRow& r) {
    os << r.kind << "," << r.point << "," << std::hex << r.hash << std::dec << ","
       << r.last.l_predict << "," << r.last.l_sparse << "," << r.last.l_consistency << ","
       << r.last.total << "," << r.probe.train_acc << "," << r.probe.eval_acc << ",\""
       << r.status << "\"\n";
    os.flush();
}

int cmd_ablate(const CommonOpts& common, const std::string& kind,
               const std::string& out_path) {
    RunConfig base = resolve(common);
    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!out_path.empty()) {
        file.open(out_path, std::ios::trunc);
        os = &file;
    }
    *os << "kind,point,config_hash,l_predict,l_sparse,l_consistency,total,"
           "probe_train,probe_eval,status\n";
    if (kind == "masking_scale") {
        const double tgt[3][2] = {{0.10, 0.15}, {0.15, 0.2}, {0.2, 0.25}};
        const double ctx[3][2] = {{0.75, 0.85}, {0.85, 1.0}, {0.95, 1.0}};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                RunConfig c = base;
                c.train.masking.target_scale_min = tgt[i][0];
                c.train.masking.target_scale_max = tgt[i][1];
                c.train.masking.context_scale_min = ctx[j][0];
                c.train.masking.context_scale_max = ctx[j][1];
                std::string pt = "tgt[" + std::to_string(tgt[i][0]) + ";" +
                                 std::to_string(tgt[i][1]) + "]xctx[" +
                                 std::to_string(ctx[j][0]) + ";" +
                                 std::to_string(ctx[j][1]) + "]";
                print_row(*os, run_point(kind, pt, c));
            }
    } else if (kind == "loss_coeff") {
        for (double r : {0.5, 1.0, 2.5}) {
            RunConfig c = base;
            c.train.loss.lambda *= r;
            c.train.loss.beta *= r;
            print_row(*os, run_point(kind, "r=" + std::to_string(r), c));
        }
    } else if (kind == "n_captions") {
        for (int n : {1, 2, 4, 8}) {
            RunConfig c = base;
            c.train.n_captions = n;
            print_row(*os, run_point(kind, "N=" + std::to_string(n), c));
        }
    } else if (kind == "fusion") {
        for (const char* f : {"max", "avg", "attention"}) {
            RunConfig c = base;
            c.train.predictor.fusion = fusion_from_string(f);
            print_row(*os, run_point(kind, f, c));
        }
    } else if (kind == "conditioner") {
        for (const char* k : {"none", "fine", "sequence", "holistic", "adaln", "feature"}) {
            RunConfig c = base;
            c.train.predictor.conditioner = conditioner_from_string(k);
            print_row(*os, run_point(kind, k, c));
        }
    } else {
        std::cerr << "unknown ablation kind '" << kind
                  << "' (expected masking_scale|loss_coeff|n_captions|fusion|conditioner)\n";
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    apply_thread_cap();
    CLI::App app{"text-conditional masked latent feature prediction"};
    app.require_subcommand(1);

    CommonOpts train_opts, probe_opts, stats_opts, maps_opts, ablate_opts;
    std::string out_dir = "run";
    long ckpt_every = 0;
    std::string resume;
    bool dry_run = false;
    auto* train = app.add_subcommand("train", "run training");
    add_common(train, train_opts);
    train->add_option("--out", out_dir, "output directory");
    train->add_option("--ckpt-every", ckpt_every, "checkpoint every K steps (0 = end only)");
    train->add_option("--resume", resume, "resume from checkpoint");
    train->add_flag("--dry-run", dry_run, "print resolved config and exit");

    std::string probe_ckpt;
    auto* probe = app.add_subcommand("probe", "linear probe on frozen features");
    add_common(probe, probe_opts);
    probe->add_option("--checkpoint", probe_ckpt, "trained checkpoint (optional)");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient oracle");

    auto* stats = app.add_subcommand("stats", "closed-form parameter/FLOP counts");
    add_common(stats, stats_opts);

    std::string maps_ckpt, maps_out;
    long sample_index = 0;
    uint64_t mask_seed = 5;
    auto* maps = app.add_subcommand("export-maps", "patch-word similarity maps as JSON");
    add_common(maps, maps_opts);
    maps->add_option("--checkpoint", maps_ckpt, "trained checkpoint (optional)");
    maps->add_option("--sample-index", sample_index, "dataset sample index");
    maps->add_option("--mask-seed", mask_seed, "mask sampling seed");
    maps->add_option("--out", maps_out, "output JSON path (default stdout)");

    std::string ablate_kind, ablate_out;
    auto* ablate = app.add_subcommand("ablate", "grid sweeps (short train + probe per point)");
    add_common(ablate, ablate_opts);
    ablate->add_option("--kind", ablate_kind,
                       "masking_scale|loss_coeff|n_captions|fusion|conditioner")
        ->required();
    ablate->add_option("--out", ablate_out, "output CSV path (default stdout)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (train->parsed())
            return cmd_train(train_opts, out_dir, ckpt_every, resume, dry_run);
        if (probe->parsed()) return cmd_probe(probe_opts, probe_ckpt);
        if (gradcheck->parsed()) return cmd_gradcheck();
        if (stats->parsed()) return cmd_stats(stats_opts);
        if (maps->parsed())
            return cmd_export_maps(maps_opts, maps_ckpt, sample_index, mask_seed, maps_out);
        if (ablate->parsed()) return cmd_ablate(ablate_opts, ablate_kind, ablate_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
