// Experiment harness CLI. Subcommands: gen-model, run, eval, bench, ablate,
// solve-schedule. All outputs are deterministic for a fixed config and seed
// (bench timing aside).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ssmtkrd/harness.hpp"
#include "ssmtkrd/sha256.hpp"

using namespace ssmtkrd;

namespace {

std::vector<int> parse_layer_list(const std::string& csv) {
    std::vector<int> layers;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) layers.push_back(std::stoi(item));
    }
    return layers;
}

struct ReducerFlags {
    std::string reducer = "utrc";
    std::string metric = "clip";
    double q = 0.5;
    std::string residual = "merge";
    double residual_q = 0.5;

    ReducerConfig build() const {
        ReducerConfig rc;
        rc.kind = reducer_from_string(reducer);
        rc.metric = metric_from_string(metric);
        rc.q = q;
        rc.residual_mode = residual_mode_from_string(residual);
        rc.residual_q = residual_q;
        return rc;
    }
};

struct CorpusFlags {
    std::string corpus_path;
    uint64_t seed = 7;
    int num_seqs = 8;
    int seq_len = 64;

    Corpus build() const {
        if (!corpus_path.empty()) return load_corpus(corpus_path);
        return synthetic_corpus(seed, num_seqs, seq_len);
    }
};

struct ScheduleFlags {
    std::string layers_csv = "12,17,22,27,32,37,42";
    double keep = 0.0;              // explicit per-layer keep when > 0
    double target_reduction = 0.2;  // otherwise solved from this
    int min_start_layer = 10;
    int stride = 5;

    ReductionSchedule build(const ModelConfig& cfg, int seq_len) const {
        ReductionSchedule sc;
        sc.layers = parse_layer_list(layers_csv);
        sc.per_layer_keep =
            keep > 0.0 ? keep : solve_keep_ratio(target_reduction, sc.layers, cfg, seq_len);
        validate_schedule(sc, cfg.num_layers, min_start_layer, stride);
        return sc;
    }
};

void add_reducer_flags(CLI::App* cmd, ReducerFlags& rf) {
    cmd->add_option("--reducer", rf.reducer, "none|utrc|evit|bipartite");
    cmd->add_option("--metric", rf.metric, "clip|l1|l2|raw");
    cmd->add_option("--q", rf.q, "prune fraction among retained connections")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--residual", rf.residual, "merge|prune|hybrid");
    cmd->add_option("--residual-q", rf.residual_q, "prune fraction for residual hybrid mode")
        ->check(CLI::Range(0.0, 1.0));
}

void add_corpus_flags(CLI::App* cmd, CorpusFlags& cf) {
    cmd->add_option("--corpus", cf.corpus_path, "corpus file (one sequence of ids per line)");
    cmd->add_option("--seed", cf.seed, "synthetic corpus seed");
    cmd->add_option("--corpus-seqs", cf.num_seqs, "synthetic corpus sequence count");
    cmd->add_option("--corpus-len", cf.seq_len, "synthetic corpus sequence length");
}

void add_schedule_flags(CLI::App* cmd, ScheduleFlags& sf) {
    cmd->add_option("--layers", sf.layers_csv, "reduction layers, comma separated");
    cmd->add_option("--keep", sf.keep, "explicit per-layer keep ratio in (0,1]");
    cmd->add_option("--target-reduction", sf.target_reduction,
                    "overall FLOPS reduction target used to solve the keep ratio");
    cmd->add_option("--min-start-layer", sf.min_start_layer, "schedule validation floor");
    cmd->add_option("--stride", sf.stride, "minimum gap between reduction layers");
}

void print_and_write(const Table& table, const std::string& out_base) {
    std::cout << to_aligned_text(table);
    if (!out_base.empty()) {
        write_table(table, out_base);
        std::cout << "wrote " << out_base << ".csv and " << out_base << ".txt\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    apply_thread_cap_from_env();

    CLI::App app{"toy selective-SSM stack with post-training token reduction"};
    app.require_subcommand(1);

    // gen-model
    auto* gen = app.add_subcommand("gen-model", "generate a seeded checkpoint");
    ModelConfig gen_cfg{12, 32, 64, 8, 256, 1};
    std::string gen_out;
    gen->add_option("--out", gen_out, "checkpoint path")->required();
    gen->add_option("--num-layers", gen_cfg.num_layers);
    gen->add_option("--model-dim", gen_cfg.model_dim);
    gen->add_option("--inner-dim", gen_cfg.inner_dim);
    gen->add_option("--state-dim", gen_cfg.state_dim);
    gen->add_option("--seq-len-max", gen_cfg.seq_len_max);
    gen->add_option("--seed", gen_cfg.seed);

    // run
    auto* run = app.add_subcommand("run", "per-sequence eval rows for one configuration");
    std::string run_ckpt, run_out;
    ReducerFlags run_rf;
    CorpusFlags run_cf;
    ScheduleFlags run_sf;
    run->add_option("--checkpoint", run_ckpt)->required();
    run->add_option("--out", run_out, "output base path (.csv/.txt)");
    add_reducer_flags(run, run_rf);
    add_corpus_flags(run, run_cf);
    add_schedule_flags(run, run_sf);

    // eval
    auto* ev = app.add_subcommand("eval", "aggregate eval for one configuration");
    std::string ev_ckpt, ev_out;
    ReducerFlags ev_rf;
    CorpusFlags ev_cf;
    ScheduleFlags ev_sf;
    ev->add_option("--checkpoint", ev_ckpt)->required();
    ev->add_option("--out", ev_out);
    add_reducer_flags(ev, ev_rf);
    add_corpus_flags(ev, ev_cf);
    add_schedule_flags(ev, ev_sf);

    // bench
    auto* bench = app.add_subcommand("bench", "generation throughput, reduced vs baseline");
    std::string bench_ckpt, bench_out;
    ReducerFlags bench_rf;
    ScheduleFlags bench_sf;
    int bench_batch = 16, bench_prompt = 256, bench_gen = 32, bench_repeats = 5;
    uint64_t bench_seed = 7;
    bench->add_option("--checkpoint", bench_ckpt)->required();
    bench->add_option("--batch", bench_batch);
    bench->add_option("--prompt-len", bench_prompt);
    bench->add_option("--gen-len", bench_gen);
    bench->add_option("--repeats", bench_repeats);
    bench->add_option("--seed", bench_seed);
    bench->add_option("--out", bench_out);
    add_reducer_flags(bench, bench_rf);
    add_schedule_flags(bench, bench_sf);

    // ablate
    auto* ab = app.add_subcommand("ablate", "metric / q / location sweeps");
    std::string ab_ckpt, ab_out, ab_sweep = "metric";
    ReducerFlags ab_rf;
    CorpusFlags ab_cf;
    std::string ab_layers = "12,17,22,27,32,37,42";
    double ab_target = 0.2;
    ab->add_option("--checkpoint", ab_ckpt)->required();
    ab->add_option("--sweep", ab_sweep, "metric|q|location")->required();
    ab->add_option("--layers", ab_layers, "schedule for metric and q sweeps");
    ab->add_option("--target-reduction", ab_target);
    ab->add_option("--out", ab_out);
    add_reducer_flags(ab, ab_rf);
    add_corpus_flags(ab, ab_cf);

    // solve-schedule
    auto* solve = app.add_subcommand("solve-schedule", "per-layer keep ratio for a FLOPS target");
    std::string solve_ckpt, solve_layers = "12,17,22,27,32,37,42", solve_out;
    double solve_target = 0.2;
    int solve_seq_len = 64;
    solve->add_option("--checkpoint", solve_ckpt)->required();
    solve->add_option("--layers", solve_layers);
    solve->add_option("--target-reduction", solve_target)->required();
    solve->add_option("--seq-len", solve_seq_len);
    solve->add_option("--out", solve_out, "write the solved schedule as JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            generate_checkpoint(gen_cfg, gen_out);
            std::ifstream f(gen_out, std::ios::binary);
            const std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                             std::istreambuf_iterator<char>());
            std::cout << "wrote " << gen_out << " (" << bytes.size()
                      << " bytes)\nsha256 " << sha256_hex(bytes) << "\n";
        } else if (*run) {
            const Model model = load_checkpoint(run_ckpt);
            const Corpus corpus = run_cf.build();
            const ReductionSchedule sc =
                run_sf.build(model.config, int(corpus.seqs.at(0).size()));
            const Table t = run_detailed(model, run_rf.build(), sc, corpus);
            print_and_write(t, run_out);
        } else if (*ev) {
            const Model model = load_checkpoint(ev_ckpt);
            const Corpus corpus = ev_cf.build();
            const ReductionSchedule sc = ev_sf.build(model.config, int(corpus.seqs.at(0).size()));
            const ReducerConfig rc = ev_rf.build();
            const EvalResult res = eval_adjusted(model, rc, sc, corpus);
            print_and_write(summarize(res, rc, sc), ev_out);
        } else if (*bench) {
            const Model model = load_checkpoint(bench_ckpt);
            const ReductionSchedule sc = bench_sf.build(model.config, bench_prompt);
            const BenchResult res =
                bench_throughput(model, bench_rf.build(), sc, bench_batch, bench_prompt,
                                 bench_gen, bench_repeats, bench_seed);
            Table t;
            t.columns = {"batch", "prompt_len", "gen_len",  "repeats",
                         "keep",  "tokens_per_sec", "baseline_tokens_per_sec", "ratio"};
            char keep[32], tps[32], base_tps[32], ratio[32];
            std::snprintf(keep, sizeof(keep), "%.6g", sc.per_layer_keep);
            std::snprintf(tps, sizeof(tps), "%.6g", res.tokens_per_sec);
            std::snprintf(base_tps, sizeof(base_tps), "%.6g", res.baseline_tokens_per_sec);
            std::snprintf(ratio, sizeof(ratio), "%.6g", res.ratio);
            t.rows.push_back({std::to_string(res.batch), std::to_string(res.prompt_len),
                              std::to_string(res.gen_len), std::to_string(res.repeats), keep,
                              tps, base_tps, ratio});
            print_and_write(t, bench_out);
        } else if (*ab) {
            const Model model = load_checkpoint(ab_ckpt);
            const Corpus corpus = ab_cf.build();
            const Table t = run_ablation(sweep_from_string(ab_sweep), model, ab_rf.build(),
                                         ab_target, parse_layer_list(ab_layers), corpus);
            print_and_write(t, ab_out);
        } else if (*solve) {
            const Model model = load_checkpoint(solve_ckpt);
            const std::vector<int> layers = parse_layer_list(solve_layers);
            const double r = solve_keep_ratio(solve_target, layers, model.config, solve_seq_len);
            const FlopsReport report =
                flops_report(layers, r, model.config.num_layers, solve_seq_len, model.config);
            std::printf("per_layer_keep %.6f\nsimulated_reduction %.6f\n", r,
                        report.reduction_fraction);
            if (!solve_out.empty()) {
                nlohmann::json j = {{"layers", layers},
                                    {"per_layer_keep", r},
                                    {"target_flops_reduction", solve_target},
                                    {"simulated_reduction", report.reduction_fraction}};
                std::ofstream f(solve_out);
                if (!f) throw std::runtime_error("cannot open '" + solve_out + "' for writing");
                f << j.dump(2) << "\n";
                std::cout << "wrote " << solve_out << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
