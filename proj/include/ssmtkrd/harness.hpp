#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssmtkrd/checkpoint.hpp"
#include "ssmtkrd/schedule.hpp"
#include "ssmtkrd/ssm.hpp"

namespace ssmtkrd {

inline constexpr int kVocabSize = 256;

// Symbol sequences over a 256-symbol vocabulary.
struct Corpus {
    std::vector<std::vector<int>> seqs;
};

// Seeded sequences with injected long-range copy dependencies: roughly a
// quarter of positions repeat an earlier symbol at a seeded lag, so token
// importance is non-uniform. Uniform-random input would make importance
// meaningless.
Corpus synthetic_corpus(uint64_t seed, int num_seqs, int seq_len);

// Text format: one sequence per line, whitespace-separated ids in [0, 256).
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

// Embedding table and readout head are derived from the model seed (they
// are not part of the checkpoint), so eval is reproducible from
// (checkpoint, corpus) alone.
std::vector<float> embedding_table(const ModelConfig& cfg);           // [256 x D]
std::vector<float> readout_head(const ModelConfig& cfg);              // [256 x D]
TokenSequence embed_sequence(const std::vector<int>& symbols, const std::vector<float>& table,
                             int model_dim);

struct EvalResult {
    double pseudo_ppl = 0.0;          // literal first-(1-m)% label truncation
    double pseudo_ppl_aligned = 0.0;  // surviving-position-aligned variant
    double output_reduction = 0.0;    // m, fraction of output tokens removed
    double divergence = 0.0;          // mean relative L2 vs the unreduced run
    double throughput = 0.0;          // tokens/sec, bench only
    FlopsReport flops;
};

// Runs the reduced forward over the corpus and scores it with the fixed
// readout head. With output reduction m, the literal variant scores the
// first (1-m) fraction of target positions; the aligned variant scores each
// surviving position against its own next-symbol target. Divergence
// compares surviving-position outputs with the unreduced run.
EvalResult eval_adjusted(const Model& model, const ReducerConfig& reducer,
                         const ReductionSchedule& schedule, const Corpus& corpus);

struct BenchResult {
    double tokens_per_sec = 0.0;
    double baseline_tokens_per_sec = 0.0;
    double ratio = 0.0;  // reduced vs baseline; reported, never asserted
    int batch = 0, prompt_len = 0, gen_len = 0, repeats = 0;
};

// Prefill + gen_len greedy decode steps per batch item; wall-clock median
// over repeats after one warmup. Throws std::invalid_argument for
// gen_len <= 0 or repeats < 3.
BenchResult bench_throughput(const Model& model, const ReducerConfig& reducer,
                             const ReductionSchedule& schedule, int batch, int prompt_len,
                             int gen_len, int repeats, uint64_t seed);

// Rectangular result table; first row of every CSV is the header.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

std::string to_csv(const Table& table);
std::string to_aligned_text(const Table& table);
void write_table(const Table& table, const std::string& out_base);  // .csv + .txt

enum class SweepKind { Metric, Q, Location };

SweepKind sweep_from_string(const std::string& name);  // metric|q|location

// Cross-product sweeps mirroring the ablation tables: metric emits the four
// importance metrics; q emits the seven hidden/residual design pairs;
// location emits the six layer lists (scaled to the model depth). A failing
// run is recorded in its row and the sweep continues.
Table run_ablation(SweepKind sweep, const Model& model, const ReducerConfig& base_reducer,
                   double target_reduction, const std::vector<int>& schedule_layers,
                   const Corpus& corpus);

// Per-sequence rows for one configuration (the `run` subcommand). Columns
// are deterministic; throughput is deliberately absent.
Table run_detailed(const Model& model, const ReducerConfig& reducer,
                   const ReductionSchedule& schedule, const Corpus& corpus);

Table summarize(const EvalResult& result, const ReducerConfig& reducer,
                const ReductionSchedule& schedule);

// Reads SSMTKRD_THREADS and caps OpenMP parallelism when set.
void apply_thread_cap_from_env();

}  // namespace ssmtkrd
