#include "ssmtkrd/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ssmtkrd/linalg.hpp"
#include "ssmtkrd/rng.hpp"

namespace ssmtkrd {

namespace {

constexpr uint64_t kEmbedSalt = 0x7b5b7d1a2e9c4f33ull;
constexpr uint64_t kReadoutSalt = 0x41c64e6da3bc0074ull;
constexpr uint64_t kCorpusSalt = 0x9d2c5680f1e8a5b7ull;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string fmt_int(long v) { return std::to_string(v); }

// Per-sequence eval pieces shared by eval_adjusted and run_detailed.
struct SeqEval {
    int len_in = 0;
    int len_out = 0;
    double m = 0.0;
    double nll_literal = 0.0;
    long scored_literal = 0;
    double nll_aligned = 0.0;
    long scored_aligned = 0;
    double divergence_sum = 0.0;
    long divergence_count = 0;
};

double token_nll(const std::vector<float>& head, const float* row, int dim, int target) {
    // log-softmax over the 256 readout logits, accumulated in double
    double logits[kVocabSize];
    double max_logit = -1e300;
    for (int v = 0; v < kVocabSize; ++v) {
        logits[v] = dot(head.data() + size_t(v) * dim, row, dim);
        max_logit = std::max(max_logit, logits[v]);
    }
    double denom = 0.0;
    for (int v = 0; v < kVocabSize; ++v) denom += std::exp(logits[v] - max_logit);
    return -(logits[target] - max_logit - std::log(denom));
}

SeqEval eval_sequence(const Model& model, const ReducerConfig& reducer,
                      const ReductionSchedule& schedule, const std::vector<int>& symbols,
                      const std::vector<float>& table, const std::vector<float>& head) {
    const int d = model.config.model_dim;
    const TokenSequence input = embed_sequence(symbols, table, d);

    const ReducerConfig no_reducer;  // kind None
    const ForwardResult base = model_forward(input, model, ReductionSchedule{}, no_reducer);
    const ForwardResult red = model_forward(input, model, schedule, reducer);

    SeqEval ev;
    ev.len_in = input.seq_len;
    ev.len_out = red.final.seq_len;
    ev.m = 1.0 - double(ev.len_out) / double(ev.len_in);
    if (ev.m >= 1.0) throw std::invalid_argument("eval: all output tokens were removed");

    // Literal adjustment: with reduction rate m, score the first (1-m)
    // fraction of the target positions against the surviving outputs in
    // order. Target for position j is the next symbol, so at most
    // len_in - 1 positions ever score.
    const int literal_count = std::min(ev.len_out, ev.len_in - 1);
    for (int i = 0; i < literal_count; ++i) {
        ev.nll_literal +=
            token_nll(head, red.final.row(i), d, symbols[size_t(i) + 1]);
        ++ev.scored_literal;
    }

    // Aligned variant: each surviving row predicts the successor of its own
    // original position.
    for (int i = 0; i < red.final.seq_len; ++i) {
        const int pos = red.final.positions[i];
        if (pos + 1 >= ev.len_in) continue;
        ev.nll_aligned += token_nll(head, red.final.row(i), d, symbols[size_t(pos) + 1]);
        ++ev.scored_aligned;
    }

    for (int i = 0; i < red.final.seq_len; ++i) {
        const int pos = red.final.positions[i];
        const float* a = red.final.row(i);
        const float* b = base.final.row(pos);
        double diff = 0.0, norm = 0.0;
        for (int j = 0; j < d; ++j) {
            const double dj = double(a[j]) - double(b[j]);
            diff += dj * dj;
            norm += double(b[j]) * double(b[j]);
        }
        ev.divergence_sum += norm > 0.0 ? std::sqrt(diff / norm) : std::sqrt(diff);
        ++ev.divergence_count;
    }
    return ev;
}

FlopsReport corpus_flops(const Model& model, const ReductionSchedule& schedule,
                         const Corpus& corpus) {
    // Declared cost model over every sequence; the per-layer rows come from
    // the first sequence as a representative trace.
    FlopsReport total = flops_report(schedule.layers, schedule.per_layer_keep,
                                     model.config.num_layers, int(corpus.seqs.at(0).size()),
                                     model.config);
    for (size_t s = 1; s < corpus.seqs.size(); ++s) {
        const FlopsReport r = flops_report(schedule.layers, schedule.per_layer_keep,
                                           model.config.num_layers, int(corpus.seqs[s].size()),
                                           model.config);
        total.total_baseline += r.total_baseline;
        total.total_reduced += r.total_reduced;
    }
    total.reduction_fraction = 1.0 - total.total_reduced / total.total_baseline;
    return total;
}

}  // namespace

Corpus synthetic_corpus(uint64_t seed, int num_seqs, int seq_len) {
    if (num_seqs < 1 || seq_len < 1)
        throw std::invalid_argument("synthetic_corpus: need at least one sequence and token");
    Corpus corpus;
    corpus.seqs.resize(num_seqs);
    Xoshiro256pp rng(seed ^ kCorpusSalt);
    constexpr int kMinLag = 8;
    for (auto& seq : corpus.seqs) {
        seq.resize(seq_len);
        int t = 0;
        while (t < seq_len) {
            // Repeats are whole spans, the way text repeats n-grams. A
            // copied span shares both identity and local history with its
            // source, which is what makes those tokens genuinely redundant
            // to a state that integrates context.
            if (t >= kMinLag && (rng.next() & 7) == 0) {
                const int lag = kMinLag + int(rng.next() % uint64_t(t - kMinLag + 1));
                const int run = 24 + int(rng.next() % 40);
                for (int i = 0; i < run && t < seq_len; ++i, ++t) seq[t] = seq[t - lag];
            } else {
                seq[t++] = int(rng.next() % kVocabSize);
            }
        }
    }
    return corpus;
}

Corpus load_corpus(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open corpus '" + path + "'");
    Corpus corpus;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::vector<int> seq;
        int v;
        while (ss >> v) {
            if (v < 0 || v >= kVocabSize)
                throw std::runtime_error("corpus '" + path + "': symbol out of range [0, 256)");
            seq.push_back(v);
        }
        if (!seq.empty()) corpus.seqs.push_back(std::move(seq));
    }
    if (corpus.seqs.empty()) throw std::runtime_error("corpus '" + path + "' is empty");
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    for (const auto& seq : corpus.seqs) {
        for (size_t i = 0; i < seq.size(); ++i) f << (i ? " " : "") << seq[i];
        f << "\n";
    }
}

std::vector<float> embedding_table(const ModelConfig& cfg) {
    // Unit-scale entries: the 1/sqrt(fan_in) projections preserve RMS, so
    // this keeps the SSM pathway comparable to the residual stream instead
    // of vanishing under the bilinear B(x), C(x) stages.
    Xoshiro256pp rng(cfg.seed ^ kEmbedSalt);
    std::vector<float> table(size_t(kVocabSize) * cfg.model_dim);
    for (auto& v : table) v = rng.uniform(-1.0f, 1.0f);
    return table;
}

std::vector<float> readout_head(const ModelConfig& cfg) {
    Xoshiro256pp rng(cfg.seed ^ kReadoutSalt);
    const float bound = 1.0f / std::sqrt(float(cfg.model_dim));
    std::vector<float> head(size_t(kVocabSize) * cfg.model_dim);
    for (auto& v : head) v = rng.uniform(-bound, bound);
    return head;
}

TokenSequence embed_sequence(const std::vector<int>& symbols, const std::vector<float>& table,
                             int model_dim) {
    TokenSequence t = TokenSequence::zeros(int(symbols.size()), model_dim);
    for (size_t i = 0; i < symbols.size(); ++i)
        std::copy_n(table.data() + size_t(symbols[i]) * model_dim, model_dim, t.row(int(i)));
    return t;
}

EvalResult eval_adjusted(const Model& model, const ReducerConfig& reducer,
                         const ReductionSchedule& schedule, const Corpus& corpus) {
    if (corpus.seqs.empty()) throw std::invalid_argument("eval: empty corpus");
    for (const auto& seq : corpus.seqs)
        if (int(seq.size()) > model.config.seq_len_max)
            throw std::invalid_argument("eval: sequence exceeds seq_len_max");

    const std::vector<float> table = embedding_table(model.config);
    const std::vector<float> head = readout_head(model.config);

    double nll_lit = 0.0, nll_al = 0.0, m_sum = 0.0, div_sum = 0.0;
    long scored_lit = 0, scored_al = 0;
    long div_count = 0;
    for (const auto& seq : corpus.seqs) {
        const SeqEval ev = eval_sequence(model, reducer, schedule, seq, table, head);
        nll_lit += ev.nll_literal;
        scored_lit += ev.scored_literal;
        nll_al += ev.nll_aligned;
        scored_al += ev.scored_aligned;
        m_sum += ev.m;
        div_sum += ev.divergence_sum;
        div_count += ev.divergence_count;
    }

    EvalResult out;
    out.pseudo_ppl = scored_lit > 0 ? std::exp(nll_lit / double(scored_lit)) : 0.0;
    out.pseudo_ppl_aligned = scored_al > 0 ? std::exp(nll_al / double(scored_al)) : 0.0;
    out.output_reduction = m_sum / double(corpus.seqs.size());
    out.divergence = div_count > 0 ? div_sum / double(div_count) : 0.0;
    out.flops = corpus_flops(model, schedule, corpus);
    return out;
}

BenchResult bench_throughput(const Model& model, const ReducerConfig& reducer,
                             const ReductionSchedule& schedule, int batch, int prompt_len,
                             int gen_len, int repeats, uint64_t seed) {
    if (gen_len <= 0) throw std::invalid_argument("bench: generation length must be positive");
    if (batch < 1 || prompt_len < 2) throw std::invalid_argument("bench: bad batch or prompt");
    if (repeats < 3) throw std::invalid_argument("bench: need at least 3 repeats");

    const Corpus prompts = synthetic_corpus(seed, batch, prompt_len);
    const std::vector<float> table = embedding_table(model.config);
    const std::vector<float> head = readout_head(model.config);
    const int d = model.config.model_dim;

    const auto run_once = [&](const ReducerConfig& rc, const ReductionSchedule& sc) {
#pragma omp parallel for
        for (int bi = 0; bi < batch; ++bi) {
            const TokenSequence input = embed_sequence(prompts.seqs[bi], table, d);
            DecodeState state;
            const ForwardResult pre = model_forward(input, model, sc, rc, &state);
            std::vector<float> vec(pre.final.row(pre.final.seq_len - 1),
                                   pre.final.row(pre.final.seq_len - 1) + d);
            for (int g = 0; g < gen_len; ++g) {
                // greedy readout of the next symbol, then step
                int best = 0;
                double best_logit = -1e300;
                for (int v = 0; v < kVocabSize; ++v) {
                    const double logit = dot(head.data() + size_t(v) * d, vec.data(), d);
                    if (logit > best_logit) {
                        best_logit = logit;
                        best = v;
                    }
                }
                std::copy_n(table.data() + size_t(best) * d, d, vec.data());
                decode_step(vec, model, state);
            }
        }
    };

    const auto time_runs = [&](const ReducerConfig& rc, const ReductionSchedule& sc) {
        run_once(rc, sc);  // warmup
        std::vector<double> secs;
        for (int rep = 0; rep < repeats; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            run_once(rc, sc);
            const auto t1 = std::chrono::steady_clock::now();
            secs.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        std::sort(secs.begin(), secs.end());
        return secs[secs.size() / 2];
    };

    const double reduced_sec = time_runs(reducer, schedule);
    const double baseline_sec = time_runs(ReducerConfig{}, ReductionSchedule{});

    BenchResult res;
    res.batch = batch;
    res.prompt_len = prompt_len;
    res.gen_len = gen_len;
    res.repeats = repeats;
    res.tokens_per_sec = double(batch) * gen_len / reduced_sec;
    res.baseline_tokens_per_sec = double(batch) * gen_len / baseline_sec;
    res.ratio = res.tokens_per_sec / res.baseline_tokens_per_sec;
    return res;
}

std::string to_csv(const Table& table) {
    const auto escape = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c;
        }
        out += '"';
        return out;
    };
    std::string out;
    for (size_t i = 0; i < table.columns.size(); ++i)
        out += (i ? "," : "") + escape(table.columns[i]);
    out += "\n";
    for (const auto& row : table.rows) {
        for (size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + escape(row[i]);
        out += "\n";
    }
    return out;
}

std::string to_aligned_text(const Table& table) {
    std::vector<size_t> widths(table.columns.size());
    for (size_t i = 0; i < table.columns.size(); ++i) widths[i] = table.columns[i].size();
    for (const auto& row : table.rows)
        for (size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());

    std::string out;
    const auto emit = [&](const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            out += cells[i];
            if (i + 1 < cells.size()) out.append(widths[i] - cells[i].size() + 2, ' ');
        }
        out += "\n";
    };
    emit(table.columns);
    for (size_t i = 0; i < table.columns.size(); ++i)
        out.append(widths[i], '-').append(i + 1 < table.columns.size() ? 2 : 0, ' ');
    out += "\n";
    for (const auto& row : table.rows) emit(row);
    return out;
}

void write_table(const Table& table, const std::string& out_base) {
    if (table.rows.empty()) throw std::invalid_argument("report: no result rows");
    const auto write_file = [](const std::string& path, const std::string& content) {
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
        f << content;
        if (!f) throw std::runtime_error("write failed for '" + path + "'");
    };
    write_file(out_base + ".csv", to_csv(table));
    write_file(out_base + ".txt", to_aligned_text(table));
}

SweepKind sweep_from_string(const std::string& name) {
    if (name == "metric") return SweepKind::Metric;
    if (name == "q") return SweepKind::Q;
    if (name == "location") return SweepKind::Location;
    throw std::invalid_argument("unknown sweep '" + name + "' (expected metric|q|location)");
}

Table run_detailed(const Model& model, const ReducerConfig& reducer,
                   const ReductionSchedule& schedule, const Corpus& corpus) {
    const std::vector<float> table_w = embedding_table(model.config);
    const std::vector<float> head = readout_head(model.config);
    Table t;
    t.columns = {"seq",        "len_in",     "len_out",    "m",
                 "pseudo_ppl", "ppl_aligned", "divergence", "flops_reduction"};
    const FlopsReport fr = corpus_flops(model, schedule, corpus);
    for (size_t s = 0; s < corpus.seqs.size(); ++s) {
        const SeqEval ev = eval_sequence(model, reducer, schedule, corpus.seqs[s], table_w, head);
        const double ppl =
            ev.scored_literal > 0 ? std::exp(ev.nll_literal / double(ev.scored_literal)) : 0.0;
        const double ppl_al =
            ev.scored_aligned > 0 ? std::exp(ev.nll_aligned / double(ev.scored_aligned)) : 0.0;
        const double div =
            ev.divergence_count > 0 ? ev.divergence_sum / double(ev.divergence_count) : 0.0;
        t.rows.push_back({fmt_int(long(s)), fmt_int(ev.len_in), fmt_int(ev.len_out), fmt(ev.m),
                          fmt(ppl), fmt(ppl_al), fmt(div), fmt(fr.reduction_fraction)});
    }
    return t;
}

Table summarize(const EvalResult& result, const ReducerConfig& reducer,
                const ReductionSchedule& schedule) {
    Table t;
    t.columns = {"reducer",     "metric",      "q",          "residual",       "keep",
                 "pseudo_ppl",  "ppl_aligned", "m",          "divergence",     "flops_reduction"};
    std::string residual = to_string(reducer.residual_mode);
    if (reducer.residual_mode == ResidualMode::Hybrid)
        residual += "(q=" + fmt(reducer.residual_q) + ")";
    t.rows.push_back({to_string(reducer.kind), to_string(reducer.metric), fmt(reducer.q),
                      residual, fmt(schedule.per_layer_keep), fmt(result.pseudo_ppl),
                      fmt(result.pseudo_ppl_aligned), fmt(result.output_reduction),
                      fmt(result.divergence), fmt(result.flops.reduction_fraction)});
    return t;
}

Table run_ablation(SweepKind sweep, const Model& model, const ReducerConfig& base_reducer,
                   double target_reduction, const std::vector<int>& schedule_layers,
                   const Corpus& corpus) {
    const int seq_len = int(corpus.seqs.at(0).size());

    const auto eval_row = [&](const ReducerConfig& rc, const std::vector<int>& layers)
        -> std::pair<EvalResult, std::string> {
        ReductionSchedule sc;
        sc.layers = layers;
        sc.per_layer_keep = solve_keep_ratio(target_reduction, layers, model.config, seq_len);
        return {eval_adjusted(model, rc, sc, corpus), fmt(sc.per_layer_keep)};
    };

    Table t;
    switch (sweep) {
        case SweepKind::Metric: {
            t.columns = {"metric",     "keep",        "pseudo_ppl", "ppl_aligned",
                         "divergence", "flops_reduction", "status"};
            for (MetricKind mk :
                 {MetricKind::Clip, MetricKind::L1, MetricKind::L2, MetricKind::Unclipped}) {
                ReducerConfig rc = base_reducer;
                rc.kind = ReducerKind::Utrc;
                rc.metric = mk;
                try {
                    const auto [res, keep] = eval_row(rc, schedule_layers);
                    t.rows.push_back({to_string(mk), keep, fmt(res.pseudo_ppl),
                                      fmt(res.pseudo_ppl_aligned), fmt(res.divergence),
                                      fmt(res.flops.reduction_fraction), "ok"});
                } catch (const std::exception& e) {
                    t.rows.push_back({to_string(mk), "", "", "", "", "",
                                      std::string("error: ") + e.what()});
                }
            }
            break;
        }
        case SweepKind::Q: {
            // The seven hidden/residual pairs of the design-choice table.
            struct Pair {
                const char* hidden;
                double q;
                const char* residual;
                ResidualMode mode;
                double rq;
            };
            const Pair pairs[] = {
                {"M-only", 0.0, "M-only", ResidualMode::Merge, 0.0},
                {"P-only", 1.0, "P-only", ResidualMode::Prune, 0.0},
                {"q=0.8", 0.8, "q=0.2", ResidualMode::Hybrid, 0.2},
                {"q=0.2", 0.2, "q=0.8", ResidualMode::Hybrid, 0.8},
                {"q=0.5", 0.5, "q=0.5", ResidualMode::Hybrid, 0.5},
                {"q=0.5", 0.5, "P-only", ResidualMode::Prune, 0.0},
                {"q=0.5", 0.5, "M-only", ResidualMode::Merge, 0.0},
            };
            t.columns = {"hidden",     "residual",    "keep",        "pseudo_ppl",
                         "ppl_aligned", "divergence", "flops_reduction", "status"};
            for (const Pair& pr : pairs) {
                ReducerConfig rc = base_reducer;
                rc.kind = ReducerKind::Utrc;
                rc.q = pr.q;
                rc.residual_mode = pr.mode;
                rc.residual_q = pr.rq;
                try {
                    const auto [res, keep] = eval_row(rc, schedule_layers);
                    t.rows.push_back({pr.hidden, pr.residual, keep, fmt(res.pseudo_ppl),
                                      fmt(res.pseudo_ppl_aligned), fmt(res.divergence),
                                      fmt(res.flops.reduction_fraction), "ok"});
                } catch (const std::exception& e) {
                    t.rows.push_back({pr.hidden, pr.residual, "", "", "", "", "",
                                      std::string("error: ") + e.what()});
                }
            }
            break;
        }
        case SweepKind::Location: {
            // The six layer lists of the location table, defined at depth 64
            // and rescaled to this model's depth.
            const std::vector<std::vector<int>> lists = {
                {20, 25, 30, 35, 40, 45, 50}, {18, 23, 28, 33, 38, 43, 48},
                {16, 21, 26, 31, 36, 41, 46}, {14, 19, 24, 29, 34, 39, 44},
                {10, 15, 20, 25, 30, 35, 40}, {12, 17, 22, 27, 32, 37, 42},
            };
            t.columns = {"layers",     "keep",        "pseudo_ppl", "ppl_aligned",
                         "divergence", "flops_reduction", "status"};
            for (const auto& list : lists) {
                const std::vector<int> scaled =
                    scale_layer_list(list, 64, model.config.num_layers);
                std::string label;
                for (size_t i = 0; i < scaled.size(); ++i)
                    label += (i ? "," : "") + std::to_string(scaled[i]);
                ReducerConfig rc = base_reducer;
                rc.kind = ReducerKind::Utrc;
                try {
                    const auto [res, keep] = eval_row(rc, scaled);
                    t.rows.push_back({label, keep, fmt(res.pseudo_ppl),
                                      fmt(res.pseudo_ppl_aligned), fmt(res.divergence),
                                      fmt(res.flops.reduction_fraction), "ok"});
                } catch (const std::exception& e) {
                    t.rows.push_back({label, "", "", "", "", "",
                                      std::string("error: ") + e.what()});
                }
            }
            break;
        }
    }
    return t;
}

void apply_thread_cap_from_env() {
    const char* env = std::getenv("SSMTKRD_THREADS");
    if (!env || !*env) return;
    const int n = std::atoi(env);
    if (n >= 1) omp_set_num_threads(n);
}

}  // namespace ssmtkrd
