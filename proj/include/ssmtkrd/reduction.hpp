#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ssmtkrd/metrics.hpp"
#include "ssmtkrd/types.hpp"

namespace ssmtkrd {

// Importance split: set_a holds the floor(n/2) least important positions,
// set_b the rest. Both lists are sorted by original position.
struct TokenClassification {
    std::vector<int> set_a;
    std::vector<int> set_b;
};

// Throws std::invalid_argument when seq_len < 2.
TokenClassification classify(const ImportanceScores& s);

// One connection per set_a token: b_index is the cosine-argmax partner in
// set_b, similarity the corresponding maximum. Indices are original
// sequence positions.
struct Connection {
    int a_index = -1;
    int b_index = -1;
    float similarity = 0.0f;
};

// Exhaustive argmax over set_b for every set_a token. Cosine over the given
// feature rows; zero-norm rows have similarity 0 to everything; argmax ties
// go to the smaller b position.
std::vector<Connection> build_connections(std::span<const float> rows, int seq_len, int dim,
                                          const TokenClassification& cls);
std::vector<Connection> build_connections(const HiddenStates& y, const TokenClassification& cls);

enum class BranchAction { Prune, Merge };

enum class ResidualMode { Merge, Prune, Hybrid };

ResidualMode residual_mode_from_string(const std::string& name);  // merge|prune|hybrid
const char* to_string(ResidualMode mode);

// A per-layer reduction decision shared by both branches. connections are
// kept in retention order (descending similarity, ties by smaller a_index);
// merges are applied in that order.
struct ReductionPlan {
    int seq_len = 0;
    double p = 0.0;  // fraction of connections retained
    double q = 0.0;  // fraction of retained connections pruned on the hidden branch
    ResidualMode residual_mode = ResidualMode::Merge;
    double residual_q = 0.0;                   // only used by ResidualMode::Hybrid
    std::vector<Connection> connections;       // retained
    std::vector<BranchAction> hidden_action;   // per retained connection
    std::vector<BranchAction> residual_action; // per retained connection
    std::vector<int> kept_positions;           // sorted, size seq_len - connections.size()
};

// Retains the top ceil(p*|conns|) connections by similarity and assigns the
// round(q*retained) with the least important a-token to Prune, the rest to
// Merge. The residual branch follows residual_mode (all Merge by default).
ReductionPlan retain_and_assign(const std::vector<Connection>& conns, double p, double q,
                                const ImportanceScores& s,
                                ResidualMode residual_mode = ResidualMode::Merge,
                                double residual_q = 0.0);

// Count-driven variant used by the layer schedule: retains exactly n_retain
// connections. Throws std::invalid_argument when n_retain exceeds |conns|.
ReductionPlan retain_and_assign_count(const std::vector<Connection>& conns, int n_retain,
                                      double q, const ImportanceScores& s,
                                      ResidualMode residual_mode = ResidualMode::Merge,
                                      double residual_q = 0.0);

// Hidden branch: Merge connections average row[a] into row[b], Prune leaves
// row[b] untouched; every a-row is dropped; survivors keep original order.
std::vector<float> apply_plan_hidden(std::span<const float> rows, int dim,
                                     const ReductionPlan& plan);

// Residual branch: same dropped rows, action per plan.residual_mode.
std::vector<float> apply_plan_residual(std::span<const float> rows, int dim,
                                       const ReductionPlan& plan);

// T_next = out_proj(hidden_reduced) + residual_reduced, with output
// positions = kept_positions mapped through the incoming positions.
// Throws std::invalid_argument when branch lengths disagree.
TokenSequence reassemble(std::span<const float> hidden_reduced, int inner_dim,
                         std::span<const float> residual_reduced, int model_dim,
                         std::span<const float> out_proj,
                         std::span<const int> incoming_positions,
                         std::span<const int> kept_positions);
TokenSequence reassemble(std::span<const float> hidden_reduced, int inner_dim,
                         std::span<const float> residual_reduced, int model_dim,
                         std::span<const float> out_proj,
                         std::span<const int> incoming_positions, const ReductionPlan& plan);

// EViT-style pruning: keeps the ceil(keep_ratio*seq_len) highest-importance
// positions, original order preserved.
std::vector<int> baseline_evit_prune(const ImportanceScores& s, double keep_ratio);

// ToMe-style bipartite merging: even positions connect to their most
// similar odd position; the most similar round((1-keep_ratio)*seq_len)
// connections merge by averaging. Importance is never consulted.
struct BipartitePlan {
    int seq_len = 0;
    std::vector<Connection> merges;  // descending similarity
    std::vector<int> kept_positions;
};

BipartitePlan build_bipartite_plan(std::span<const float> rows, int seq_len, int dim,
                                   double keep_ratio);
std::vector<float> apply_bipartite(std::span<const float> rows, int dim,
                                   const BipartitePlan& plan);
std::pair<std::vector<float>, std::vector<int>> baseline_bipartite_merge(
    std::span<const float> rows, int seq_len, int dim, double keep_ratio);

// Gathers the kept rows in position order.
std::vector<float> select_rows(std::span<const float> rows, int dim, std::span<const int> kept);

enum class ReducerKind { None, Utrc, Evit, Bipartite };

ReducerKind reducer_from_string(const std::string& name);  // none|utrc|evit|bipartite
const char* to_string(ReducerKind kind);

struct ReducerConfig {
    ReducerKind kind = ReducerKind::None;
    MetricKind metric = MetricKind::Clip;
    double q = 0.5;
    ResidualMode residual_mode = ResidualMode::Merge;
    double residual_q = 0.5;
};

}  // namespace ssmtkrd
