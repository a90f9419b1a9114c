#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ssmtkrd/reduction.hpp"
#include "ssmtkrd/ssm.hpp"
#include "ssmtkrd/types.hpp"

// Serial reference implementations. Two kinds live here:
//  - plain serial twins of the OpenMP kernels (bitwise-comparable, and the
//    baseline side of the kernel benchmark);
//  - structurally independent oracles used by the test suites (exhaustive
//    similarity search, two-phase plan application, endpoint reducers).
namespace ssmtkrd::ref {

void project_tokens_serial(const float* x, float* y, const float* w, const float* bias, int n,
                           int rows, int cols);

HiddenStates scan_recurrence_serial(const HiddenStates& x, std::span<const float> a_diag,
                                    const ScanParams& p);

ImportanceScores importance_serial(const HiddenStates& y, MetricKind kind);

std::vector<Connection> build_connections_serial(std::span<const float> rows, int seq_len,
                                                 int dim, const TokenClassification& cls);

// Materializes the full |A| x |B| cosine matrix, then takes the argmax with
// the tie rule. Independent of the production search loop.
std::vector<Connection> brute_force_connections(std::span<const float> rows, int seq_len,
                                                int dim, const TokenClassification& cls);

// Applies all Merge updates first (in plan order), then deletes the a-rows.
std::vector<float> apply_plan_two_phase(std::span<const float> rows, int dim,
                                        const ReductionPlan& plan,
                                        std::span<const BranchAction> actions);

// Endpoint reducers: treat every retained connection as Merge / as Prune.
std::vector<float> merge_only(std::span<const float> rows, int dim, const ReductionPlan& plan);
std::vector<float> prune_only(std::span<const float> rows, int dim, const ReductionPlan& plan);

// Exhaustive even/odd bipartite merge oracle.
std::pair<std::vector<float>, std::vector<int>> bipartite_brute_force(std::span<const float> rows,
                                                                      int seq_len, int dim,
                                                                      double keep_ratio);

}  // namespace ssmtkrd::ref
