#pragma once

#include <span>
#include <vector>

#include "ssmtkrd/types.hpp"

namespace ssmtkrd {

// Which layers reduce and the per-layer keep ratio applied at each of them.
struct ReductionSchedule {
    std::vector<int> layers;      // strictly increasing
    double per_layer_keep = 1.0;  // r in (0, 1]
};

// Enforces: strictly increasing, in range, first entry >= min_start_layer,
// consecutive gap >= stride, keep ratio in (0, 1].
void validate_schedule(const ReductionSchedule& s, int num_layers, int min_start_layer = 10,
                       int stride = 5);

// Matmul-dominant cost of one layer at the given token count:
//   tokens * (2*D*D'  +  2*D'*D  +  6*D'*N)
//   in_proj              out_proj   discretize + state update + readout
// Linear in tokens; the solver depends on that.
double estimate_layer_flops(double tokens, const ModelConfig& cfg);

// Token count each layer is costed at when every schedule layer multiplies
// the count by r (counts are continuous here; execution rounds).
std::vector<double> simulate_token_counts(std::span<const int> layers, double r, int num_layers,
                                          double seq_len);

// Overall FLOPS reduction fraction of the simulated trace vs the constant
// baseline.
double simulate_reduction(std::span<const int> layers, double r, int num_layers, double seq_len,
                          const ModelConfig& cfg);

// Bisects r in (0, 1] until the simulated reduction is within 0.1% absolute
// of target. Throws std::runtime_error (reporting the achievable maximum)
// when the target is out of reach even as r -> 0.
double solve_keep_ratio(double target_reduction, std::span<const int> layers,
                        const ModelConfig& cfg, int seq_len);

struct FlopsReport {
    struct Row {
        int layer;
        double tokens;
        double flops;
    };
    std::vector<Row> per_layer;
    double total_baseline = 0.0;
    double total_reduced = 0.0;
    double reduction_fraction = 0.0;  // 1 - reduced/baseline
};

FlopsReport flops_report(std::span<const int> layers, double r, int num_layers, int seq_len,
                         const ModelConfig& cfg);

// Analytical activation proxy: peak over layers of tokens*(D + D') units,
// plus the ratio against a constant-length baseline. Units, not bytes.
struct MemoryEstimate {
    double peak_units = 0.0;
    double baseline_units = 0.0;
    double ratio = 1.0;
};

MemoryEstimate estimate_activation_memory(std::span<const int> trace_tokens,
                                          const ModelConfig& cfg);

// Rescales one of the paper-depth layer lists to a different model depth:
// indices scale by toy_depth/reference_depth, deduplicated, clipped to
// [1, num_layers). Identity when depths match.
std::vector<int> scale_layer_list(std::span<const int> layers, int reference_depth,
                                  int toy_depth);

}  // namespace ssmtkrd
