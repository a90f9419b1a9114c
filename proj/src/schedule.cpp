#include "ssmtkrd/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ssmtkrd {

void validate_schedule(const ReductionSchedule& s, int num_layers, int min_start_layer,
                       int stride) {
    if (!(s.per_layer_keep > 0.0 && s.per_layer_keep <= 1.0))
        throw std::invalid_argument("schedule: per-layer keep must be in (0, 1]");
    for (size_t i = 0; i < s.layers.size(); ++i) {
        if (s.layers[i] < 0 || s.layers[i] >= num_layers)
            throw std::invalid_argument("schedule: layer index out of range");
        if (i == 0 && s.layers[i] < min_start_layer)
            throw std::invalid_argument("schedule: first reduction layer must be >= " +
                                        std::to_string(min_start_layer));
        if (i > 0 && s.layers[i] - s.layers[i - 1] < stride)
            throw std::invalid_argument("schedule: consecutive layers closer than stride " +
                                        std::to_string(stride));
    }
}

double estimate_layer_flops(double tokens, const ModelConfig& cfg) {
    const double d = cfg.model_dim, dp = cfg.inner_dim, n = cfg.state_dim;
    return tokens * (2.0 * d * dp + 2.0 * dp * d + 6.0 * dp * n);
}

std::vector<double> simulate_token_counts(std::span<const int> layers, double r, int num_layers,
                                          double seq_len) {
    std::vector<double> counts(num_layers);
    double tokens = seq_len;
    size_t next = 0;
    for (int l = 0; l < num_layers; ++l) {
        if (next < layers.size() && layers[next] == l) {
            tokens *= r;
            ++next;
        }
        counts[l] = tokens;
    }
    return counts;
}

double simulate_reduction(std::span<const int> layers, double r, int num_layers, double seq_len,
                          const ModelConfig& cfg) {
    const std::vector<double> counts = simulate_token_counts(layers, r, num_layers, seq_len);
    double reduced = 0.0;
    for (double c : counts) reduced += estimate_layer_flops(c, cfg);
    const double baseline = num_layers * estimate_layer_flops(seq_len, cfg);
    return 1.0 - reduced / baseline;
}

double solve_keep_ratio(double target_reduction, std::span<const int> layers,
                        const ModelConfig& cfg, int seq_len) {
    if (target_reduction <= 0.0) return 1.0;
    if (target_reduction >= 1.0)
        throw std::runtime_error("solve_keep_ratio: target reduction must be below 100%");
    for (size_t i = 0; i < layers.size(); ++i) {
        if (layers[i] < 0 || layers[i] >= cfg.num_layers)
            throw std::runtime_error("solve_keep_ratio: schedule layer out of range");
        if (i > 0 && layers[i] <= layers[i - 1])
            throw std::runtime_error("solve_keep_ratio: layers must be strictly increasing");
    }

    const double max_reduction = simulate_reduction(layers, 0.0, cfg.num_layers, seq_len, cfg);
    if (target_reduction > max_reduction)
        throw std::runtime_error("solve_keep_ratio: target " + std::to_string(target_reduction) +
                                 " unreachable; achievable maximum is " +
                                 std::to_string(max_reduction));

    // simulate_reduction is monotone decreasing in r, so bisect.
    constexpr double kTol = 1e-3;  // 0.1% absolute
    double lo = 0.0, hi = 1.0, r = 1.0;
    for (int it = 0; it < 40; ++it) {
        r = 0.5 * (lo + hi);
        const double got = simulate_reduction(layers, r, cfg.num_layers, seq_len, cfg);
        if (std::abs(got - target_reduction) <= kTol * 0.5) break;
        if (got > target_reduction)
            lo = r;  // too much reduction: keep more
        else
            hi = r;
    }
    return r;
}

FlopsReport flops_report(std::span<const int> layers, double r, int num_layers, int seq_len,
                         const ModelConfig& cfg) {
    FlopsReport report;
    const std::vector<double> counts = simulate_token_counts(layers, r, num_layers, seq_len);
    for (int l = 0; l < num_layers; ++l) {
        const double flops = estimate_layer_flops(counts[l], cfg);
        report.per_layer.push_back({l, counts[l], flops});
        report.total_reduced += flops;
    }
    report.total_baseline = num_layers * estimate_layer_flops(seq_len, cfg);
    report.reduction_fraction = 1.0 - report.total_reduced / report.total_baseline;
    return report;
}

MemoryEstimate estimate_activation_memory(std::span<const int> trace_tokens,
                                          const ModelConfig& cfg) {
    if (trace_tokens.empty())
        throw std::invalid_argument("estimate_activation_memory: empty trace");
    const double unit = double(cfg.model_dim) + double(cfg.inner_dim);
    MemoryEstimate est;
    int max_tokens = 0, first = trace_tokens[0];
    for (int t : trace_tokens) max_tokens = std::max(max_tokens, t);
    est.peak_units = max_tokens * unit;
    est.baseline_units = first * unit;  // unreduced trace is constant at the entry length
    est.ratio = est.baseline_units > 0.0 ? est.peak_units / est.baseline_units : 1.0;
    return est;
}

std::vector<int> scale_layer_list(std::span<const int> layers, int reference_depth,
                                  int toy_depth) {
    std::vector<int> out;
    for (int l : layers) {
        const int scaled =
            int(std::lround(double(l) * double(toy_depth) / double(reference_depth)));
        const int clipped = std::clamp(scaled, 1, toy_depth - 1);
        if (out.empty() || clipped > out.back()) out.push_back(clipped);
    }
    return out;
}

}  // namespace ssmtkrd
