#pragma once

#include <string>
#include <vector>

#include "ssmtkrd/types.hpp"

namespace ssmtkrd {

// Token importance variants. Clip is the default; the other three exist
// for the metric ablation.
enum class MetricKind { Clip, L1, L2, Unclipped };

MetricKind metric_from_string(const std::string& name);  // clip|l1|l2|raw
const char* to_string(MetricKind kind);

struct ImportanceScores {
    MetricKind kind = MetricKind::Clip;
    std::vector<float> s;  // [seq_len]
};

// Per-token score over the channel dimension of y:
//   Clip      mean_d max(0, y_d)
//   Unclipped mean_d y_d
//   L1        mean_d |y_d|
//   L2        sqrt(mean_d y_d^2)
// Throws std::invalid_argument if y holds NaN.
ImportanceScores importance(const HiddenStates& y, MetricKind kind);

// Stable ascending sort by score; ties broken by smaller original position.
std::vector<int> rank_tokens(const ImportanceScores& s);

}  // namespace ssmtkrd
