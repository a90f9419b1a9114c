#include "ssmtkrd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ssmtkrd {

MetricKind metric_from_string(const std::string& name) {
    if (name == "clip") return MetricKind::Clip;
    if (name == "l1") return MetricKind::L1;
    if (name == "l2") return MetricKind::L2;
    if (name == "raw") return MetricKind::Unclipped;
    throw std::invalid_argument("unknown metric '" + name + "' (expected clip|l1|l2|raw)");
}

const char* to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::Clip: return "clip";
        case MetricKind::L1: return "l1";
        case MetricKind::L2: return "l2";
        case MetricKind::Unclipped: return "raw";
    }
    return "?";
}

ImportanceScores importance(const HiddenStates& y, MetricKind kind) {
    for (float v : y.y)
        if (std::isnan(v)) throw std::invalid_argument("importance: hidden states contain NaN");

    ImportanceScores out;
    out.kind = kind;
    out.s.resize(y.seq_len);
    const int dp = y.inner_dim;
#pragma omp parallel for
    for (int t = 0; t < y.seq_len; ++t) {
        const float* row = y.row(t);
        double acc = 0.0;
        switch (kind) {
            case MetricKind::Clip:
                for (int d = 0; d < dp; ++d) acc += std::max(0.0, double(row[d]));
                out.s[t] = float(acc / dp);
                break;
            case MetricKind::Unclipped:
                for (int d = 0; d < dp; ++d) acc += double(row[d]);
                out.s[t] = float(acc / dp);
                break;
            case MetricKind::L1:
                for (int d = 0; d < dp; ++d) acc += std::abs(double(row[d]));
                out.s[t] = float(acc / dp);
                break;
            case MetricKind::L2:
                for (int d = 0; d < dp; ++d) acc += double(row[d]) * double(row[d]);
                out.s[t] = float(std::sqrt(acc / dp));
                break;
        }
    }
    return out;
}

std::vector<int> rank_tokens(const ImportanceScores& s) {
    std::vector<int> order(s.s.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return s.s[a] < s.s[b]; });
    return order;
}

}  // namespace ssmtkrd
