#include "ssmtkrd/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ssmtkrd/linalg.hpp"

namespace ssmtkrd::ref {

namespace {

double cosine_ref(const float* a, const float* b, int dim) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (int j = 0; j < dim; ++j) {
        ab += double(a[j]) * double(b[j]);
        aa += double(a[j]) * double(a[j]);
        bb += double(b[j]) * double(b[j]);
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

}  // namespace

void project_tokens_serial(const float* x, float* y, const float* w, const float* bias, int n,
                           int rows, int cols) {
    for (int t = 0; t < n; ++t) {
        const float* xi = x + size_t(t) * cols;
        float* yi = y + size_t(t) * rows;
        for (int r = 0; r < rows; ++r) {
            double acc = bias ? double(bias[r]) : 0.0;
            acc += dot(w + size_t(r) * cols, xi, cols);
            yi[r] = float(acc);
        }
    }
}

HiddenStates scan_recurrence_serial(const HiddenStates& x, std::span<const float> a_diag,
                                    const ScanParams& p) {
    const int L = p.seq_len, dp = p.inner_dim, n = p.state_dim;
    HiddenStates out = HiddenStates::zeros(L, dp);
    std::vector<float> a_bar(n), b_bar(n);
    for (int d = 0; d < dp; ++d) {
        std::vector<float> hd(n, 0.0f);
        for (int t = 0; t < L; ++t) {
            const float delta = p.delta[size_t(t) * dp + d];
            const float* bt = p.b.data() + size_t(t) * n;
            const float* ct = p.c.data() + size_t(t) * n;
            discretize(a_diag, std::span<const float>(bt, n), delta, a_bar, b_bar);
            const float xv = x.y[size_t(t) * dp + d];
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                hd[i] = a_bar[i] * hd[i] + b_bar[i] * xv;
                acc += double(ct[i]) * double(hd[i]);
            }
            out.y[size_t(t) * dp + d] = float(acc);
        }
    }
    return out;
}

ImportanceScores importance_serial(const HiddenStates& y, MetricKind kind) {
    ImportanceScores out;
    out.kind = kind;
    out.s.resize(y.seq_len);
    const int dp = y.inner_dim;
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

std::vector<Connection> build_connections_serial(std::span<const float> rows, int seq_len,
                                                 int dim, const TokenClassification& cls) {
    std::vector<Connection> conns(cls.set_a.size());
    for (size_t i = 0; i < cls.set_a.size(); ++i) {
        const int a = cls.set_a[i];
        int best_b = cls.set_b[0];
        double best = -2.0;
        for (int b : cls.set_b) {
            const double sim =
                cosine_ref(rows.data() + size_t(a) * dim, rows.data() + size_t(b) * dim, dim);
            if (sim > best) {
                best = sim;
                best_b = b;
            }
        }
        conns[i] = Connection{a, best_b, float(best)};
    }
    return conns;
}

std::vector<Connection> brute_force_connections(std::span<const float> rows, int seq_len, int dim,
                                                const TokenClassification& cls) {
    // Full similarity matrix first, argmax second.
    const size_t na = cls.set_a.size(), nb = cls.set_b.size();
    std::vector<double> sim(na * nb);
    for (size_t i = 0; i < na; ++i)
        for (size_t j = 0; j < nb; ++j)
            sim[i * nb + j] = cosine_ref(rows.data() + size_t(cls.set_a[i]) * dim,
                                         rows.data() + size_t(cls.set_b[j]) * dim, dim);
    std::vector<Connection> conns(na);
    for (size_t i = 0; i < na; ++i) {
        size_t best_j = 0;
        for (size_t j = 1; j < nb; ++j)
            if (sim[i * nb + j] > sim[i * nb + best_j]) best_j = j;
        conns[i] = Connection{cls.set_a[i], cls.set_b[best_j], float(sim[i * nb + best_j])};
    }
    return conns;
}

std::vector<float> apply_plan_two_phase(std::span<const float> rows, int dim,
                                        const ReductionPlan& plan,
                                        std::span<const BranchAction> actions) {
    std::vector<float> work(rows.begin(), rows.end());
    for (size_t i = 0; i < plan.connections.size(); ++i)
        if (actions[i] == BranchAction::Merge) {
            const float* a = work.data() + size_t(plan.connections[i].a_index) * dim;
            float* b = work.data() + size_t(plan.connections[i].b_index) * dim;
            for (int j = 0; j < dim; ++j) b[j] = (a[j] + b[j]) * 0.5f;
        }
    std::vector<char> removed(plan.seq_len, 0);
    for (const Connection& c : plan.connections) removed[c.a_index] = 1;
    std::vector<float> out;
    out.reserve(rows.size());
    for (int t = 0; t < plan.seq_len; ++t)
        if (!removed[t])
            out.insert(out.end(), work.begin() + size_t(t) * dim,
                       work.begin() + size_t(t + 1) * dim);
    return out;
}

std::vector<float> merge_only(std::span<const float> rows, int dim, const ReductionPlan& plan) {
    const std::vector<BranchAction> all(plan.connections.size(), BranchAction::Merge);
    return apply_plan_two_phase(rows, dim, plan, all);
}

std::vector<float> prune_only(std::span<const float> rows, int dim, const ReductionPlan& plan) {
    const std::vector<BranchAction> all(plan.connections.size(), BranchAction::Prune);
    return apply_plan_two_phase(rows, dim, plan, all);
}

std::pair<std::vector<float>, std::vector<int>> bipartite_brute_force(std::span<const float> rows,
                                                                      int seq_len, int dim,
                                                                      double keep_ratio) {
    std::vector<int> evens, odds;
    for (int t = 0; t < seq_len; ++t) (t % 2 == 0 ? evens : odds).push_back(t);

    int n_rm = int(std::floor((1.0 - keep_ratio) * double(seq_len) + 0.5 + 1e-9));
    n_rm = std::clamp<int>(n_rm, 0, int(evens.size()));
    if (odds.empty()) n_rm = 0;

    std::vector<Connection> conns;
    for (int e : evens) {
        int best_o = odds.empty() ? -1 : odds[0];
        double best = -2.0;
        for (int o : odds) {
            const double sim =
                cosine_ref(rows.data() + size_t(e) * dim, rows.data() + size_t(o) * dim, dim);
            if (sim > best) {
                best = sim;
                best_o = o;
            }
        }
        if (best_o >= 0) conns.push_back(Connection{e, best_o, float(best)});
    }
    std::stable_sort(conns.begin(), conns.end(), [](const Connection& x, const Connection& y) {
        if (x.similarity != y.similarity) return x.similarity > y.similarity;
        return x.a_index < y.a_index;
    });
    conns.resize(n_rm);

    std::vector<float> work(rows.begin(), rows.end());
    for (const Connection& c : conns) {
        const float* a = work.data() + size_t(c.a_index) * dim;
        float* b = work.data() + size_t(c.b_index) * dim;
        for (int j = 0; j < dim; ++j) b[j] = (a[j] + b[j]) * 0.5f;
    }
    std::vector<char> removed(seq_len, 0);
    for (const Connection& c : conns) removed[c.a_index] = 1;
    std::vector<float> out;
    std::vector<int> kept;
    for (int t = 0; t < seq_len; ++t)
        if (!removed[t]) {
            kept.push_back(t);
            out.insert(out.end(), work.begin() + size_t(t) * dim,
                       work.begin() + size_t(t + 1) * dim);
        }
    return {out, kept};
}

}  // namespace ssmtkrd::ref
