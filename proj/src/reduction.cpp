#include "ssmtkrd/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ssmtkrd/linalg.hpp"

namespace ssmtkrd {

namespace {

// Fractional counts land on exact rationals (p, q move on coarse grids), so
// nudge before rounding: ceil(0.1*30) must be 3, not 4.
int ceil_count(double fraction, int n) {
    const int k = int(std::ceil(fraction * double(n) - 1e-9));
    return std::clamp(k, 0, n);
}

// round-half-up, same nudge rationale.
int round_count(double fraction, int n) {
    const int k = int(std::floor(fraction * double(n) + 0.5 + 1e-9));
    return std::clamp(k, 0, n);
}

double cosine(const float* a, const float* b, int dim) {
    const double ab = dot(a, b, dim);
    const double aa = dot(a, a, dim);
    const double bb = dot(b, b, dim);
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

std::vector<BranchAction> assign_actions(const std::vector<Connection>& retained, double q,
                                         const ImportanceScores& s) {
    const int k = int(retained.size());
    const int n_prune = round_count(q, k);
    // Lowest a-token importance takes Prune; pruning destroys information,
    // so it lands on the tokens that carry the least.
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
        const float si = s.s[retained[i].a_index], sj = s.s[retained[j].a_index];
        if (si != sj) return si < sj;
        return retained[i].a_index < retained[j].a_index;
    });
    std::vector<BranchAction> actions(k, BranchAction::Merge);
    for (int i = 0; i < n_prune; ++i) actions[order[i]] = BranchAction::Prune;
    return actions;
}

std::vector<float> apply_actions(std::span<const float> rows, int dim, const ReductionPlan& plan,
                                 std::span<const BranchAction> actions) {
    if (int(rows.size()) != plan.seq_len * dim)
        throw std::invalid_argument("apply_plan: tensor size does not match plan seq_len");
    std::vector<float> work(rows.begin(), rows.end());
    // Merges run in plan order; a-rows are never merge targets, so each one
    // still holds its original value when it is folded in.
    for (size_t i = 0; i < plan.connections.size(); ++i) {
        if (actions[i] != BranchAction::Merge) continue;
        const float* a = work.data() + size_t(plan.connections[i].a_index) * dim;
        float* b = work.data() + size_t(plan.connections[i].b_index) * dim;
        for (int j = 0; j < dim; ++j) b[j] = (a[j] + b[j]) * 0.5f;
    }
    return select_rows(work, dim, plan.kept_positions);
}

}  // namespace

TokenClassification classify(const ImportanceScores& s) {
    const int n = int(s.s.size());
    if (n < 2) throw std::invalid_argument("classify: need at least 2 tokens");
    const std::vector<int> order = rank_tokens(s);
    const int half = n / 2;  // odd length leaves the extra token in set_b
    TokenClassification cls;
    cls.set_a.assign(order.begin(), order.begin() + half);
    cls.set_b.assign(order.begin() + half, order.end());
    std::sort(cls.set_a.begin(), cls.set_a.end());
    std::sort(cls.set_b.begin(), cls.set_b.end());
    return cls;
}

std::vector<Connection> build_connections(std::span<const float> rows, int seq_len, int dim,
                                          const TokenClassification& cls) {
    if (int(rows.size()) != seq_len * dim)
        throw std::invalid_argument("build_connections: tensor size mismatch");
    const int na = int(cls.set_a.size());
    std::vector<Connection> conns(na);
#pragma omp parallel for
    for (int i = 0; i < na; ++i) {
        const int a = cls.set_a[i];
        const float* arow = rows.data() + size_t(a) * dim;
        int best_b = cls.set_b[0];
        double best = -2.0;
        for (int b : cls.set_b) {
            const double sim = cosine(arow, rows.data() + size_t(b) * dim, dim);
            if (sim > best) {  // strict: ties keep the smaller b position
                best = sim;
                best_b = b;
            }
        }
        conns[i] = Connection{a, best_b, float(best)};
    }
    return conns;
}

std::vector<Connection> build_connections(const HiddenStates& y, const TokenClassification& cls) {
    return build_connections(std::span<const float>(y.y), y.seq_len, y.inner_dim, cls);
}

ResidualMode residual_mode_from_string(const std::string& name) {
    if (name == "merge") return ResidualMode::Merge;
    if (name == "prune") return ResidualMode::Prune;
    if (name == "hybrid") return ResidualMode::Hybrid;
    throw std::invalid_argument("unknown residual mode '" + name + "'");
}

const char* to_string(ResidualMode mode) {
    switch (mode) {
        case ResidualMode::Merge: return "merge";
        case ResidualMode::Prune: return "prune";
        case ResidualMode::Hybrid: return "hybrid";
    }
    return "?";
}

ReductionPlan retain_and_assign_count(const std::vector<Connection>& conns, int n_retain,
                                      double q, const ImportanceScores& s,
                                      ResidualMode residual_mode, double residual_q) {
    const int n = int(conns.size());
    if (n_retain < 0 || n_retain > n)
        throw std::invalid_argument("retain_and_assign: retained count out of range");
    const int seq_len = int(s.s.size());

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
        if (conns[i].similarity != conns[j].similarity)
            return conns[i].similarity > conns[j].similarity;
        return conns[i].a_index < conns[j].a_index;
    });

    ReductionPlan plan;
    plan.seq_len = seq_len;
    plan.p = n > 0 ? double(n_retain) / n : 0.0;
    plan.q = q;
    plan.residual_mode = residual_mode;
    plan.residual_q = residual_q;
    plan.connections.reserve(n_retain);
    for (int i = 0; i < n_retain; ++i) plan.connections.push_back(conns[order[i]]);

    plan.hidden_action = assign_actions(plan.connections, q, s);
    switch (residual_mode) {
        case ResidualMode::Merge:
            plan.residual_action.assign(plan.connections.size(), BranchAction::Merge);
            break;
        case ResidualMode::Prune:
            plan.residual_action.assign(plan.connections.size(), BranchAction::Prune);
            break;
        case ResidualMode::Hybrid:
            plan.residual_action = assign_actions(plan.connections, residual_q, s);
            break;
    }

    std::vector<char> removed(seq_len, 0);
    for (const Connection& c : plan.connections) removed[c.a_index] = 1;
    plan.kept_positions.reserve(seq_len - n_retain);
    for (int t = 0; t < seq_len; ++t)
        if (!removed[t]) plan.kept_positions.push_back(t);
    return plan;
}

ReductionPlan retain_and_assign(const std::vector<Connection>& conns, double p, double q,
                                const ImportanceScores& s, ResidualMode residual_mode,
                                double residual_q) {
    if (p < 0.0 || p > 1.0 || q < 0.0 || q > 1.0)
        throw std::invalid_argument("retain_and_assign: p and q must be in [0, 1]");
    ReductionPlan plan = retain_and_assign_count(conns, ceil_count(p, int(conns.size())), q, s,
                                                 residual_mode, residual_q);
    plan.p = p;
    return plan;
}

std::vector<float> apply_plan_hidden(std::span<const float> rows, int dim,
                                     const ReductionPlan& plan) {
    return apply_actions(rows, dim, plan, plan.hidden_action);
}

std::vector<float> apply_plan_residual(std::span<const float> rows, int dim,
                                       const ReductionPlan& plan) {
    return apply_actions(rows, dim, plan, plan.residual_action);
}

std::vector<float> select_rows(std::span<const float> rows, int dim, std::span<const int> kept) {
    std::vector<float> out(kept.size() * size_t(dim));
    for (size_t i = 0; i < kept.size(); ++i)
        std::copy_n(rows.data() + size_t(kept[i]) * dim, dim, out.data() + i * size_t(dim));
    return out;
}

TokenSequence reassemble(std::span<const float> hidden_reduced, int inner_dim,
                         std::span<const float> residual_reduced, int model_dim,
                         std::span<const float> out_proj,
                         std::span<const int> incoming_positions,
                         std::span<const int> kept_positions) {
    const size_t k_hidden = hidden_reduced.size() / size_t(inner_dim);
    const size_t k_res = residual_reduced.size() / size_t(model_dim);
    if (k_hidden != k_res || k_hidden != kept_positions.size())
        throw std::invalid_argument(
            "reassemble: branch lengths disagree (removed-index misalignment)");

    TokenSequence out;
    out.seq_len = int(k_hidden);
    out.dim = model_dim;
    out.data.resize(k_hidden * size_t(model_dim));
    project_tokens(hidden_reduced.data(), out.data.data(), out_proj.data(), nullptr,
                   out.seq_len, model_dim, inner_dim);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += residual_reduced[i];
    out.positions.resize(k_hidden);
    for (size_t i = 0; i < k_hidden; ++i)
        out.positions[i] = incoming_positions[kept_positions[i]];
    return out;
}

TokenSequence reassemble(std::span<const float> hidden_reduced, int inner_dim,
                         std::span<const float> residual_reduced, int model_dim,
                         std::span<const float> out_proj,
                         std::span<const int> incoming_positions, const ReductionPlan& plan) {
    return reassemble(hidden_reduced, inner_dim, residual_reduced, model_dim, out_proj,
                      incoming_positions, std::span<const int>(plan.kept_positions));
}

std::vector<int> baseline_evit_prune(const ImportanceScores& s, double keep_ratio) {
    const int n = int(s.s.size());
    const int k = std::max(1, ceil_count(keep_ratio, n));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return s.s[a] > s.s[b]; });
    std::vector<int> kept(order.begin(), order.begin() + k);
    std::sort(kept.begin(), kept.end());
    return kept;
}

BipartitePlan build_bipartite_plan(std::span<const float> rows, int seq_len, int dim,
                                   double keep_ratio) {
    if (int(rows.size()) != seq_len * dim)
        throw std::invalid_argument("bipartite: tensor size mismatch");
    BipartitePlan plan;
    plan.seq_len = seq_len;

    std::vector<int> evens, odds;
    for (int t = 0; t < seq_len; ++t) (t % 2 == 0 ? evens : odds).push_back(t);
    int n_rm = round_count(1.0 - keep_ratio, seq_len);
    n_rm = std::min<int>(n_rm, int(evens.size()));
    if (odds.empty()) n_rm = 0;

    if (n_rm > 0) {
        std::vector<Connection> conns(evens.size());
#pragma omp parallel for
        for (int i = 0; i < int(evens.size()); ++i) {
            const int e = evens[i];
            const float* erow = rows.data() + size_t(e) * dim;
            int best_o = odds[0];
            double best = -2.0;
            for (int o : odds) {
                const double sim = cosine(erow, rows.data() + size_t(o) * dim, dim);
                if (sim > best) {
                    best = sim;
                    best_o = o;
                }
            }
            conns[i] = Connection{e, best_o, float(best)};
        }
        std::stable_sort(conns.begin(), conns.end(), [](const Connection& x, const Connection& y) {
            if (x.similarity != y.similarity) return x.similarity > y.similarity;
            return x.a_index < y.a_index;
        });
        plan.merges.assign(conns.begin(), conns.begin() + n_rm);
    }

    std::vector<char> removed(seq_len, 0);
    for (const Connection& c : plan.merges) removed[c.a_index] = 1;
    for (int t = 0; t < seq_len; ++t)
        if (!removed[t]) plan.kept_positions.push_back(t);
    return plan;
}

std::vector<float> apply_bipartite(std::span<const float> rows, int dim,
                                   const BipartitePlan& plan) {
    if (int(rows.size()) != plan.seq_len * dim)
        throw std::invalid_argument("bipartite: tensor size does not match plan");
    std::vector<float> work(rows.begin(), rows.end());
    for (const Connection& c : plan.merges) {
        const float* a = work.data() + size_t(c.a_index) * dim;
        float* b = work.data() + size_t(c.b_index) * dim;
        for (int j = 0; j < dim; ++j) b[j] = (a[j] + b[j]) * 0.5f;
    }
    return select_rows(work, dim, plan.kept_positions);
}

std::pair<std::vector<float>, std::vector<int>> baseline_bipartite_merge(
    std::span<const float> rows, int seq_len, int dim, double keep_ratio) {
    const BipartitePlan plan = build_bipartite_plan(rows, seq_len, dim, keep_ratio);
    return {apply_bipartite(rows, dim, plan), plan.kept_positions};
}

ReducerKind reducer_from_string(const std::string& name) {
    if (name == "none") return ReducerKind::None;
    if (name == "utrc") return ReducerKind::Utrc;
    if (name == "evit") return ReducerKind::Evit;
    if (name == "bipartite") return ReducerKind::Bipartite;
    throw std::invalid_argument("unknown reducer '" + name + "' (expected none|utrc|evit|bipartite)");
}

const char* to_string(ReducerKind kind) {
    switch (kind) {
        case ReducerKind::None: return "none";
        case ReducerKind::Utrc: return "utrc";
        case ReducerKind::Evit: return "evit";
        case ReducerKind::Bipartite: return "bipartite";
    }
    return "?";
}

}  // namespace ssmtkrd
