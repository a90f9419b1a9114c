#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ssmtkrd/linalg.hpp"
#include "ssmtkrd/ssm.hpp"

namespace ssmtkrd {

namespace {

int removal_count(double keep_ratio, int seq_len) {
    const double frac = 1.0 - keep_ratio;
    const int n = int(std::floor(frac * double(seq_len) + 0.5 + 1e-9));
    return std::clamp(n, 0, seq_len);
}

bool contains_all(const std::vector<int>& sorted_kept, const std::vector<int>& wanted) {
    for (int w : wanted)
        if (!std::binary_search(sorted_kept.begin(), sorted_kept.end(), w)) return false;
    return true;
}

}  // namespace

ForwardResult model_forward(const TokenSequence& tokens, const Model& model,
                            const ReductionSchedule& schedule, const ReducerConfig& reducer,
                            DecodeState* decode_state) {
    const ModelConfig& cfg = model.config;
    validate_config(cfg);
    if (int(model.layers.size()) != cfg.num_layers)
        throw std::invalid_argument("model_forward: layer count does not match config");
    for (size_t i = 0; i < schedule.layers.size(); ++i) {
        if (schedule.layers[i] < 0 || schedule.layers[i] >= cfg.num_layers)
            throw std::invalid_argument("model_forward: schedule layer out of range");
        if (i > 0 && schedule.layers[i] <= schedule.layers[i - 1])
            throw std::invalid_argument("model_forward: schedule layers must increase");
    }
    if (!(schedule.per_layer_keep > 0.0 && schedule.per_layer_keep <= 1.0))
        throw std::invalid_argument("model_forward: per-layer keep ratio must be in (0, 1]");

    if (decode_state) decode_state->h.assign(cfg.num_layers, {});

    ForwardResult res;
    res.trace.tokens_entering.reserve(cfg.num_layers);
    TokenSequence t = tokens;

    for (int l = 0; l < cfg.num_layers; ++l) {
        res.trace.tokens_entering.push_back(t.seq_len);
        const LayerWeights& w = model.layers[l];

        const bool reduce_here =
            reducer.kind != ReducerKind::None &&
            std::binary_search(schedule.layers.begin(), schedule.layers.end(), l) &&
            removal_count(schedule.per_layer_keep, t.seq_len) > 0;

        if (!reduce_here) {
            HiddenStates x = HiddenStates::zeros(t.seq_len, cfg.inner_dim);
            project_tokens(t.data.data(), x.y.data(), w.in_proj.data(), nullptr, t.seq_len,
                           cfg.inner_dim, cfg.model_dim);
            std::vector<float>* fs = decode_state ? &decode_state->h[l] : nullptr;
            HiddenStates y = selective_scan(x, w, cfg, fs);

            TokenSequence next;
            next.seq_len = t.seq_len;
            next.dim = cfg.model_dim;
            next.positions = t.positions;
            next.data.resize(t.data.size());
            project_tokens(y.y.data(), next.data.data(), w.out_proj.data(), nullptr, t.seq_len,
                           cfg.model_dim, cfg.inner_dim);
            for (size_t i = 0; i < next.data.size(); ++i) next.data[i] += t.data[i];
            check_finite(next.data, "layer output");
            t = std::move(next);
            continue;
        }

        const int L = t.seq_len;
        const int n_rm = removal_count(schedule.per_layer_keep, L);
        if (n_rm > L - 1)
            throw std::invalid_argument("model_forward: plan removes more than seq_len-1 tokens");

        HiddenStates x = HiddenStates::zeros(L, cfg.inner_dim);
        project_tokens(t.data.data(), x.y.data(), w.in_proj.data(), nullptr, L, cfg.inner_dim,
                       cfg.model_dim);
        std::vector<float>* fs = decode_state ? &decode_state->h[l] : nullptr;
        HiddenStates y = selective_scan(x, w, cfg, fs);

        switch (reducer.kind) {
            case ReducerKind::Utrc: {
                const ImportanceScores scores = importance(y, reducer.metric);
                const TokenClassification cls = classify(scores);
                if (n_rm > int(cls.set_a.size()))
                    throw std::invalid_argument(
                        "model_forward: utrc cannot remove more than half the tokens per layer");
                const std::vector<Connection> conns = build_connections(y, cls);
                const ReductionPlan plan =
                    retain_and_assign_count(conns, n_rm, reducer.q, scores,
                                            reducer.residual_mode, reducer.residual_q);
                const std::vector<float> y_red = apply_plan_hidden(y.y, cfg.inner_dim, plan);
                const std::vector<float> t_red = apply_plan_residual(t.data, cfg.model_dim, plan);
                TokenSequence next = reassemble(y_red, cfg.inner_dim, t_red, cfg.model_dim,
                                                w.out_proj, t.positions, plan);
                // Both invariants hold by construction; verify anyway, every
                // schedule layer.
                if (!contains_all(plan.kept_positions, cls.set_b))
                    throw std::logic_error("model_forward: utrc removed a set_b token");
                check_finite(next.data, "layer output");
                t = std::move(next);
                break;
            }
            case ReducerKind::Evit: {
                const ImportanceScores scores = importance(y, reducer.metric);
                // count conservation: every reducer removes the same
                // round((1-r)*L) tokens at a wave, so pass the realized
                // ratio rather than the nominal one
                std::vector<int> kept =
                    baseline_evit_prune(scores, double(L - n_rm) / double(L));
                const std::vector<float> y_red = select_rows(y.y, cfg.inner_dim, kept);
                const std::vector<float> t_red = select_rows(t.data, cfg.model_dim, kept);
                TokenSequence next = reassemble(y_red, cfg.inner_dim, t_red, cfg.model_dim,
                                                w.out_proj, t.positions, kept);
                check_finite(next.data, "layer output");
                t = std::move(next);
                break;
            }
            case ReducerKind::Bipartite: {
                const BipartitePlan plan =
                    build_bipartite_plan(y.y, L, cfg.inner_dim, schedule.per_layer_keep);
                const std::vector<float> y_red = apply_bipartite(y.y, cfg.inner_dim, plan);
                BipartitePlan res_plan = plan;  // same merges, residual row width
                const std::vector<float> t_red = apply_bipartite(t.data, cfg.model_dim, res_plan);
                TokenSequence next = reassemble(y_red, cfg.inner_dim, t_red, cfg.model_dim,
                                                w.out_proj, t.positions, plan.kept_positions);
                check_finite(next.data, "layer output");
                t = std::move(next);
                break;
            }
            case ReducerKind::None:
                break;  // unreachable
        }
    }

    res.final = std::move(t);
    return res;
}

void decode_step(std::span<float> token_vec, const Model& model, DecodeState& state) {
    const ModelConfig& cfg = model.config;
    const int d_model = cfg.model_dim, dp = cfg.inner_dim, n = cfg.state_dim;
    if (int(token_vec.size()) != d_model)
        throw std::invalid_argument("decode_step: vector width does not match config");
    if (int(state.h.size()) != cfg.num_layers)
        throw std::invalid_argument("decode_step: state not initialized (run a prefill first)");

    std::vector<float> x(dp), b(n), c(n), delta_raw(dp), a_bar(n), b_bar(n), y(dp),
        proj(d_model);
    for (int l = 0; l < cfg.num_layers; ++l) {
        const LayerWeights& w = model.layers[l];
        std::vector<float>& h = state.h[l];
        if (h.empty()) h.assign(size_t(dp) * n, 0.0f);

        // Single-token projections; bias seeds the accumulator exactly like
        // project_tokens so a step extends a prefill bit-for-bit.
        project_tokens(token_vec.data(), x.data(), w.in_proj.data(), nullptr, 1, dp, d_model);
        project_tokens(x.data(), b.data(), w.b_proj.data(), w.b_bias.data(), 1, n, dp);
        project_tokens(x.data(), c.data(), w.c_proj.data(), w.c_bias.data(), 1, n, dp);
        project_tokens(x.data(), delta_raw.data(), w.delta_proj.data(), w.delta_bias.data(), 1,
                       dp, dp);

        for (int d = 0; d < dp; ++d) {
            const float delta = std::max(float(softplus(double(delta_raw[d]))), 1e-30f);
            discretize(w.a_diag, b, delta, a_bar, b_bar);
            float* hd = h.data() + size_t(d) * n;
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                hd[i] = a_bar[i] * hd[i] + b_bar[i] * x[d];
                acc += double(c[i]) * double(hd[i]);
            }
            y[d] = float(acc);
        }

        project_tokens(y.data(), proj.data(), w.out_proj.data(), nullptr, 1, d_model, dp);
        for (int i = 0; i < d_model; ++i) token_vec[i] += proj[i];
    }
}

}  // namespace ssmtkrd
