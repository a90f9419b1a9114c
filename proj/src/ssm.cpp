#include "ssmtkrd/ssm.hpp"

#include <cmath>
#include <stdexcept>

#include "ssmtkrd/linalg.hpp"

namespace ssmtkrd {

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double phi1(double z) {
    if (std::abs(z) < 1e-4) return 1.0 + z * 0.5 + z * z * (1.0 / 6.0);
    return std::expm1(z) / z;
}

void discretize(std::span<const float> a_diag, std::span<const float> b_t, float delta_t,
                std::span<float> a_bar, std::span<float> b_bar) {
    if (!(delta_t > 0.0f)) throw std::invalid_argument("discretize: delta must be positive");
    const int n = int(a_diag.size());
    for (int i = 0; i < n; ++i) {
        const double z = double(delta_t) * double(a_diag[i]);
        a_bar[i] = float(std::exp(z));
        b_bar[i] = float(double(delta_t) * double(b_t[i]) * phi1(z));
    }
}

ScanParams compute_scan_params(const HiddenStates& x, const LayerWeights& w,
                               const ModelConfig& cfg) {
    const int L = x.seq_len, dp = cfg.inner_dim, n = cfg.state_dim;
    if (x.inner_dim != dp)
        throw std::invalid_argument("compute_scan_params: inner dimension mismatch");
    ScanParams p;
    p.seq_len = L;
    p.inner_dim = dp;
    p.state_dim = n;
    p.b.resize(size_t(L) * n);
    p.c.resize(size_t(L) * n);
    p.delta.resize(size_t(L) * dp);
    project_tokens(x.y.data(), p.b.data(), w.b_proj.data(), w.b_bias.data(), L, n, dp);
    project_tokens(x.y.data(), p.c.data(), w.c_proj.data(), w.c_bias.data(), L, n, dp);
    project_tokens(x.y.data(), p.delta.data(), w.delta_proj.data(), w.delta_bias.data(), L, dp,
                   dp);
    // softplus underflows to 0 in float for raws below about -90; clamp to
    // keep the delta > 0 invariant
    for (auto& d : p.delta) d = std::max(float(softplus(double(d))), 1e-30f);
    return p;
}

HiddenStates scan_recurrence(const HiddenStates& x, std::span<const float> a_diag,
                             const ScanParams& p, std::vector<float>* final_state) {
    const int L = p.seq_len, dp = p.inner_dim, n = p.state_dim;
    HiddenStates out = HiddenStates::zeros(L, dp);
    std::vector<float> h(size_t(dp) * n, 0.0f);

    // Each channel's recurrence chain is independent and owned by a single
    // thread, so the result does not depend on the thread count.
#pragma omp parallel for
    for (int d = 0; d < dp; ++d) {
        float* hd = h.data() + size_t(d) * n;
        std::vector<float> a_bar(n), b_bar(n);
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
    if (final_state) *final_state = std::move(h);
    return out;
}

HiddenStates selective_scan(const HiddenStates& x, const LayerWeights& w, const ModelConfig& cfg,
                            std::vector<float>* final_state) {
    const ScanParams p = compute_scan_params(x, w, cfg);
    return scan_recurrence(x, w.a_diag, p, final_state);
}

HiddenStates kernel_convolve_lti(const HiddenStates& x, std::span<const float> a_bar,
                                 std::span<const float> b_bar, std::span<const float> c,
                                 int state_dim) {
    const int L = x.seq_len, dp = x.inner_dim, n = state_dim;
    HiddenStates out = HiddenStates::zeros(L, dp);

#pragma omp parallel for
    for (int d = 0; d < dp; ++d) {
        // K[j] = c . (a_bar^j b_bar): accumulate the power by repeated
        // elementwise multiply.
        std::vector<float> w(b_bar.begin() + size_t(d) * n, b_bar.begin() + size_t(d + 1) * n);
        const float* ad = a_bar.data() + size_t(d) * n;
        std::vector<float> kernel(L);
        for (int j = 0; j < L; ++j) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += double(c[i]) * double(w[i]);
            kernel[j] = float(acc);
            for (int i = 0; i < n; ++i) w[i] *= ad[i];
        }
        for (int t = 0; t < L; ++t) {
            double acc = 0.0;
            for (int j = 0; j <= t; ++j)
                acc += double(kernel[j]) * double(x.y[size_t(t - j) * dp + d]);
            out.y[size_t(t) * dp + d] = float(acc);
        }
    }
    return out;
}

HiddenStates kernel_convolve(const HiddenStates& x, const LayerWeights& w,
                             const ModelConfig& cfg) {
    const ScanParams p = compute_scan_params(x, w, cfg);
    const int L = p.seq_len, dp = p.inner_dim, n = p.state_dim;
    for (int t = 1; t < L; ++t) {
        for (int i = 0; i < n; ++i)
            if (p.b[size_t(t) * n + i] != p.b[i] || p.c[size_t(t) * n + i] != p.c[i])
                throw std::invalid_argument(
                    "kernel_convolve: parameters vary across tokens (unsupported mode)");
        for (int d = 0; d < dp; ++d)
            if (p.delta[size_t(t) * dp + d] != p.delta[d])
                throw std::invalid_argument(
                    "kernel_convolve: parameters vary across tokens (unsupported mode)");
    }

    std::vector<float> a_bar(size_t(dp) * n), b_bar(size_t(dp) * n);
    for (int d = 0; d < dp; ++d)
        discretize(w.a_diag, std::span<const float>(p.b.data(), n), p.delta[d],
                   std::span<float>(a_bar.data() + size_t(d) * n, n),
                   std::span<float>(b_bar.data() + size_t(d) * n, n));
    return kernel_convolve_lti(x, a_bar, b_bar, std::span<const float>(p.c.data(), n), n);
}

BlockOutput block_forward(const TokenSequence& t_prev, const LayerWeights& w,
                          const ModelConfig& cfg) {
    if (t_prev.dim != cfg.model_dim)
        throw std::invalid_argument("block_forward: token dimension does not match config");

    HiddenStates x = HiddenStates::zeros(t_prev.seq_len, cfg.inner_dim);
    project_tokens(t_prev.data.data(), x.y.data(), w.in_proj.data(), nullptr, t_prev.seq_len,
                   cfg.inner_dim, cfg.model_dim);

    BlockOutput out;
    out.y = selective_scan(x, w, cfg);

    out.t_next.seq_len = t_prev.seq_len;
    out.t_next.dim = cfg.model_dim;
    out.t_next.positions = t_prev.positions;
    out.t_next.data.resize(t_prev.data.size());
    project_tokens(out.y.y.data(), out.t_next.data.data(), w.out_proj.data(), nullptr,
                   t_prev.seq_len, cfg.model_dim, cfg.inner_dim);
    for (size_t i = 0; i < out.t_next.data.size(); ++i) out.t_next.data[i] += t_prev.data[i];

    check_finite(out.t_next.data, "block output");
    return out;
}

}  // namespace ssmtkrd
