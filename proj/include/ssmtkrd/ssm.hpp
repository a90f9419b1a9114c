#pragma once

#include <span>
#include <vector>

#include "ssmtkrd/reduction.hpp"
#include "ssmtkrd/schedule.hpp"
#include "ssmtkrd/types.hpp"

namespace ssmtkrd {

// ZOH discretization for one token/channel pair with scalar delta:
//   a_bar[n] = exp(delta * a[n])
//   b_bar[n] = delta * b[n] * phi1(delta * a[n]),  phi1(z) = (e^z - 1)/z
// phi1 switches to its 2nd-order series below |z| = 1e-4 (the closed form
// cancels catastrophically there). Throws std::invalid_argument for
// delta <= 0. a entries must be nonzero (validated at load).
void discretize(std::span<const float> a_diag, std::span<const float> b_t, float delta_t,
                std::span<float> a_bar, std::span<float> b_bar);

// phi1 with the series branch, exposed for tests.
double phi1(double z);

// Numerically stable log(1 + e^x); the positivity map for delta.
double softplus(double x);

// Per-token SSM parameters computed from x by the layer projections.
// delta is already through softplus (positive).
struct ScanParams {
    int seq_len = 0;
    int inner_dim = 0;
    int state_dim = 0;
    std::vector<float> b;      // [seq_len x state_dim]
    std::vector<float> c;      // [seq_len x state_dim]
    std::vector<float> delta;  // [seq_len x inner_dim]
};

ScanParams compute_scan_params(const HiddenStates& x, const LayerWeights& w,
                               const ModelConfig& cfg);

// h_t = a_bar h_{t-1} + b_bar x_t, y_t[d] = sum_n c_t[n] h_t[d][n], h_0 = 0.
// Sequential in t, parallel over channels d (each channel's chain is owned
// by one thread, so outputs are thread-count independent). When final_state
// is non-null it receives h after the last token, [inner_dim x state_dim].
HiddenStates scan_recurrence(const HiddenStates& x, std::span<const float> a_diag,
                             const ScanParams& p, std::vector<float>* final_state = nullptr);

HiddenStates selective_scan(const HiddenStates& x, const LayerWeights& w,
                            const ModelConfig& cfg, std::vector<float>* final_state = nullptr);

// Kernel form of the same map, valid only for time-invariant parameters:
//   K[j] = c . (a_bar^j b_bar),  y_t = sum_{j<=t} K[j] x_{t-j}
// The weights-based overload recomputes the per-token parameters and throws
// std::invalid_argument if they vary across tokens.
HiddenStates kernel_convolve_lti(const HiddenStates& x, std::span<const float> a_bar,
                                 std::span<const float> b_bar, std::span<const float> c,
                                 int state_dim);
HiddenStates kernel_convolve(const HiddenStates& x, const LayerWeights& w,
                             const ModelConfig& cfg);

// x = in_proj(T); y = selective_scan(x); T_next = out_proj(y) + T.
struct BlockOutput {
    TokenSequence t_next;
    HiddenStates y;
};

BlockOutput block_forward(const TokenSequence& t_prev, const LayerWeights& w,
                          const ModelConfig& cfg);

struct ForwardTrace {
    std::vector<int> tokens_entering;  // one entry per layer
};

struct ForwardResult {
    TokenSequence final;
    ForwardTrace trace;
};

// Per-layer recurrent state captured at prefill, for plain decode steps.
struct DecodeState {
    std::vector<std::vector<float>> h;  // per layer, [inner_dim x state_dim]
};

// Runs the stack layer by layer. At every schedule layer the configured
// reducer consumes this layer's y, builds one plan, and applies it to the
// hidden and residual branches before they recombine. The trace records
// seq_len entering every layer.
ForwardResult model_forward(const TokenSequence& tokens, const Model& model,
                            const ReductionSchedule& schedule, const ReducerConfig& reducer,
                            DecodeState* decode_state = nullptr);

// One autoregressive step: advances every layer's recurrent state with the
// given token vector and returns the next residual-stream vector in place.
void decode_step(std::span<float> token_vec, const Model& model, DecodeState& state);

}  // namespace ssmtkrd
