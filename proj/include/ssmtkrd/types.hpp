#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ssmtkrd {

struct ModelConfig {
    int num_layers = 1;
    int model_dim = 1;  // D: token embedding width
    int inner_dim = 1;  // D': SSM channel count
    int state_dim = 1;  // N: state size per channel
    int seq_len_max = 1;
    uint64_t seed = 0;
};

// Throws std::invalid_argument on any dimension < 1.
void validate_config(const ModelConfig& cfg);

// Per-layer parameters. Projections are row-major [rows x cols] applied as
// y = W x (+ bias). A is stored by its diagonal and must be strictly
// negative; delta goes through softplus, so the stored tensor is the raw
// pre-activation projection.
struct LayerWeights {
    std::vector<float> in_proj;     // [inner_dim x model_dim]
    std::vector<float> out_proj;    // [model_dim x inner_dim]
    std::vector<float> a_diag;      // [state_dim]
    std::vector<float> b_proj;      // [state_dim x inner_dim]
    std::vector<float> b_bias;      // [state_dim]
    std::vector<float> c_proj;      // [state_dim x inner_dim]
    std::vector<float> c_bias;      // [state_dim]
    std::vector<float> delta_proj;  // [inner_dim x inner_dim]
    std::vector<float> delta_bias;  // [inner_dim]
};

// Throws std::invalid_argument if tensor sizes do not match cfg or if
// a_diag has a non-negative entry.
void validate_weights(const LayerWeights& w, const ModelConfig& cfg);

struct Model {
    ModelConfig config;
    std::vector<LayerWeights> layers;
};

// One sequence of token embeddings plus the original index of every
// surviving row. positions stays strictly increasing through reductions.
struct TokenSequence {
    int seq_len = 0;
    int dim = 0;
    std::vector<float> data;     // [seq_len x dim]
    std::vector<int> positions;  // length seq_len

    static TokenSequence zeros(int seq_len, int dim);

    float* row(int t) { return data.data() + size_t(t) * dim; }
    const float* row(int t) const { return data.data() + size_t(t) * dim; }
};

struct HiddenStates {
    int seq_len = 0;
    int inner_dim = 0;
    std::vector<float> y;  // [seq_len x inner_dim]

    static HiddenStates zeros(int seq_len, int inner_dim);

    float* row(int t) { return y.data() + size_t(t) * inner_dim; }
    const float* row(int t) const { return y.data() + size_t(t) * inner_dim; }
};

// Throws std::invalid_argument naming `what` when v holds a NaN or Inf.
void check_finite(std::span<const float> v, const char* what);

}  // namespace ssmtkrd
