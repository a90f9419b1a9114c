#include "ssmtkrd/types.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ssmtkrd {

void validate_config(const ModelConfig& cfg) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("invalid config: ") + what);
    };
    require(cfg.num_layers >= 1, "num_layers must be >= 1");
    require(cfg.model_dim >= 1, "model_dim must be >= 1");
    require(cfg.inner_dim >= 1, "inner_dim must be >= 1");
    require(cfg.state_dim >= 1, "state_dim must be >= 1");
    require(cfg.seq_len_max >= 1, "seq_len_max must be >= 1");
}

void validate_weights(const LayerWeights& w, const ModelConfig& cfg) {
    const size_t d = size_t(cfg.model_dim), dp = size_t(cfg.inner_dim), n = size_t(cfg.state_dim);
    auto expect = [](size_t got, size_t want, const char* name) {
        if (got != want)
            throw std::invalid_argument(std::string("weight tensor ") + name + " has wrong size");
    };
    expect(w.in_proj.size(), dp * d, "in_proj");
    expect(w.out_proj.size(), d * dp, "out_proj");
    expect(w.a_diag.size(), n, "a_diag");
    expect(w.b_proj.size(), n * dp, "b_proj");
    expect(w.b_bias.size(), n, "b_bias");
    expect(w.c_proj.size(), n * dp, "c_proj");
    expect(w.c_bias.size(), n, "c_bias");
    expect(w.delta_proj.size(), dp * dp, "delta_proj");
    expect(w.delta_bias.size(), dp, "delta_bias");
    for (float a : w.a_diag)
        if (!(a < 0.0f)) throw std::invalid_argument("a_diag entries must be strictly negative");
}

TokenSequence TokenSequence::zeros(int seq_len, int dim) {
    TokenSequence t;
    t.seq_len = seq_len;
    t.dim = dim;
    t.data.assign(size_t(seq_len) * dim, 0.0f);
    t.positions.resize(seq_len);
    for (int i = 0; i < seq_len; ++i) t.positions[i] = i;
    return t;
}

HiddenStates HiddenStates::zeros(int seq_len, int inner_dim) {
    HiddenStates h;
    h.seq_len = seq_len;
    h.inner_dim = inner_dim;
    h.y.assign(size_t(seq_len) * inner_dim, 0.0f);
    return h;
}

void check_finite(std::span<const float> v, const char* what) {
    for (float x : v)
        if (!std::isfinite(x))
            throw std::invalid_argument(std::string(what) + " contains a non-finite value");
}

}  // namespace ssmtkrd
