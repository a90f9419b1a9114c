#include "ssmtkrd/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ssmtkrd/rng.hpp"

namespace ssmtkrd {

namespace {

using nlohmann::json;

constexpr size_t kAlign = 64;

size_t align_up(size_t x) { return (x + kAlign - 1) / kAlign * kAlign; }

struct TensorRef {
    std::string name;
    std::vector<size_t> shape;
    const std::vector<float>* data;
};

// Manifest order is also the PRNG fill order; changing it would change
// checkpoint bytes.
std::vector<TensorRef> tensor_refs(const Model& model) {
    std::vector<TensorRef> refs;
    const size_t d = size_t(model.config.model_dim);
    const size_t dp = size_t(model.config.inner_dim);
    const size_t n = size_t(model.config.state_dim);
    for (size_t l = 0; l < model.layers.size(); ++l) {
        const LayerWeights& w = model.layers[l];
        const std::string prefix = "layers." + std::to_string(l) + ".";
        refs.push_back({prefix + "in_proj", {dp, d}, &w.in_proj});
        refs.push_back({prefix + "out_proj", {d, dp}, &w.out_proj});
        refs.push_back({prefix + "a_diag", {n}, &w.a_diag});
        refs.push_back({prefix + "b_proj", {n, dp}, &w.b_proj});
        refs.push_back({prefix + "b_bias", {n}, &w.b_bias});
        refs.push_back({prefix + "c_proj", {n, dp}, &w.c_proj});
        refs.push_back({prefix + "c_bias", {n}, &w.c_bias});
        refs.push_back({prefix + "delta_proj", {dp, dp}, &w.delta_proj});
        refs.push_back({prefix + "delta_bias", {dp}, &w.delta_bias});
    }
    return refs;
}

void fill_uniform(Xoshiro256pp& rng, std::vector<float>& v, size_t count, float bound) {
    v.resize(count);
    for (auto& x : v) x = rng.uniform(-bound, bound);
}

uint32_t read_u32le(const uint8_t* p) {
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
           (uint32_t(p[3]) << 24);
}

}  // namespace

Model generate_model(const ModelConfig& cfg) {
    validate_config(cfg);
    Model model;
    model.config = cfg;
    model.layers.resize(cfg.num_layers);

    const size_t d = size_t(cfg.model_dim), dp = size_t(cfg.inner_dim), n = size_t(cfg.state_dim);
    const float inv_sqrt_d = 1.0f / std::sqrt(float(cfg.model_dim));
    const float inv_sqrt_dp = 1.0f / std::sqrt(float(cfg.inner_dim));
    const float ln16 = float(std::log(16.0));

    Xoshiro256pp rng(cfg.seed);
    for (LayerWeights& w : model.layers) {
        fill_uniform(rng, w.in_proj, dp * d, inv_sqrt_d);
        fill_uniform(rng, w.out_proj, d * dp, inv_sqrt_dp);
        w.a_diag.resize(n);
        for (auto& a : w.a_diag) a = -float(det_exp(double(rng.uniform(0.0f, ln16))));
        fill_uniform(rng, w.b_proj, n * dp, inv_sqrt_dp);
        // Unit-scale B/C bias base with the data-dependent projection as
        // modulation. Without normalization layers every 1/sqrt(fan_in)
        // stage loses a 1/sqrt(3) gain, and a purely data-dependent B, C
        // would leave the SSM branch orders of magnitude under the
        // residual stream.
        fill_uniform(rng, w.b_bias, n, 1.0f);
        fill_uniform(rng, w.c_proj, n * dp, inv_sqrt_dp);
        fill_uniform(rng, w.c_bias, n, 1.0f);
        fill_uniform(rng, w.delta_proj, dp * dp, inv_sqrt_dp);
        // delta bias targets softplus(bias) log-uniform in [0.01, 0.25], a
        // spread of state timescales from a couple of tokens up to ~100.
        // A plain uniform bias would put every half-life under one token
        // and the stack would carry no context worth reducing. Closed-form
        // inverse softplus to first order; fixed-order arithmetic only.
        w.delta_bias.resize(dp);
        for (auto& b : w.delta_bias) {
            const double v = double(rng.uniform01());
            const double log_dt = -3.912023005428146 + v * 2.5257286443082556;  // ln .02..ln .25
            const double dt = 0.02 * det_exp(v * 2.5257286443082556);
            b = float(log_dt + 0.5 * dt);
        }
        validate_weights(w, cfg);
    }
    return model;
}

std::vector<uint8_t> serialize_checkpoint(const Model& model) {
    validate_config(model.config);
    const std::vector<TensorRef> refs = tensor_refs(model);

    // The header embeds absolute offsets that depend on the header's own
    // length, so iterate until the length is stable.
    const auto dump_with = [&](size_t assumed_len) {
        json manifest = json::array();
        size_t offset = align_up(12 + assumed_len);
        for (const TensorRef& r : refs) {
            size_t elems = 1;
            for (size_t s : r.shape) elems *= s;
            manifest.push_back(
                {{"name", r.name}, {"shape", r.shape}, {"dtype", "f32"}, {"offset", offset}});
            offset = align_up(offset + elems * 4);
        }
        json header_json = {{"config",
                             {{"num_layers", model.config.num_layers},
                              {"model_dim", model.config.model_dim},
                              {"inner_dim", model.config.inner_dim},
                              {"state_dim", model.config.state_dim},
                              {"seq_len_max", model.config.seq_len_max},
                              {"seed", model.config.seed}}},
                            {"tensors", manifest}};
        return header_json.dump();
    };

    std::string header;
    size_t assumed = 0;
    bool stable = false;
    for (int pass = 0; pass < 8; ++pass) {
        std::string dumped = dump_with(assumed);
        if (dumped.size() == assumed) {
            header = std::move(dumped);
            stable = true;
            break;
        }
        assumed = dumped.size();
    }
    if (!stable)
        throw std::runtime_error("serialize_checkpoint: header length did not stabilize");

    std::vector<uint8_t> out;
    out.reserve(align_up(12 + header.size()));
    out.insert(out.end(), std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
    const uint32_t hlen = uint32_t(header.size());
    for (int b = 0; b < 4; ++b) out.push_back(uint8_t(hlen >> (8 * b)));
    out.insert(out.end(), header.begin(), header.end());

    for (const TensorRef& r : refs) {
        out.resize(align_up(out.size()), 0);
        const size_t bytes = r.data->size() * 4;
        const size_t at = out.size();
        out.resize(at + bytes);
        std::memcpy(out.data() + at, r.data->data(), bytes);  // f32, little-endian hosts
    }
    return out;
}

Model parse_checkpoint(std::span<const uint8_t> bytes) {
    if (bytes.size() < 12 ||
        std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    const uint32_t header_len = read_u32le(bytes.data() + 8);
    if (12 + size_t(header_len) > bytes.size())
        throw std::runtime_error("checkpoint: truncated header");

    json header;
    try {
        header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("checkpoint: header is not valid JSON: ") + e.what());
    }

    Model model;
    const json& cfg = header.at("config");
    model.config.num_layers = cfg.at("num_layers").get<int>();
    model.config.model_dim = cfg.at("model_dim").get<int>();
    model.config.inner_dim = cfg.at("inner_dim").get<int>();
    model.config.state_dim = cfg.at("state_dim").get<int>();
    model.config.seq_len_max = cfg.at("seq_len_max").get<int>();
    model.config.seed = cfg.at("seed").get<uint64_t>();
    validate_config(model.config);
    model.layers.resize(model.config.num_layers);

    const std::vector<TensorRef> expected = [&] {
        Model probe;
        probe.config = model.config;
        probe.layers.resize(model.config.num_layers);
        return tensor_refs(probe);
    }();

    const json& tensors = header.at("tensors");
    if (!tensors.is_array() || tensors.size() != expected.size())
        throw std::runtime_error("checkpoint: tensor manifest has wrong entry count");

    size_t prev_end = 0;
    std::vector<LayerWeights>& layers = model.layers;
    for (size_t i = 0; i < tensors.size(); ++i) {
        const json& t = tensors[i];
        const std::string name = t.at("name").get<std::string>();
        if (name != expected[i].name)
            throw std::runtime_error("checkpoint: unexpected tensor '" + name + "' (expected '" +
                                     expected[i].name + "')");
        if (t.at("dtype").get<std::string>() != "f32")
            throw std::runtime_error("checkpoint: tensor '" + name + "' has unsupported dtype");
        const std::vector<size_t> shape = t.at("shape").get<std::vector<size_t>>();
        if (shape != expected[i].shape)
            throw std::runtime_error("checkpoint: tensor '" + name + "' has wrong shape");
        const size_t offset = t.at("offset").get<size_t>();
        if (offset % kAlign != 0)
            throw std::runtime_error("checkpoint: misaligned offset for tensor '" + name + "'");
        if (i == 0) {
            if (offset < 12 + size_t(header_len))
                throw std::runtime_error("checkpoint: tensor '" + name + "' overlaps the header");
        } else if (offset < prev_end) {
            throw std::runtime_error("checkpoint: offsets not ascending at tensor '" + name +
                                     "'");
        }
        size_t elems = 1;
        for (size_t s : shape) elems *= s;
        const size_t bytes_len = elems * 4;
        if (offset + bytes_len > bytes.size())
            throw std::runtime_error("checkpoint: truncated file inside tensor '" + name + "'");
        prev_end = offset + bytes_len;

        // name = layers.<l>.<field>
        const size_t dot1 = name.find('.'), dot2 = name.find('.', dot1 + 1);
        const int layer = std::stoi(name.substr(dot1 + 1, dot2 - dot1 - 1));
        const std::string field = name.substr(dot2 + 1);
        std::vector<float>* dst = nullptr;
        LayerWeights& w = layers[layer];
        if (field == "in_proj") dst = &w.in_proj;
        else if (field == "out_proj") dst = &w.out_proj;
        else if (field == "a_diag") dst = &w.a_diag;
        else if (field == "b_proj") dst = &w.b_proj;
        else if (field == "b_bias") dst = &w.b_bias;
        else if (field == "c_proj") dst = &w.c_proj;
        else if (field == "c_bias") dst = &w.c_bias;
        else if (field == "delta_proj") dst = &w.delta_proj;
        else if (field == "delta_bias") dst = &w.delta_bias;
        else throw std::runtime_error("checkpoint: unknown tensor field '" + field + "'");
        dst->resize(elems);
        std::memcpy(dst->data(), bytes.data() + offset, bytes_len);
    }
    if (prev_end != bytes.size())
        throw std::runtime_error("checkpoint: file size does not match manifest");

    for (const LayerWeights& w : model.layers) validate_weights(w, model.config);
    return model;
}

void save_checkpoint(const Model& model, const std::string& path) {
    const std::vector<uint8_t> bytes = serialize_checkpoint(model);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes);
}

void generate_checkpoint(const ModelConfig& cfg, const std::string& path) {
    save_checkpoint(generate_model(cfg), path);
}

}  // namespace ssmtkrd
