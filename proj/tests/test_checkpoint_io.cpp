#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ssmtkrd/checkpoint.hpp"
#include "ssmtkrd/sha256.hpp"

using namespace ssmtkrd;

namespace {

const ModelConfig kSmall{2, 8, 16, 4, 64, 1234};

std::vector<uint8_t> bytes_of(const Model& m) { return serialize_checkpoint(m); }

}  // namespace

TEST_CASE("sha256 known vectors") {
    const auto hex = [](const char* s) {
        return sha256_hex(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(s),
                                                   std::strlen(s)));
    };
    CHECK(hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    // 56 bytes forces the two-block padding path
    CHECK(hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("identical config and seed give identical bytes") {
    const auto b1 = bytes_of(generate_model(kSmall));
    const auto b2 = bytes_of(generate_model(kSmall));
    CHECK(b1 == b2);
    CHECK(sha256_hex(b1) == sha256_hex(b2));
}

TEST_CASE("different seeds change a_diag but keep it negative") {
    ModelConfig other = kSmall;
    other.seed = 99;
    const Model m1 = generate_model(kSmall);
    const Model m2 = generate_model(other);
    CHECK(m1.layers[0].a_diag != m2.layers[0].a_diag);
    for (const Model* m : {&m1, &m2})
        for (const LayerWeights& w : m->layers)
            for (float a : w.a_diag) {
                CHECK(a < 0.0f);
                CHECK(a >= -16.0f);
                CHECK(a <= -1.0f);
            }
}

TEST_CASE("manifest lists exactly the per-layer tensors, aligned and ascending") {
    const auto bytes = bytes_of(generate_model(kSmall));
    const uint32_t hlen = uint32_t(bytes[8]) | (uint32_t(bytes[9]) << 8) |
                          (uint32_t(bytes[10]) << 16) | (uint32_t(bytes[11]) << 24);
    const auto header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + hlen);
    const auto& tensors = header.at("tensors");
    const char* fields[] = {"in_proj", "out_proj", "a_diag",     "b_proj",    "b_bias",
                            "c_proj",  "c_bias",   "delta_proj", "delta_bias"};
    REQUIRE(tensors.size() == 2 * 9);
    size_t idx = 0, prev_end = 0;
    for (int layer = 0; layer < 2; ++layer)
        for (const char* f : fields) {
            const auto& t = tensors[idx++];
            CHECK(t.at("name") == "layers." + std::to_string(layer) + "." + f);
            CHECK(t.at("dtype") == "f32");
            const size_t offset = t.at("offset").get<size_t>();
            CHECK(offset % 64 == 0);
            CHECK(offset >= prev_end);
            size_t elems = 1;
            for (size_t s : t.at("shape").get<std::vector<size_t>>()) elems *= s;
            prev_end = offset + elems * 4;
        }
    CHECK(prev_end == bytes.size());
}

TEST_CASE("round trip: generate -> parse -> re-serialize is byte-identical") {
    const Model m = generate_model(kSmall);
    const auto b1 = bytes_of(m);
    const Model loaded = parse_checkpoint(b1);
    const auto b2 = bytes_of(loaded);
    CHECK(b1 == b2);
    CHECK(loaded.config.seed == kSmall.seed);
    CHECK(loaded.layers[1].delta_bias == m.layers[1].delta_bias);
}

TEST_CASE("file round trip through disk") {
    const std::string path = "test_ckpt_roundtrip.bin";
    generate_checkpoint(kSmall, path);
    const Model loaded = load_checkpoint(path);
    const Model fresh = generate_model(kSmall);
    CHECK(loaded.layers[0].in_proj == fresh.layers[0].in_proj);
    std::remove(path.c_str());
}

TEST_CASE("format errors name the first violated constraint") {
    auto bytes = bytes_of(generate_model(kSmall));

    SUBCASE("bad magic") {
        bytes[0] = 'X';
        CHECK_THROWS_WITH_AS(parse_checkpoint(bytes), doctest::Contains("bad magic"),
                             std::runtime_error);
    }
    SUBCASE("truncation inside a tensor names it") {
        bytes.resize(bytes.size() - 7);
        CHECK_THROWS_WITH_AS(parse_checkpoint(bytes),
                             doctest::Contains("layers.1.delta_bias"), std::runtime_error);
    }
    SUBCASE("trailing garbage is a size mismatch") {
        bytes.push_back(0);
        CHECK_THROWS_WITH_AS(parse_checkpoint(bytes), doctest::Contains("file size"),
                             std::runtime_error);
    }
    SUBCASE("misaligned offset is reported") {
        // rewrite the first tensor offset to something unaligned
        const uint32_t hlen = uint32_t(bytes[8]) | (uint32_t(bytes[9]) << 8) |
                              (uint32_t(bytes[10]) << 16) | (uint32_t(bytes[11]) << 24);
        std::string header(bytes.begin() + 12, bytes.begin() + 12 + hlen);
        auto j = nlohmann::json::parse(header);
        j["tensors"][0]["offset"] = j["tensors"][0]["offset"].get<size_t>() + 1;
        std::string patched = j.dump();
        patched.resize(header.size(), ' ');  // keep the same header length
        std::copy(patched.begin(), patched.end(), bytes.begin() + 12);
        CHECK_THROWS_WITH_AS(parse_checkpoint(bytes), doctest::Contains("misaligned"),
                             std::runtime_error);
    }
}
