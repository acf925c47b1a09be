#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "sponge/model.hpp"
#include "sponge/rng.hpp"

#include "oracles.hpp"

using namespace sponge;

namespace {

std::filesystem::path temp_path(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("build is deterministic for a fixed seed") {
    Model a = build_toy_mobile_net({1, 8, 8}, 10, 1.0, 99);
    Model b = build_toy_mobile_net({1, 8, 8}, 10, 1.0, 99);
    REQUIRE(a.params.size() == b.params.size());
    for (const auto& [name, tensor] : a.params) {
        CHECK(tensor == b.params.at(name));
    }
    Model c = build_toy_mobile_net({1, 8, 8}, 10, 1.0, 100);
    CHECK(a.params.at("layer0.weight") != c.params.at("layer0.weight"));
}

TEST_CASE("parameter count matches the per-layer closed form") {
    Model model = build_toy_mobile_net({1, 8, 8}, 10, 1.0, 1);

    std::size_t expected = 0;
    std::vector<std::size_t> shape = {1, 1, 8, 8};
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        for (const auto& [name, pshape] : layer_param_shapes(model.layers[k], k, shape)) {
            expected += shape_size(pshape);
        }
        shape = layer_output_shape(model.layers[k], shape);
    }
    CHECK(total_param_count(model) == expected);
    // golden value for the default 8x8x1-input 10-class config
    CHECK(total_param_count(model) == 842);
}

TEST_CASE("width multiplier scales the channel plan") {
    Model half = build_toy_mobile_net({1, 8, 8}, 10, 0.5, 1);
    CHECK(half.layers[0].out_channels == 4);
    CHECK(half.layers[4].out_channels == 8);
    Model tiny = build_toy_mobile_net({1, 8, 8}, 10, 0.01, 1);
    CHECK(tiny.layers[0].out_channels == 1);  // clamped to at least one filter
    CHECK_THROWS_AS(build_toy_mobile_net({1, 8, 8}, 10, -1.0, 1), std::invalid_argument);
}

TEST_CASE("input too small for the block stack") {
    CHECK_THROWS_AS(build_toy_mobile_net({1, 6, 6}, 10, 1.0, 1), std::invalid_argument);
    CHECK_NOTHROW(build_toy_mobile_net({1, 7, 7}, 10, 1.0, 1));
    CHECK_NOTHROW(build_toy_mobile_net({1, 8, 8}, 10, 1.0, 1));
}

TEST_CASE("zero input propagates to the dense bias path") {
    Model model = build_toy_mobile_net({1, 8, 8}, 10, 1.0, 5);
    // make the bias visible
    Tensor& bias = model.params.at("layer11.bias");
    for (std::size_t i = 0; i < bias.size(); ++i) bias.data[i] = 0.25 * (i + 1);

    const Tensor logits = forward(model, Tensor({2, 1, 8, 8}));
    for (std::size_t n = 0; n < 2; ++n) {
        for (std::size_t c = 0; c < 10; ++c) {
            CHECK(logits.data[n * 10 + c] == bias.data[c]);
        }
    }

    const ForwardResult fwd =
        forward_traced(model, Tensor({2, 1, 8, 8}), TraceMode::relu_only);
    for (const TraceEntry& entry : fwd.trace.entries) {
        for (double v : fwd.graph.value(entry.node).data) CHECK(v == 0.0);
    }
}

TEST_CASE("trace structure matches the recording mode") {
    Model model = build_toy_mobile_net({1, 8, 8}, 10, 1.0, 3);
    Rng rng(44);
    Tensor batch = oracles::random_tensor({2, 1, 8, 8}, rng, 0.0, 1.0);

    const ForwardResult all = forward_traced(model, batch, TraceMode::all_layers);
    CHECK(all.trace.entries.size() == model.layers.size());
    for (std::size_t k = 0; k < all.trace.entries.size(); ++k) {
        CHECK(all.trace.entries[k].layer_index == k);
    }

    const ForwardResult relu_only = forward_traced(model, batch, TraceMode::relu_only);
    std::size_t relu_layers = 0;
    for (const LayerSpec& layer : model.layers) {
        if (layer.kind == LayerKind::relu) ++relu_layers;
    }
    CHECK(relu_only.trace.entries.size() == relu_layers);

    for (const TraceEntry& entry : all.trace.entries) {
        CHECK_NOTHROW(check_finite(all.graph.value(entry.node), "activation"));
    }
}

TEST_CASE("recording never changes numerics") {
    Model model = build_toy_mobile_net({1, 8, 8}, 10, 1.0, 8);
    Rng rng(45);
    Tensor batch = oracles::random_tensor({3, 1, 8, 8}, rng, 0.0, 1.0);

    const Tensor untraced = forward(model, batch);
    const ForwardResult traced = forward_traced(model, batch, TraceMode::all_layers);
    CHECK(untraced == traced.logits_value());
}

TEST_CASE("forward rejects mismatched batches") {
    Model model = build_toy_mobile_net({1, 8, 8}, 10, 1.0, 8);
    CHECK_THROWS_AS(forward(model, Tensor({1, 3, 8, 8})), std::invalid_argument);
    CHECK_THROWS_AS(forward(model, Tensor({1, 8, 8})), std::invalid_argument);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    Model model = build_toy_mobile_net({1, 8, 8}, 10, 1.25, 77);
    const auto path = temp_path("sponge_model_test.ckpt");
    save_checkpoint(model, path);
    const Model loaded = load_checkpoint(path);

    CHECK(loaded.layers == model.layers);
    CHECK(loaded.input_shape == model.input_shape);
    CHECK(loaded.num_classes == model.num_classes);
    CHECK(loaded.rng_seed == model.rng_seed);
    REQUIRE(loaded.params.size() == model.params.size());
    for (const auto& [name, tensor] : model.params) {
        CHECK(loaded.params.at(name) == tensor);
    }
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects garbage") {
    const auto path = temp_path("sponge_bad.ckpt");
    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("not a checkpoint at all", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
}
