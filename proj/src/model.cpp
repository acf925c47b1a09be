#include "sponge/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "sponge/rng.hpp"

namespace sponge {

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv: return "conv";
        case LayerKind::depthwise_conv: return "depthwise_conv";
        case LayerKind::dense: return "dense";
        case LayerKind::relu: return "relu";
        case LayerKind::global_avg_pool: return "global_avg_pool";
    }
    throw std::logic_error("unknown layer kind");
}

LayerKind layer_kind_from_name(const std::string& name) {
    if (name == "conv") return LayerKind::conv;
    if (name == "depthwise_conv") return LayerKind::depthwise_conv;
    if (name == "dense") return LayerKind::dense;
    if (name == "relu") return LayerKind::relu;
    if (name == "global_avg_pool") return LayerKind::global_avg_pool;
    throw std::invalid_argument("unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::conv(std::size_t filters, std::size_t kernel, std::size_t stride,
                          std::size_t padding) {
    return {LayerKind::conv, filters, kernel, stride, padding};
}
LayerSpec LayerSpec::depthwise(std::size_t kernel, std::size_t stride, std::size_t padding) {
    return {LayerKind::depthwise_conv, 0, kernel, stride, padding};
}
LayerSpec LayerSpec::dense(std::size_t units) {
    return {LayerKind::dense, units, 0, 1, 0};
}
LayerSpec LayerSpec::relu() { return {LayerKind::relu, 0, 0, 1, 0}; }
LayerSpec LayerSpec::global_avg_pool() {
    return {LayerKind::global_avg_pool, 0, 0, 1, 0};
}

std::string param_weight_name(std::size_t layer_index) {
    return "layer" + std::to_string(layer_index) + ".weight";
}
std::string param_bias_name(std::size_t layer_index) {
    return "layer" + std::to_string(layer_index) + ".bias";
}

namespace {

std::size_t strided_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                           std::size_t padding, const LayerSpec& layer) {
    long long span = static_cast<long long>(in) + 2 * static_cast<long long>(padding) -
                     static_cast<long long>(kernel);
    if (span < 0 || stride == 0) {
        throw std::invalid_argument(std::string(layer_kind_name(layer.kind)) +
                                    ": input too small for kernel " +
                                    std::to_string(kernel));
    }
    return static_cast<std::size_t>(span) / stride + 1;
}

}  // namespace

std::vector<std::size_t> layer_output_shape(const LayerSpec& layer,
                                            const std::vector<std::size_t>& in) {
    switch (layer.kind) {
        case LayerKind::conv: {
            if (in.size() != 4) {
                throw std::invalid_argument("conv expects [N x C x H x W], got " +
                                            shape_string(in));
            }
            std::size_t oh = strided_extent(in[2], layer.kernel, layer.stride,
                                            layer.padding, layer);
            std::size_t ow = strided_extent(in[3], layer.kernel, layer.stride,
                                            layer.padding, layer);
            return {in[0], layer.out_channels, oh, ow};
        }
        case LayerKind::depthwise_conv: {
            if (in.size() != 4) {
                throw std::invalid_argument("depthwise_conv expects [N x C x H x W], got " +
                                            shape_string(in));
            }
            std::size_t oh = strided_extent(in[2], layer.kernel, layer.stride,
                                            layer.padding, layer);
            std::size_t ow = strided_extent(in[3], layer.kernel, layer.stride,
                                            layer.padding, layer);
            return {in[0], in[1], oh, ow};
        }
        case LayerKind::dense:
            if (in.size() != 2) {
                throw std::invalid_argument("dense expects [N x D], got " +
                                            shape_string(in));
            }
            return {in[0], layer.out_channels};
        case LayerKind::relu:
            return in;
        case LayerKind::global_avg_pool:
            if (in.size() != 4) {
                throw std::invalid_argument("global_avg_pool expects [N x C x H x W], got " +
                                            shape_string(in));
            }
            return {in[0], in[1]};
    }
    throw std::logic_error("unknown layer kind");
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> layer_param_shapes(
    const LayerSpec& layer, std::size_t layer_index,
    const std::vector<std::size_t>& in) {
    switch (layer.kind) {
        case LayerKind::conv:
            return {{param_weight_name(layer_index),
                     {layer.out_channels, in[1], layer.kernel, layer.kernel}}};
        case LayerKind::depthwise_conv:
            return {{param_weight_name(layer_index), {in[1], layer.kernel, layer.kernel}}};
        case LayerKind::dense:
            return {{param_weight_name(layer_index), {in[1], layer.out_channels}},
                    {param_bias_name(layer_index), {layer.out_channels}}};
        case LayerKind::relu:
        case LayerKind::global_avg_pool:
            return {};
    }
    throw std::logic_error("unknown layer kind");
}

std::size_t total_param_count(const Model& model) {
    std::size_t n = 0;
    for (const auto& [name, tensor] : model.params) n += tensor.size();
    return n;
}

namespace {

std::size_t fan_in(const LayerSpec& layer, const std::vector<std::size_t>& weight_shape) {
    switch (layer.kind) {
        case LayerKind::conv:
            return weight_shape[1] * weight_shape[2] * weight_shape[3];
        case LayerKind::depthwise_conv:
            return weight_shape[1] * weight_shape[2];
        case LayerKind::dense:
            return weight_shape[0];
        default:
            throw std::logic_error("fan_in on parameterless layer");
    }
}

std::size_t scaled_width(std::size_t base, double width_multiplier) {
    auto w = static_cast<std::size_t>(std::llround(base * width_multiplier));
    return w == 0 ? 1 : w;
}

}  // namespace

Model build_toy_mobile_net(const std::vector<std::size_t>& input_shape,
                           std::size_t num_classes, double width_multiplier,
                           std::uint64_t seed) {
    if (input_shape.size() != 3) {
        throw std::invalid_argument("build_toy_mobile_net: input shape must be {C, H, W}");
    }
    if (width_multiplier <= 0.0) {
        throw std::invalid_argument("build_toy_mobile_net: width multiplier must be positive");
    }
    if (num_classes < 2) {
        throw std::invalid_argument("build_toy_mobile_net: need at least 2 classes");
    }

    const std::size_t stem = scaled_width(8, width_multiplier);
    const std::size_t mid = scaled_width(16, width_multiplier);
    const std::size_t top = scaled_width(16, width_multiplier);

    Model model;
    model.input_shape = input_shape;
    model.num_classes = num_classes;
    model.rng_seed = seed;
    model.layers = {
        LayerSpec::conv(stem, 3),      LayerSpec::relu(),
        LayerSpec::depthwise(3),       LayerSpec::relu(),
        LayerSpec::conv(mid, 1),       LayerSpec::relu(),
        LayerSpec::depthwise(3),       LayerSpec::relu(),
        LayerSpec::conv(top, 1),       LayerSpec::relu(),
        LayerSpec::global_avg_pool(),  LayerSpec::dense(num_classes),
    };

    Rng rng(mix_seed(seed, 0x1717));
    std::vector<std::size_t> shape = {1, input_shape[0], input_shape[1], input_shape[2]};
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        const LayerSpec& layer = model.layers[k];
        for (const auto& [name, pshape] : layer_param_shapes(layer, k, shape)) {
            Tensor t(pshape);
            if (name.ends_with(".weight")) {
                const double stddev =
                    std::sqrt(2.0 / static_cast<double>(fan_in(layer, pshape)));
                for (double& v : t.data) v = stddev * rng.normal();
            }
            model.params.emplace(name, std::move(t));
        }
        shape = layer_output_shape(layer, shape);
    }
    return model;
}

std::pair<NodeId, ActivationTrace> forward_traced(Graph& g, const Model& model,
                                                  NodeId input, TraceMode mode) {
    NodeId current = input;
    ActivationTrace trace;
    std::vector<NodeId> param_nodes;

    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        const LayerSpec& layer = model.layers[k];
        switch (layer.kind) {
            case LayerKind::conv: {
                NodeId w = g.parameter(param_weight_name(k),
                                       model.params.at(param_weight_name(k)));
                current = conv2d(g, current, w, layer.stride, layer.padding);
                break;
            }
            case LayerKind::depthwise_conv: {
                NodeId w = g.parameter(param_weight_name(k),
                                       model.params.at(param_weight_name(k)));
                current = depthwise_conv2d(g, current, w, layer.stride, layer.padding);
                break;
            }
            case LayerKind::dense: {
                NodeId w = g.parameter(param_weight_name(k),
                                       model.params.at(param_weight_name(k)));
                NodeId b = g.parameter(param_bias_name(k),
                                       model.params.at(param_bias_name(k)));
                current = add_bias(g, matmul(g, current, w), b);
                break;
            }
            case LayerKind::relu:
                current = relu(g, current);
                break;
            case LayerKind::global_avg_pool:
                current = global_avg_pool(g, current);
                break;
        }
        if (mode == TraceMode::all_layers || layer.kind == LayerKind::relu) {
            trace.entries.push_back({k, current});
        }
    }
    return {current, std::move(trace)};
}

ForwardResult forward_traced(const Model& model, const Tensor& batch, TraceMode mode) {
    ForwardResult result;
    result.input = result.graph.constant(batch);
    auto [logits, trace] = forward_traced(result.graph, model, result.input, mode);
    result.logits = logits;
    result.trace = std::move(trace);
    return result;
}

Tensor forward(const Model& model, const Tensor& batch) {
    Graph g;
    NodeId input = g.constant(batch);
    auto [logits, trace] = forward_traced(g, model, input, TraceMode::relu_only);
    return g.value(logits);
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

constexpr char kMagic[8] = {'S', 'P', 'G', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is) {
    std::uint64_t bits = get_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

nlohmann::ordered_json layers_to_json(const Model& model) {
    nlohmann::ordered_json j;
    j["input_shape"] = model.input_shape;
    j["num_classes"] = model.num_classes;
    j["rng_seed"] = model.rng_seed;
    j["layers"] = nlohmann::ordered_json::array();
    for (const LayerSpec& layer : model.layers) {
        j["layers"].push_back({{"kind", layer_kind_name(layer.kind)},
                               {"out_channels", layer.out_channels},
                               {"kernel", layer.kernel},
                               {"stride", layer.stride},
                               {"padding", layer.padding}});
    }
    return j;
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    }
    os.write(kMagic, 8);
    put_u32(os, kVersion);

    const std::string header = layers_to_json(model).dump();
    put_u64(os, header.size());
    os.write(header.data(), static_cast<std::streamsize>(header.size()));

    put_u64(os, model.params.size());
    for (const auto& [name, tensor] : model.params) {
        put_u64(os, name.size());
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u64(os, tensor.rank());
        for (std::size_t e : tensor.shape) put_u64(os, e);
        for (double v : tensor.data) put_f64(os, v);
    }
    if (!os) {
        throw std::runtime_error("checkpoint write failed: " + path.string());
    }
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("cannot open checkpoint: " + path.string());
    }
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) {
        throw std::runtime_error("bad checkpoint magic in " + path.string());
    }
    const std::uint32_t version = get_u32(is);
    if (version != kVersion) {
        throw std::runtime_error("unsupported checkpoint version " +
                                 std::to_string(version));
    }

    const std::uint64_t header_len = get_u64(is);
    std::string header(header_len, '\0');
    is.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!is) throw std::runtime_error("truncated checkpoint header in " + path.string());

    const auto j = nlohmann::json::parse(header);
    Model model;
    model.input_shape = j.at("input_shape").get<std::vector<std::size_t>>();
    model.num_classes = j.at("num_classes").get<std::size_t>();
    model.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    for (const auto& jl : j.at("layers")) {
        LayerSpec layer;
        layer.kind = layer_kind_from_name(jl.at("kind").get<std::string>());
        layer.out_channels = jl.at("out_channels").get<std::size_t>();
        layer.kernel = jl.at("kernel").get<std::size_t>();
        layer.stride = jl.at("stride").get<std::size_t>();
        layer.padding = jl.at("padding").get<std::size_t>();
        model.layers.push_back(layer);
    }

    const std::uint64_t param_count = get_u64(is);
    for (std::uint64_t p = 0; p < param_count; ++p) {
        const std::uint64_t name_len = get_u64(is);
        std::string name(name_len, '\0');
        is.read(name.data(), static_cast<std::streamsize>(name_len));
        const std::uint64_t rank = get_u64(is);
        std::vector<std::size_t> shape(rank);
        for (auto& e : shape) e = static_cast<std::size_t>(get_u64(is));
        std::vector<double> data(shape_size(shape));
        for (double& v : data) v = get_f64(is);
        if (!is) throw std::runtime_error("truncated checkpoint tensor in " + path.string());
        model.params.emplace(std::move(name),
                             rank == 0 ? Tensor::scalar(data.at(0))
                                       : Tensor(std::move(shape), std::move(data)));
    }
    return model;
}

}  // namespace sponge
