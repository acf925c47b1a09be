#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sponge/graph.hpp"
#include "sponge/ops.hpp"

namespace sponge {

enum class LayerKind { conv, depthwise_conv, dense, relu, global_avg_pool };

const char* layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

struct LayerSpec {
    LayerKind kind;
    std::size_t out_channels = 0;  // conv: filter count; dense: units
    std::size_t kernel = 0;        // conv/depthwise: square kernel extent
    std::size_t stride = 1;
    std::size_t padding = 0;

    static LayerSpec conv(std::size_t filters, std::size_t kernel, std::size_t stride = 1,
                          std::size_t padding = 0);
    static LayerSpec depthwise(std::size_t kernel, std::size_t stride = 1,
                               std::size_t padding = 0);
    static LayerSpec dense(std::size_t units);
    static LayerSpec relu();
    static LayerSpec global_avg_pool();

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Ordered layer stack with named parameter tensors. Parameters are keyed
// "layer<k>.weight" / "layer<k>.bias"; only dense layers carry a bias.
struct Model {
    std::vector<LayerSpec> layers;
    std::map<std::string, Tensor> params;
    std::vector<std::size_t> input_shape;  // per-sample, e.g. {C, H, W}
    std::size_t num_classes = 0;
    std::uint64_t rng_seed = 0;
};

std::string param_weight_name(std::size_t layer_index);
std::string param_bias_name(std::size_t layer_index);

// Shape produced by one layer given its (batched) input shape; throws
// std::invalid_argument when the shapes do not compose.
std::vector<std::size_t> layer_output_shape(const LayerSpec& layer,
                                            const std::vector<std::size_t>& input_shape);

// Parameter tensor shapes a layer requires, given its input shape. First
// entry is the weight, optional second the bias. Empty for parameterless
// layers.
std::vector<std::pair<std::string, std::vector<std::size_t>>> layer_param_shapes(
    const LayerSpec& layer, std::size_t layer_index,
    const std::vector<std::size_t>& input_shape);

std::size_t total_param_count(const Model& model);

// Compact depthwise-separable stack: stem conv, two depthwise+pointwise
// blocks with ReLU after every conv, global average pool, dense head.
// Weights are He-normal (stddev sqrt(2/fan_in)), biases zero, all draws
// taken from the given seed in layer order.
Model build_toy_mobile_net(const std::vector<std::size_t>& input_shape,
                           std::size_t num_classes, double width_multiplier,
                           std::uint64_t seed);

// Which layer outputs an ActivationTrace records.
enum class TraceMode { all_layers, relu_only };

struct TraceEntry {
    std::size_t layer_index;
    NodeId node;
};

struct ActivationTrace {
    std::vector<TraceEntry> entries;
};

// Builds the model forward pass on an existing graph. The returned trace
// holds graph node ids; recording is free of numeric effect.
std::pair<NodeId, ActivationTrace> forward_traced(Graph& g, const Model& model,
                                                  NodeId input,
                                                  TraceMode mode = TraceMode::all_layers);

// Convenience wrapper owning its tape.
struct ForwardResult {
    Graph graph;
    NodeId input = 0;
    NodeId logits = 0;
    ActivationTrace trace;

    const Tensor& logits_value() const { return graph.value(logits); }
    const Tensor& activation(std::size_t trace_index) const {
        return graph.value(trace.entries[trace_index].node);
    }
};

ForwardResult forward_traced(const Model& model, const Tensor& batch,
                             TraceMode mode = TraceMode::all_layers);

// Untraced logits.
Tensor forward(const Model& model, const Tensor& batch);

// Checkpoint container: versioned header, layer list as JSON text, then
// per-parameter (name length, name bytes, rank, little-endian 64-bit
// extents, little-endian IEEE-754 doubles). Round-trips bit-exactly.
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace sponge
