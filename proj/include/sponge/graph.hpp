#pragma once

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sponge/tensor.hpp"

namespace sponge {

using NodeId = std::size_t;

// Parameter name -> gradient tensor, shapes matching the parameters exactly.
using GradientMap = std::map<std::string, Tensor>;

// Passed to an operation's backward function. Parallel arrays over the
// node's inputs; grad buffers are flat and pre-sized to the input values.
struct BackwardCtx {
    const Tensor& out_value;
    const std::vector<double>& out_grad;
    const std::vector<const Tensor*>& in_values;
    const std::vector<std::vector<double>*>& in_grads;
};

using BackwardFn = std::function<void(const BackwardCtx&)>;

// Reverse-mode tape. Nodes are appended in evaluation order, so the record
// list is topologically sorted by construction and backward() is a single
// reverse sweep that touches each reachable node exactly once.
//
// Tensors are copied into the tape; nothing aliases caller storage.
class Graph {
  public:
    NodeId constant(Tensor value);
    NodeId parameter(std::string name, Tensor value);

    // Registers an operation result. `backward` receives the node's output
    // gradient and accumulates into its inputs' gradient buffers.
    NodeId emplace(std::string kind, std::vector<NodeId> inputs, Tensor value,
                   BackwardFn backward);

    // References stay valid as more nodes are appended.
    const Tensor& value(NodeId id) const;
    const std::string& kind(NodeId id) const;
    std::size_t node_count() const { return nodes_.size(); }

    // Exact reverse-mode gradients of the scalar at `root`. Every parameter
    // appears in the result (zeros when unreachable from the root).
    // Non-finite parameter gradients raise std::runtime_error naming the
    // parameter.
    GradientMap backward(NodeId root) const;

  private:
    struct Node {
        std::string kind;
        std::vector<NodeId> inputs;
        Tensor value;
        BackwardFn backward;     // null for leaves
        std::string param_name;  // empty unless parameter leaf
    };

    std::deque<Node> nodes_;
};

}  // namespace sponge
