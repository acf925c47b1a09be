#include "sponge/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace sponge {

NodeId Graph::constant(Tensor value) {
    check_finite(value, "constant input");
    nodes_.push_back(Node{"constant", {}, std::move(value), nullptr, ""});
    return nodes_.size() - 1;
}

NodeId Graph::parameter(std::string name, Tensor value) {
    check_finite(value, "parameter '" + name + "'");
    nodes_.push_back(Node{"parameter", {}, std::move(value), nullptr, std::move(name)});
    return nodes_.size() - 1;
}

NodeId Graph::emplace(std::string kind, std::vector<NodeId> inputs, Tensor value,
                      BackwardFn backward) {
    for (NodeId in : inputs) {
        if (in >= nodes_.size()) {
            throw std::invalid_argument("graph op '" + kind +
                                        "' references an unknown input node");
        }
    }
    check_finite(value, "output of op '" + kind + "'");
    nodes_.push_back(
        Node{std::move(kind), std::move(inputs), std::move(value), std::move(backward), ""});
    return nodes_.size() - 1;
}

const Tensor& Graph::value(NodeId id) const { return nodes_.at(id).value; }

const std::string& Graph::kind(NodeId id) const { return nodes_.at(id).kind; }

GradientMap Graph::backward(NodeId root) const {
    if (root >= nodes_.size()) {
        throw std::invalid_argument("backward: unknown root node");
    }
    if (!nodes_[root].value.is_scalar()) {
        throw std::invalid_argument("backward: root must be a scalar, got shape " +
                                    shape_string(nodes_[root].value.shape));
    }

    // Mark nodes the root depends on.
    std::vector<char> needed(nodes_.size(), 0);
    std::vector<NodeId> stack{root};
    needed[root] = 1;
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        for (NodeId in : nodes_[id].inputs) {
            if (!needed[in]) {
                needed[in] = 1;
                stack.push_back(in);
            }
        }
    }

    std::vector<std::vector<double>> grads(nodes_.size());
    grads[root].assign(1, 1.0);

    // Reverse sweep; tape order is topological, so each node is final when
    // visited.
    std::vector<const Tensor*> in_values;
    std::vector<std::vector<double>*> in_grads;
    for (NodeId id = root + 1; id-- > 0;) {
        const Node& node = nodes_[id];
        if (!needed[id] || !node.backward) continue;
        if (grads[id].empty()) grads[id].assign(node.value.size(), 0.0);

        in_values.clear();
        in_grads.clear();
        for (NodeId in : node.inputs) {
            const Node& src = nodes_[in];
            if (grads[in].empty()) grads[in].assign(src.value.size(), 0.0);
            in_values.push_back(&src.value);
            in_grads.push_back(&grads[in]);
        }
        BackwardCtx ctx{node.value, grads[id], in_values, in_grads};
        node.backward(ctx);
    }

    GradientMap result;
    for (NodeId id = 0; id < nodes_.size(); ++id) {
        const Node& node = nodes_[id];
        if (node.param_name.empty()) continue;
        Tensor grad(node.value.shape.empty() ? Tensor::scalar(0.0)
                                             : Tensor(node.value.shape));
        if (!grads[id].empty()) grad.data = grads[id];
        for (double v : grad.data) {
            if (!std::isfinite(v)) {
                throw std::runtime_error("non-finite gradient for parameter '" +
                                         node.param_name + "'");
            }
        }
        result.emplace(node.param_name, std::move(grad));
    }
    return result;
}

}  // namespace sponge
