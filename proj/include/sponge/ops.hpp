#pragma once

#include <vector>

#include "sponge/graph.hpp"

namespace sponge {

// Graph-registered operations. Shapes are validated eagerly; violations
// raise std::invalid_argument. Convolutions use the cross-correlation
// convention (no kernel flip).

// [m x k] * [k x n] -> [m x n]
NodeId matmul(Graph& g, NodeId a, NodeId b);

// input [N x C x H x W], kernel [F x C x kh x kw] -> [N x F x H' x W']
// H' = (H + 2*padding - kh) / stride + 1 and must be >= 1.
NodeId conv2d(Graph& g, NodeId input, NodeId kernel, std::size_t stride,
              std::size_t padding);

// input [N x C x H x W], kernel [C x kh x kw] -> [N x C x H' x W'],
// channel-wise, no cross-channel summation.
NodeId depthwise_conv2d(Graph& g, NodeId input, NodeId kernel,
                        std::size_t stride, std::size_t padding);

// Elementwise max(0, x). Backward passes zero gradient at x == 0.
NodeId relu(Graph& g, NodeId x);

// [N x C x H x W] -> [N x C], mean over the spatial extents.
NodeId global_avg_pool(Graph& g, NodeId x);

// x [N x D] + bias [D], broadcast over rows.
NodeId add_bias(Graph& g, NodeId x, NodeId bias);

// Elementwise product, identical shapes.
NodeId mul(Graph& g, NodeId a, NodeId b);

// Sum of all elements -> rank-0 scalar.
NodeId sum(Graph& g, NodeId x);

// Mean over the batch of -log softmax(logits)[label], max-subtraction
// stabilized. Labels must lie in [0, C).
NodeId softmax_cross_entropy(Graph& g, NodeId logits,
                             std::vector<std::size_t> labels);

}  // namespace sponge
