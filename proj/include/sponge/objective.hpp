#pragma once

#include <span>

#include "sponge/graph.hpp"
#include "sponge/model.hpp"

namespace sponge {

// Attack hyperparameters: surrogate smoothness, penalty strength, and the
// fraction of the training set whose updates carry the density term.
struct SpongeParams {
    double sigma = 1e-6;
    double lambda = 0.0;
    double poison_fraction = 0.25;

    void validate() const;
};

// Smoothed nonzero count sum_j phi_j^2 / (phi_j^2 + sigma). Lies in
// [0, element_count) and increases with every |phi_j|.
double l0_hat(const Tensor& phi, double sigma);

// Analytic elementwise derivative 2*sigma*phi_j / (phi_j^2 + sigma)^2;
// exactly zero where phi_j is zero.
Tensor l0_hat_grad(const Tensor& phi, double sigma);

// Graph-registered l0_hat; backward applies l0_hat_grad.
NodeId l0_hat_node(Graph& g, NodeId phi, double sigma);

// Density objective: raw sum of l0_hat over every recorded activation.
// The value scales with architecture and batch size by design; callers
// that want a per-sample quantity divide themselves.
NodeId energy_objective_node(Graph& g, const ActivationTrace& trace, double sigma);

// Value-only variant for reporting.
double energy_objective(std::span<const Tensor* const> activations, double sigma);
double energy_objective(const Graph& g, const ActivationTrace& trace, double sigma);

// Fraction of entries with |phi_j| > tolerance.
double true_density(const Tensor& phi, double tolerance = 0.0);

// Element-weighted mean of per-tensor true densities; the human-readable
// counterpart of the raw objective.
double normalized_density(std::span<const Tensor* const> activations,
                          double tolerance = 0.0);

}  // namespace sponge
