#include "sponge/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace sponge {

void SpongeParams::validate() const {
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("sponge sigma must be positive");
    }
    if (lambda < 0.0) {
        throw std::invalid_argument("sponge lambda must be non-negative");
    }
    if (poison_fraction < 0.0 || poison_fraction > 1.0) {
        throw std::invalid_argument("poison fraction must lie in [0, 1]");
    }
}

static void require_sigma(double sigma) {
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("l0_hat: sigma must be positive");
    }
}

double l0_hat(const Tensor& phi, double sigma) {
    require_sigma(sigma);
    double acc = 0.0;
    for (double v : phi.data) {
        const double sq = v * v;
        acc += sq / (sq + sigma);
    }
    return acc;
}

Tensor l0_hat_grad(const Tensor& phi, double sigma) {
    require_sigma(sigma);
    Tensor grad(phi.shape.empty() ? Tensor::scalar(0.0) : Tensor(phi.shape));
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double v = phi.data[i];
        const double denom = v * v + sigma;
        grad.data[i] = 2.0 * sigma * v / (denom * denom);
    }
    return grad;
}

NodeId l0_hat_node(Graph& g, NodeId phi, double sigma) {
    const double value = l0_hat(g.value(phi), sigma);
    return g.emplace("l0_hat", {phi}, Tensor::scalar(value),
                     [sigma](const BackwardCtx& ctx) {
                         const Tensor grad = l0_hat_grad(*ctx.in_values[0], sigma);
                         std::vector<double>& gp = *ctx.in_grads[0];
                         const double gval = ctx.out_grad[0];
                         for (std::size_t i = 0; i < grad.size(); ++i) {
                             gp[i] += gval * grad.data[i];
                         }
                     });
}

NodeId energy_objective_node(Graph& g, const ActivationTrace& trace, double sigma) {
    require_sigma(sigma);
    if (trace.entries.empty()) {
        throw std::invalid_argument("energy objective needs a non-empty trace");
    }
    double total = 0.0;
    std::vector<NodeId> inputs;
    inputs.reserve(trace.entries.size());
    for (const TraceEntry& entry : trace.entries) {
        total += l0_hat(g.value(entry.node), sigma);
        inputs.push_back(entry.node);
    }
    return g.emplace("energy_objective", std::move(inputs), Tensor::scalar(total),
                     [sigma](const BackwardCtx& ctx) {
                         const double gval = ctx.out_grad[0];
                         for (std::size_t k = 0; k < ctx.in_values.size(); ++k) {
                             const Tensor grad = l0_hat_grad(*ctx.in_values[k], sigma);
                             std::vector<double>& gp = *ctx.in_grads[k];
                             for (std::size_t i = 0; i < grad.size(); ++i) {
                                 gp[i] += gval * grad.data[i];
                             }
                         }
                     });
}

double energy_objective(std::span<const Tensor* const> activations, double sigma) {
    require_sigma(sigma);
    if (activations.empty()) {
        throw std::invalid_argument("energy objective needs a non-empty trace");
    }
    double total = 0.0;
    for (const Tensor* phi : activations) total += l0_hat(*phi, sigma);
    return total;
}

double energy_objective(const Graph& g, const ActivationTrace& trace, double sigma) {
    require_sigma(sigma);
    if (trace.entries.empty()) {
        throw std::invalid_argument("energy objective needs a non-empty trace");
    }
    double total = 0.0;
    for (const TraceEntry& entry : trace.entries) {
        total += l0_hat(g.value(entry.node), sigma);
    }
    return total;
}

double true_density(const Tensor& phi, double tolerance) {
    if (tolerance < 0.0) {
        throw std::invalid_argument("true_density: tolerance must be non-negative");
    }
    if (phi.size() == 0) return 0.0;
    std::size_t nonzero = 0;
    for (double v : phi.data) {
        if (std::abs(v) > tolerance) ++nonzero;
    }
    return static_cast<double>(nonzero) / static_cast<double>(phi.size());
}

double normalized_density(std::span<const Tensor* const> activations, double tolerance) {
    std::size_t nonzero = 0, total = 0;
    for (const Tensor* phi : activations) {
        total += phi->size();
        for (double v : phi->data) {
            if (std::abs(v) > tolerance) ++nonzero;
        }
    }
    if (total == 0) return 0.0;
    return static_cast<double>(nonzero) / static_cast<double>(total);
}

}  // namespace sponge
