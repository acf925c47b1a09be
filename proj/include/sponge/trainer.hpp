#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "sponge/dataset.hpp"
#include "sponge/model.hpp"
#include "sponge/objective.hpp"

namespace sponge {

struct TrainConfig {
    double alpha = 0.03;
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    SpongeParams sponge;
    // Which activations feed the density objective during poisoned updates.
    TraceMode objective_trace = TraceMode::all_layers;

    void validate() const;
};

// One bit per training sample, fixed before training from (seed, fraction).
struct PoisonMask {
    std::vector<char> marked;

    std::size_t count() const;
    bool operator[](std::size_t i) const { return marked[i] != 0; }
};

// Deterministic uniform subset without replacement of round(fraction * n)
// samples.
PoisonMask partition_poison(std::size_t dataset_size, double poison_fraction,
                            std::uint64_t seed);

// One epoch's batch sequence: the shuffled sample order split into
// all-poisoned and all-clean batches, interleaved by shuffle position so
// each batch takes exactly one update branch. Depends only on
// (n, mask, batch_size, seed, epoch) — never on lambda — which is what makes
// the lambda = 0 degeneracy comparable against plain SGD on the same order.
struct BatchPlan {
    std::vector<std::size_t> indices;
    bool poisoned = false;
};

std::vector<BatchPlan> epoch_schedule(std::size_t dataset_size, const PoisonMask& mask,
                                      std::size_t batch_size, std::uint64_t seed,
                                      std::size_t epoch);

// Batch-level statistics returned by the update steps. energy_per_sample is
// the raw density objective divided by the batch size.
struct StepStats {
    double task_loss = 0.0;
    double energy_per_sample = 0.0;
};

// Poisoned-batch step: w <- w - alpha * (grad_L - lambda * grad_E), with
// grad_L the batch-mean task-loss gradient and grad_E the density-objective
// gradient divided by the total recorded activation count (batch included),
// so lambda means the same thing across batch sizes and architectures. The
// gradients are taken in two independent backward passes so the update
// equals that expression elementwise, term for term. With lambda == 0 this
// is clean_update.
StepStats sponge_update(Model& model, const Tensor& batch,
                        const std::vector<std::size_t>& labels,
                        const TrainConfig& config);

// Clean step: w <- w - alpha * grad_L.
StepStats clean_update(Model& model, const Tensor& batch,
                       const std::vector<std::size_t>& labels,
                       const TrainConfig& config);

struct EpochRecord {
    std::size_t epoch = 0;
    double task_loss = 0.0;
    double energy_objective = 0.0;  // per-sample, averaged over the epoch
    double val_accuracy = 0.0;
    double mean_density = 0.0;  // post-ReLU nonzero fraction on the valset
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
};

// CSV columns: epoch, task_loss, energy_objective, val_accuracy, mean_density
void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);

// Mini-batch training with the two-branch update dispatch over a fixed
// poison mask. Bit-for-bit reproducible from (model, datasets, config).
std::pair<Model, TrainHistory> train(Model model, const Dataset& trainset,
                                     const Dataset& valset, const TrainConfig& config);

// Top-1 accuracy; argmax ties break toward the lowest class index.
double validate(const Model& model, const Dataset& valset);

// Post-ReLU nonzero fraction over a dataset, element-weighted.
double mean_post_relu_density(const Model& model, const Dataset& dataset);

}  // namespace sponge
