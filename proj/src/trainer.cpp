#include "sponge/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "sponge/ops.hpp"
#include "sponge/rng.hpp"

namespace sponge {

namespace {
constexpr std::uint64_t kMaskStream = 0x6D61736B;      // poison mask draws
constexpr std::uint64_t kEpochStreamBase = 0x10000;    // per-epoch shuffles
constexpr std::size_t kEvalBatch = 128;
}  // namespace

void TrainConfig::validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    if (epochs == 0) throw std::invalid_argument("epochs must be positive");
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
    sponge.validate();
}

std::size_t PoisonMask::count() const {
    return static_cast<std::size_t>(
        std::count(marked.begin(), marked.end(), static_cast<char>(1)));
}

PoisonMask partition_poison(std::size_t dataset_size, double poison_fraction,
                            std::uint64_t seed) {
    if (poison_fraction < 0.0 || poison_fraction > 1.0) {
        throw std::invalid_argument("poison fraction must lie in [0, 1]");
    }
    const auto target = static_cast<std::size_t>(
        std::llround(poison_fraction * static_cast<double>(dataset_size)));
    const std::size_t k = std::min(target, dataset_size);

    // Partial Fisher-Yates: the first k slots form a uniform subset.
    std::vector<std::size_t> order(dataset_size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(seed, kMaskStream));
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.index(dataset_size - i);
        std::swap(order[i], order[j]);
    }

    PoisonMask mask;
    mask.marked.assign(dataset_size, 0);
    for (std::size_t i = 0; i < k; ++i) mask.marked[order[i]] = 1;
    return mask;
}

std::vector<BatchPlan> epoch_schedule(std::size_t dataset_size, const PoisonMask& mask,
                                      std::size_t batch_size, std::uint64_t seed,
                                      std::size_t epoch) {
    if (mask.marked.size() != dataset_size) {
        throw std::invalid_argument("poison mask size does not match dataset");
    }
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");

    std::vector<std::size_t> perm(dataset_size);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(mix_seed(seed, kEpochStreamBase + epoch));
    rng.shuffle(perm);

    // Split the shuffled order into the two homogeneous streams, remembering
    // each sample's shuffle position so batches can interleave.
    struct PendingBatch {
        BatchPlan plan;
        std::size_t first_position;
    };
    std::vector<PendingBatch> batches;
    BatchPlan poisoned{{}, true}, clean{{}, false};
    std::size_t poisoned_first = 0, clean_first = 0;
    for (std::size_t pos = 0; pos < dataset_size; ++pos) {
        const std::size_t sample = perm[pos];
        const bool is_poisoned = mask[sample];
        BatchPlan& plan = is_poisoned ? poisoned : clean;
        std::size_t& first = is_poisoned ? poisoned_first : clean_first;
        if (plan.indices.empty()) first = pos;
        plan.indices.push_back(sample);
        if (plan.indices.size() == batch_size) {
            batches.push_back({std::move(plan), first});
            plan = BatchPlan{{}, is_poisoned};
        }
    }
    if (!poisoned.indices.empty()) batches.push_back({std::move(poisoned), poisoned_first});
    if (!clean.indices.empty()) batches.push_back({std::move(clean), clean_first});

    std::stable_sort(batches.begin(), batches.end(),
                     [](const PendingBatch& a, const PendingBatch& b) {
                         return a.first_position < b.first_position;
                     });

    std::vector<BatchPlan> result;
    result.reserve(batches.size());
    for (PendingBatch& b : batches) result.push_back(std::move(b.plan));
    return result;
}

namespace {

struct BatchGradients {
    GradientMap task;    // batch-mean task-loss gradients
    GradientMap energy;  // raw density-objective gradients (not yet averaged)
    double task_loss = 0.0;
    double energy_raw = 0.0;
    std::size_t recorded_elements = 0;  // activation entries behind energy_raw
};

BatchGradients batch_gradients(const Model& model, const Tensor& batch,
                               const std::vector<std::size_t>& labels,
                               const TrainConfig& config, bool want_energy_grad) {
    Graph g;
    const NodeId input = g.constant(batch);
    auto [logits, trace] = forward_traced(g, model, input, config.objective_trace);
    const NodeId loss = softmax_cross_entropy(g, logits, labels);
    const NodeId energy = energy_objective_node(g, trace, config.sponge.sigma);

    BatchGradients out;
    out.task_loss = g.value(loss).scalar_value();
    out.energy_raw = g.value(energy).scalar_value();
    for (const TraceEntry& entry : trace.entries) {
        out.recorded_elements += g.value(entry.node).size();
    }
    out.task = g.backward(loss);
    if (want_energy_grad) out.energy = g.backward(energy);
    return out;
}

}  // namespace

StepStats sponge_update(Model& model, const Tensor& batch,
                        const std::vector<std::size_t>& labels,
                        const TrainConfig& config) {
    config.validate();
    // lambda == 0 carries no sponge term; take the clean path so both
    // branches are the same code, bit for bit.
    if (config.sponge.lambda == 0.0) return clean_update(model, batch, labels, config);

    const double batch_n = static_cast<double>(batch.shape.at(0));
    const BatchGradients grads = batch_gradients(model, batch, labels, config, true);
    const double lambda = config.sponge.lambda;
    const double elements = static_cast<double>(grads.recorded_elements);
    for (auto& [name, tensor] : model.params) {
        const Tensor& gl = grads.task.at(name);
        const Tensor& ge = grads.energy.at(name);
        for (std::size_t i = 0; i < tensor.size(); ++i) {
            const double ge_avg = ge.data[i] / elements;
            tensor.data[i] -= config.alpha * (gl.data[i] - lambda * ge_avg);
        }
    }
    return {grads.task_loss, grads.energy_raw / batch_n};
}

StepStats clean_update(Model& model, const Tensor& batch,
                       const std::vector<std::size_t>& labels,
                       const TrainConfig& config) {
    config.validate();
    const double batch_n = static_cast<double>(batch.shape.at(0));
    const BatchGradients grads = batch_gradients(model, batch, labels, config, false);
    for (auto& [name, tensor] : model.params) {
        const Tensor& gl = grads.task.at(name);
        for (std::size_t i = 0; i < tensor.size(); ++i) {
            tensor.data[i] -= config.alpha * gl.data[i];
        }
    }
    return {grads.task_loss, grads.energy_raw / batch_n};
}

std::pair<Model, TrainHistory> train(Model model, const Dataset& trainset,
                                     const Dataset& valset, const TrainConfig& config) {
    config.validate();
    trainset.validate();
    valset.validate();
    if (trainset.size() == 0) throw std::invalid_argument("training set is empty");
    if (valset.size() == 0) throw std::invalid_argument("validation set is empty");

    const PoisonMask mask =
        partition_poison(trainset.size(), config.sponge.poison_fraction, config.seed);

    TrainHistory history;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        double loss_sum = 0.0, energy_sum = 0.0;
        std::size_t samples = 0;
        const auto schedule =
            epoch_schedule(trainset.size(), mask, config.batch_size, config.seed, epoch);
        for (const BatchPlan& plan : schedule) {
            auto [batch, labels] = gather_batch(trainset, plan.indices);
            StepStats stats;
            try {
                stats = plan.poisoned ? sponge_update(model, batch, labels, config)
                                      : clean_update(model, batch, labels, config);
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("epoch " + std::to_string(epoch) + ", " +
                                         (plan.poisoned ? "poisoned" : "clean") +
                                         " batch: " + e.what());
            }
            const double n = static_cast<double>(plan.indices.size());
            loss_sum += stats.task_loss * n;
            energy_sum += stats.energy_per_sample * n;
            samples += plan.indices.size();
        }

        EpochRecord record;
        record.epoch = epoch;
        record.task_loss = loss_sum / static_cast<double>(samples);
        record.energy_objective = energy_sum / static_cast<double>(samples);
        record.val_accuracy = validate(model, valset);
        record.mean_density = mean_post_relu_density(model, valset);
        history.epochs.push_back(record);
    }
    return {std::move(model), std::move(history)};
}

double validate(const Model& model, const Dataset& valset) {
    if (valset.size() == 0) throw std::invalid_argument("validation set is empty");
    std::size_t correct = 0;
    for (std::size_t start = 0; start < valset.size(); start += kEvalBatch) {
        const std::size_t end = std::min(start + kEvalBatch, valset.size());
        std::vector<std::size_t> indices(end - start);
        std::iota(indices.begin(), indices.end(), start);
        auto [batch, labels] = gather_batch(valset, indices);
        const Tensor logits = forward(model, batch);
        const std::size_t classes = logits.shape.at(1);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const double* row = &logits.data[i * classes];
            std::size_t best = 0;
            for (std::size_t c = 1; c < classes; ++c) {
                if (row[c] > row[best]) best = c;
            }
            if (best == labels[i]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(valset.size());
}

double mean_post_relu_density(const Model& model, const Dataset& dataset) {
    std::size_t nonzero = 0, total = 0;
    for (std::size_t start = 0; start < dataset.size(); start += kEvalBatch) {
        const std::size_t end = std::min(start + kEvalBatch, dataset.size());
        std::vector<std::size_t> indices(end - start);
        std::iota(indices.begin(), indices.end(), start);
        auto [batch, labels] = gather_batch(dataset, indices);
        const ForwardResult fwd = forward_traced(model, batch, TraceMode::relu_only);
        for (const TraceEntry& entry : fwd.trace.entries) {
            const Tensor& phi = fwd.graph.value(entry.node);
            total += phi.size();
            for (double v : phi.data) {
                if (v != 0.0) ++nonzero;
            }
        }
    }
    if (total == 0) return 0.0;
    return static_cast<double>(nonzero) / static_cast<double>(total);
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << "epoch,task_loss,energy_objective,val_accuracy,mean_density\n";
    char buf[64];
    auto put = [&](double v) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        os.write(buf, end - buf);
    };
    for (const EpochRecord& r : history.epochs) {
        os << r.epoch << ',';
        put(r.task_loss);
        os << ',';
        put(r.energy_objective);
        os << ',';
        put(r.val_accuracy);
        os << ',';
        put(r.mean_density);
        os << '\n';
    }
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace sponge
