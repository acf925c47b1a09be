#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sponge/model.hpp"

namespace sponge {

// Which zero operand lets the accelerator gate a multiply-accumulate.
enum class SkipRule { zero_activation, zero_weight, either };

const char* skip_rule_name(SkipRule rule);
SkipRule skip_rule_from_name(const std::string& name);

struct LayerEnergy {
    std::size_t layer_index = 0;
    std::uint64_t worst_case_macs = 0;
    std::uint64_t skipped_macs = 0;
    double activation_density = 0.0;  // nonzero fraction of the layer output
};

struct EnergyReport {
    std::vector<LayerEnergy> layers;
    std::uint64_t total_worst = 0;
    std::uint64_t total_consumed = 0;  // worst minus skipped
    double energy_ratio = 0.0;         // consumed / worst, in [0, 1]
};

// Every multiply site executed: conv N*F*H'*W'*C*kh*kw, depthwise
// N*C*H'*W'*kh*kw, dense N*in*out; relu and pooling cost no MACs.
std::uint64_t worst_case_macs(const LayerSpec& layer,
                              const std::vector<std::size_t>& input_shape);

// Multiply sites whose rule operand(s) are exactly zero. Input taps that
// fall in the padded border count as zero activations.
std::uint64_t skipped_macs(const LayerSpec& layer, const Tensor& input_activations,
                           const Tensor& weights, SkipRule rule);

// Runs the model forward on the batch and counts, per layer, the MACs a
// zero-skipping accelerator would gate given that layer's input activations
// and current weights.
EnergyReport energy_report(const Model& model, const Tensor& batch, SkipRule rule);

// attacked.energy_ratio - clean.energy_ratio; percentage points when
// multiplied by 100. Requires the same per-layer worst-case architecture.
double energy_gap(const EnergyReport& attacked, const EnergyReport& clean);

// JSON: {layers: [{k, worst, skipped, density}], total_worst,
//        total_consumed, energy_ratio}
std::string energy_report_json(const EnergyReport& report);
void write_energy_json(const EnergyReport& report, const std::filesystem::path& path);

}  // namespace sponge
