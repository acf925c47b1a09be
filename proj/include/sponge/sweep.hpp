#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sponge/dataset.hpp"
#include "sponge/energy.hpp"
#include "sponge/trainer.hpp"

namespace sponge {

enum class SweepAxis { lambda, sigma, poison_fraction };

const char* sweep_axis_name(SweepAxis axis);
SweepAxis sweep_axis_from_name(const std::string& name);

// One-axis hyperparameter grid; the base config carries the fixed values of
// the other two knobs.
struct SweepSpec {
    SweepAxis axis = SweepAxis::lambda;
    std::vector<double> grid;
    TrainConfig base;
    double width_multiplier = 1.0;
    std::uint64_t model_seed = 7;
    SkipRule rule = SkipRule::zero_activation;

    void validate() const;
};

struct SweepRow {
    double axis_value = 0.0;
    bool failed = false;
    std::string error;
    double energy_ratio = 0.0;
    double val_accuracy = 0.0;
    double mean_density = 0.0;
    double task_loss = 0.0;
};

// Rows ordered by axis value, one per grid point, plus the clean-training
// baseline (lambda = 0). When the axis is lambda and 0 is on the grid the
// baseline aliases that row instead of training twice.
struct SweepReport {
    SweepAxis axis = SweepAxis::lambda;
    std::vector<SweepRow> rows;
    SweepRow baseline;
};

// Trains one model per grid point (identical init seed across points),
// evaluates accuracy and the skip-model energy ratio on the valset. A
// failed point is recorded with its error string, never dropped.
SweepReport run_sweep(const SweepSpec& spec, const Dataset& trainset,
                      const Dataset& valset);

// Affine battery drain stand-in for continuous on-device inference.
struct BatteryModel {
    double capacity_mah = 4600.0;
    double nominal_voltage_mv = 4200.0;
    double joules_per_mac = 5e-8;
    double per_inference_overhead_joules = 0.0;

    void validate() const;
    // capacity_mah * nominal_voltage_mv * 3.6e-3
    double capacity_joules() const;
};

struct DischargeEpoch {
    std::size_t epoch = 0;
    std::uint64_t executed_macs = 0;
    double consumed_joules = 0.0;
    double percent_drop = 0.0;
    double cumulative_percent = 0.0;
    double rate_percent_per_hour = 0.0;
};

struct DischargeReport {
    std::vector<DischargeEpoch> epochs;
    double total_percent = 0.0;
    bool exhausted = false;
    std::size_t exhausted_epoch = 0;  // meaningful when exhausted
};

// Replays validation-set inference for `epochs` passes. Per epoch the model
// consumes executed_macs * joules_per_mac + samples * overhead joules; the
// percentage drop is consumed / capacity_joules * 100. The run stops at the
// epoch that empties the battery, recording its index. Wall time per
// inference converts the per-epoch drop into a discharge rate per hour.
DischargeReport simulate_streaming(const Model& model, const Dataset& valset,
                                   const BatteryModel& battery, SkipRule rule,
                                   std::size_t epochs,
                                   double seconds_per_inference = 0.01);

// sweep.csv / sweep.json under out_dir. CSV columns:
// axis_value,energy_ratio,val_accuracy,mean_density,task_loss,error
// (grid rows only; the JSON additionally carries the baseline).
void emit_reports(const SweepReport& report, const std::filesystem::path& out_dir);

// discharge.csv under out_dir, one row per simulated epoch.
void emit_reports(const DischargeReport& report, const std::filesystem::path& out_dir);

std::string sweep_report_json(const SweepReport& report);
std::string sweep_report_csv(const SweepReport& report);

// Parses a sweep CSV back into rows; inverse of sweep_report_csv.
std::vector<SweepRow> parse_sweep_csv(const std::filesystem::path& path);

}  // namespace sponge
