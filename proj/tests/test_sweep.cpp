#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sponge/sweep.hpp"

using namespace sponge;

namespace {

std::filesystem::path temp_dir(const char* name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)),
                       std::istreambuf_iterator<char>());
}

// small enough to train in milliseconds
SweepSpec tiny_spec() {
    SweepSpec spec;
    spec.axis = SweepAxis::lambda;
    spec.grid = {0.0};
    spec.base.alpha = 0.05;
    spec.base.epochs = 1;
    spec.base.batch_size = 16;
    spec.base.seed = 3;
    spec.base.sponge.poison_fraction = 0.25;
    spec.width_multiplier = 0.5;
    spec.model_seed = 11;
    return spec;
}

}  // namespace

TEST_CASE("sweep spec validation") {
    SweepSpec spec = tiny_spec();
    spec.grid = {};
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.grid = {-1.0};
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.axis = SweepAxis::sigma;
    spec.grid = {0.0};
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.axis = SweepAxis::poison_fraction;
    spec.grid = {1.5};
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("a singleton lambda-zero grid equals one clean training evaluation") {
    const Dataset trainset = synth_dataset(48, 2, {1, 8, 8}, 61);
    const Dataset valset = synth_dataset(24, 2, {1, 8, 8}, 62);
    const SweepSpec spec = tiny_spec();

    const SweepReport report = run_sweep(spec, trainset, valset);
    REQUIRE(report.rows.size() == 1);
    CHECK(!report.rows[0].failed);

    // direct clean training through the same entry points
    Model model = build_toy_mobile_net({1, 8, 8}, 2, spec.width_multiplier, spec.model_seed);
    TrainConfig config = spec.base;
    config.sponge.lambda = 0.0;
    auto [trained, history] = train(std::move(model), trainset, valset, config);
    std::vector<std::size_t> all(valset.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    auto [batch, labels] = gather_batch(valset, all);
    const EnergyReport energy = energy_report(trained, batch, spec.rule);

    CHECK(report.rows[0].axis_value == 0.0);
    CHECK(report.rows[0].energy_ratio == energy.energy_ratio);
    CHECK(report.rows[0].val_accuracy == history.epochs.back().val_accuracy);
    CHECK(report.rows[0].mean_density == history.epochs.back().mean_density);
    CHECK(report.rows[0].task_loss == history.epochs.back().task_loss);

    // lambda grid containing zero: the baseline aliases that row
    CHECK(report.baseline.energy_ratio == report.rows[0].energy_ratio);
    CHECK(report.baseline.val_accuracy == report.rows[0].val_accuracy);
}

TEST_CASE("rows are ordered by axis value and the sigma axis gets its own baseline") {
    const Dataset trainset = synth_dataset(48, 2, {1, 8, 8}, 63);
    const Dataset valset = synth_dataset(24, 2, {1, 8, 8}, 64);

    SweepSpec spec = tiny_spec();
    spec.axis = SweepAxis::sigma;
    spec.grid = {1e-2, 1e-6, 1e-4};
    spec.base.sponge.lambda = 1.0;

    const SweepReport report = run_sweep(spec, trainset, valset);
    REQUIRE(report.rows.size() == 3);
    CHECK(report.rows[0].axis_value == 1e-6);
    CHECK(report.rows[1].axis_value == 1e-4);
    CHECK(report.rows[2].axis_value == 1e-2);
    for (const SweepRow& row : report.rows) CHECK(!row.failed);

    // baseline is a clean run, not any of the attacked rows
    CHECK(report.baseline.axis_value == 0.0);
    CHECK(!report.baseline.failed);
}

TEST_CASE("a failed grid point is recorded, not dropped") {
    const Dataset trainset = synth_dataset(48, 2, {1, 8, 8}, 65);
    const Dataset valset = synth_dataset(24, 2, {1, 8, 8}, 66);

    SweepSpec spec = tiny_spec();
    spec.grid = {0.0, 1e300};  // the huge lambda overflows the weights
    spec.base.sponge.poison_fraction = 0.5;
    spec.base.epochs = 2;

    const SweepReport report = run_sweep(spec, trainset, valset);
    REQUIRE(report.rows.size() == 2);
    CHECK(!report.rows[0].failed);
    CHECK(report.rows[1].failed);
    CHECK(!report.rows[1].error.empty());
}

TEST_CASE("emit_reports round-trips the CSV and is byte deterministic") {
    SweepReport report;
    report.axis = SweepAxis::lambda;
    report.rows.push_back({0.0, false, "", 0.875, 0.9375, 0.5, 0.125});
    report.rows.push_back({5.0, false, "", 0.9375, 0.90625, 0.75, 0.25});
    report.rows.push_back({10.0, true, "boom, with commas \"quoted\"", 0.0, 0.0, 0.0, 0.0});
    report.baseline = report.rows[0];

    const auto dir = temp_dir("sponge_sweep_emit");
    emit_reports(report, dir);
    const auto parsed = parse_sweep_csv(dir / "sweep.csv");
    REQUIRE(parsed.size() == report.rows.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        CHECK(parsed[i].axis_value == report.rows[i].axis_value);
        CHECK(parsed[i].failed == report.rows[i].failed);
        CHECK(parsed[i].error == report.rows[i].error);
        CHECK(parsed[i].energy_ratio == report.rows[i].energy_ratio);
        CHECK(parsed[i].val_accuracy == report.rows[i].val_accuracy);
        CHECK(parsed[i].mean_density == report.rows[i].mean_density);
        CHECK(parsed[i].task_loss == report.rows[i].task_loss);
    }

    const std::string csv_once = slurp(dir / "sweep.csv");
    const std::string json_once = slurp(dir / "sweep.json");
    emit_reports(report, dir);
    CHECK(slurp(dir / "sweep.csv") == csv_once);
    CHECK(slurp(dir / "sweep.json") == json_once);

    std::filesystem::remove_all(dir);
}

TEST_CASE("an empty sweep report emits a header-only CSV") {
    SweepReport report;
    const auto dir = temp_dir("sponge_sweep_empty");
    emit_reports(report, dir);
    CHECK(slurp(dir / "sweep.csv") ==
          "axis_value,energy_ratio,val_accuracy,mean_density,task_loss,error\n");
    std::filesystem::remove_all(dir);
}

TEST_CASE("battery model arithmetic") {
    BatteryModel battery;
    CHECK_NOTHROW(battery.validate());
    CHECK(battery.capacity_joules() == doctest::Approx(4600.0 * 4200.0 * 3.6e-3));

    battery.capacity_mah = 0.0;
    CHECK_THROWS_AS(battery.validate(), std::invalid_argument);
    battery.capacity_mah = 4600.0;
    battery.joules_per_mac = -1.0;
    CHECK_THROWS_AS(battery.validate(), std::invalid_argument);
}

TEST_CASE("streaming simulation is exactly affine in its knobs") {
    const Dataset valset = synth_dataset(24, 2, {1, 8, 8}, 71);
    const Model model = build_toy_mobile_net({1, 8, 8}, 2, 0.5, 73);

    BatteryModel battery;
    battery.joules_per_mac = 1e-7;
    battery.per_inference_overhead_joules = 1e-4;

    const DischargeReport base =
        simulate_streaming(model, valset, battery, SkipRule::zero_activation, 5);
    REQUIRE(base.epochs.size() == 5);
    for (const DischargeEpoch& e : base.epochs) {
        CHECK(e.percent_drop == base.epochs[0].percent_drop);
    }
    CHECK(base.total_percent == base.epochs.back().cumulative_percent);

    SUBCASE("zero cost means zero discharge") {
        BatteryModel idle = battery;
        idle.joules_per_mac = 0.0;
        idle.per_inference_overhead_joules = 0.0;
        const DischargeReport report =
            simulate_streaming(model, valset, idle, SkipRule::zero_activation, 3);
        for (const DischargeEpoch& e : report.epochs) {
            CHECK(e.consumed_joules == 0.0);
            CHECK(e.percent_drop == 0.0);
        }
        CHECK(!report.exhausted);
    }

    SUBCASE("doubling the per-MAC cost and overhead doubles every drop exactly") {
        BatteryModel doubled = battery;
        doubled.joules_per_mac = 2.0 * battery.joules_per_mac;
        doubled.per_inference_overhead_joules = 2.0 * battery.per_inference_overhead_joules;
        const DischargeReport report =
            simulate_streaming(model, valset, doubled, SkipRule::zero_activation, 5);
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(report.epochs[i].percent_drop == 2.0 * base.epochs[i].percent_drop);
            CHECK(report.epochs[i].cumulative_percent ==
                  2.0 * base.epochs[i].cumulative_percent);
        }
    }

    SUBCASE("halving the capacity doubles every drop exactly") {
        BatteryModel halved = battery;
        halved.capacity_mah = battery.capacity_mah / 2.0;
        const DischargeReport report =
            simulate_streaming(model, valset, halved, SkipRule::zero_activation, 5);
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(report.epochs[i].percent_drop == 2.0 * base.epochs[i].percent_drop);
            CHECK(report.epochs[i].cumulative_percent ==
                  2.0 * base.epochs[i].cumulative_percent);
        }
    }
}

TEST_CASE("streaming reports exhaustion with the epoch index") {
    const Dataset valset = synth_dataset(8, 2, {1, 8, 8}, 75);
    const Model model = build_toy_mobile_net({1, 8, 8}, 2, 0.5, 76);

    BatteryModel battery;
    battery.capacity_mah = 1e-3;  // drains almost immediately
    battery.joules_per_mac = 1e-3;

    const DischargeReport report =
        simulate_streaming(model, valset, battery, SkipRule::zero_activation, 100);
    CHECK(report.exhausted);
    CHECK(report.epochs.size() == report.exhausted_epoch + 1);
    CHECK(report.epochs.back().cumulative_percent >= 100.0);
}

TEST_CASE("discharge rate converts epoch drop through wall time") {
    const Dataset valset = synth_dataset(36, 2, {1, 8, 8}, 77);
    const Model model = build_toy_mobile_net({1, 8, 8}, 2, 0.5, 78);
    BatteryModel battery;
    battery.joules_per_mac = 1e-7;

    const double spi = 0.02;  // 36 inferences -> 0.72 s per epoch
    const DischargeReport report =
        simulate_streaming(model, valset, battery, SkipRule::zero_activation, 2, spi);
    const double epoch_hours = 36.0 * spi / 3600.0;
    CHECK(report.epochs[0].rate_percent_per_hour ==
          doctest::Approx(report.epochs[0].percent_drop / epoch_hours).epsilon(1e-12));
}

TEST_CASE("discharge CSV lists one row per epoch") {
    DischargeReport report;
    report.epochs.push_back({0, 1000, 0.5, 0.25, 0.25, 12.5});
    report.epochs.push_back({1, 1000, 0.5, 0.25, 0.5, 12.5});
    const auto dir = temp_dir("sponge_discharge_emit");
    emit_reports(report, dir);
    const std::string csv = slurp(dir / "discharge.csv");
    CHECK(csv ==
          "epoch,executed_macs,consumed_joules,percent_drop,cumulative_percent,"
          "rate_percent_per_hour\n"
          "0,1000,0.5,0.25,0.25,12.5\n"
          "1,1000,0.5,0.25,0.5,12.5\n");
    std::filesystem::remove_all(dir);
}
