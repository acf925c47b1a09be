#include "sponge/sweep.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sponge {

const char* sweep_axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::lambda: return "lambda";
        case SweepAxis::sigma: return "sigma";
        case SweepAxis::poison_fraction: return "poison_fraction";
    }
    throw std::logic_error("unknown sweep axis");
}

SweepAxis sweep_axis_from_name(const std::string& name) {
    if (name == "lambda") return SweepAxis::lambda;
    if (name == "sigma") return SweepAxis::sigma;
    if (name == "poison_fraction" || name == "poison-frac") return SweepAxis::poison_fraction;
    throw std::invalid_argument("unknown sweep axis '" + name +
                                "' (lambda | sigma | poison_fraction)");
}

void SweepSpec::validate() const {
    if (grid.empty()) throw std::invalid_argument("sweep grid must be non-empty");
    base.validate();
    for (double v : grid) {
        switch (axis) {
            case SweepAxis::lambda:
                if (v < 0.0) throw std::invalid_argument("lambda grid value < 0");
                break;
            case SweepAxis::sigma:
                if (!(v > 0.0)) throw std::invalid_argument("sigma grid value <= 0");
                break;
            case SweepAxis::poison_fraction:
                if (v < 0.0 || v > 1.0) {
                    throw std::invalid_argument("poison fraction grid value outside [0, 1]");
                }
                break;
        }
    }
    if (width_multiplier <= 0.0) {
        throw std::invalid_argument("width multiplier must be positive");
    }
}

namespace {

TrainConfig config_at(const SweepSpec& spec, double value) {
    TrainConfig config = spec.base;
    switch (spec.axis) {
        case SweepAxis::lambda: config.sponge.lambda = value; break;
        case SweepAxis::sigma: config.sponge.sigma = value; break;
        case SweepAxis::poison_fraction: config.sponge.poison_fraction = value; break;
    }
    return config;
}

SweepRow evaluate_point(const SweepSpec& spec, double axis_value,
                        const TrainConfig& config, const Dataset& trainset,
                        const Dataset& valset) {
    SweepRow row;
    row.axis_value = axis_value;
    try {
        Model model = build_toy_mobile_net(trainset.sample_shape(),
                                           trainset.num_classes, spec.width_multiplier,
                                           spec.model_seed);
        auto [trained, history] = train(std::move(model), trainset, valset, config);
        auto [batch, labels] = gather_batch(valset, [&] {
            std::vector<std::size_t> all(valset.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
            return all;
        }());
        const EnergyReport energy = energy_report(trained, batch, spec.rule);
        row.energy_ratio = energy.energy_ratio;
        row.val_accuracy = history.epochs.back().val_accuracy;
        row.mean_density = history.epochs.back().mean_density;
        row.task_loss = history.epochs.back().task_loss;
    } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
    }
    return row;
}

}  // namespace

SweepReport run_sweep(const SweepSpec& spec, const Dataset& trainset,
                      const Dataset& valset) {
    spec.validate();

    std::vector<double> grid = spec.grid;
    std::sort(grid.begin(), grid.end());

    SweepReport report;
    report.axis = spec.axis;
    for (double value : grid) {
        report.rows.push_back(
            evaluate_point(spec, value, config_at(spec, value), trainset, valset));
    }

    // Clean-training baseline; with lambda = 0 the poison branch is inert so
    // the other knobs do not matter.
    if (spec.axis == SweepAxis::lambda &&
        std::find(grid.begin(), grid.end(), 0.0) != grid.end()) {
        report.baseline =
            report.rows[static_cast<std::size_t>(std::find(grid.begin(), grid.end(), 0.0) -
                                                 grid.begin())];
    } else {
        TrainConfig clean = spec.base;
        clean.sponge.lambda = 0.0;
        report.baseline = evaluate_point(spec, 0.0, clean, trainset, valset);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Streaming discharge simulation

void BatteryModel::validate() const {
    if (!(capacity_mah > 0.0)) throw std::invalid_argument("battery capacity must be positive");
    if (!(nominal_voltage_mv > 0.0)) {
        throw std::invalid_argument("battery voltage must be positive");
    }
    if (!(joules_per_mac >= 0.0)) {
        throw std::invalid_argument("joules per MAC must be non-negative");
    }
    if (per_inference_overhead_joules < 0.0) {
        throw std::invalid_argument("per-inference overhead must be non-negative");
    }
}

double BatteryModel::capacity_joules() const {
    return capacity_mah * nominal_voltage_mv * 3.6e-3;
}

DischargeReport simulate_streaming(const Model& model, const Dataset& valset,
                                   const BatteryModel& battery, SkipRule rule,
                                   std::size_t epochs, double seconds_per_inference) {
    battery.validate();
    valset.validate();
    if (valset.size() == 0) throw std::invalid_argument("validation set is empty");
    if (seconds_per_inference <= 0.0) {
        throw std::invalid_argument("seconds per inference must be positive");
    }

    std::vector<std::size_t> all(valset.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    auto [batch, labels] = gather_batch(valset, all);
    const EnergyReport energy = energy_report(model, batch, rule);

    const double samples = static_cast<double>(valset.size());
    const double consumed =
        static_cast<double>(energy.total_consumed) * battery.joules_per_mac +
        samples * battery.per_inference_overhead_joules;
    const double percent = consumed / battery.capacity_joules() * 100.0;
    const double epoch_hours = samples * seconds_per_inference / 3600.0;
    const double rate = percent / epoch_hours;

    DischargeReport report;
    double cumulative = 0.0;
    for (std::size_t e = 0; e < epochs; ++e) {
        cumulative += percent;
        report.epochs.push_back(
            {e, energy.total_consumed, consumed, percent, cumulative, rate});
        report.total_percent = cumulative;
        if (cumulative >= 100.0) {
            report.exhausted = true;
            report.exhausted_epoch = e;
            break;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report emission

namespace {

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw std::runtime_error("bad numeric field '" + s + "' in sweep CSV");
    }
    return v;
}

// Error strings ride in the last CSV column; commas/quotes get quoted.
std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

nlohmann::ordered_json row_json(const SweepRow& row) {
    nlohmann::ordered_json j;
    j["axis_value"] = row.axis_value;
    j["failed"] = row.failed;
    if (row.failed) j["error"] = row.error;
    j["energy_ratio"] = row.energy_ratio;
    j["val_accuracy"] = row.val_accuracy;
    j["mean_density"] = row.mean_density;
    j["task_loss"] = row.task_loss;
    return j;
}

}  // namespace

std::string sweep_report_csv(const SweepReport& report) {
    std::ostringstream os;
    os << "axis_value,energy_ratio,val_accuracy,mean_density,task_loss,error\n";
    for (const SweepRow& row : report.rows) {
        os << format_double(row.axis_value) << ',' << format_double(row.energy_ratio)
           << ',' << format_double(row.val_accuracy) << ','
           << format_double(row.mean_density) << ',' << format_double(row.task_loss)
           << ',' << csv_escape(row.error) << '\n';
    }
    return os.str();
}

std::string sweep_report_json(const SweepReport& report) {
    nlohmann::ordered_json j;
    j["axis"] = sweep_axis_name(report.axis);
    j["rows"] = nlohmann::ordered_json::array();
    for (const SweepRow& row : report.rows) j["rows"].push_back(row_json(row));
    j["baseline"] = row_json(report.baseline);
    return j.dump(2);
}

void emit_reports(const SweepReport& report, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    const auto csv_path = out_dir / "sweep.csv";
    const auto json_path = out_dir / "sweep.json";
    {
        std::ofstream os(csv_path);
        if (!os) throw std::runtime_error("cannot open " + csv_path.string() + " for writing");
        os << sweep_report_csv(report);
        if (!os) throw std::runtime_error("write failed: " + csv_path.string());
    }
    {
        std::ofstream os(json_path);
        if (!os) throw std::runtime_error("cannot open " + json_path.string() + " for writing");
        os << sweep_report_json(report) << '\n';
        if (!os) throw std::runtime_error("write failed: " + json_path.string());
    }
}

void emit_reports(const DischargeReport& report, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    const auto path = out_dir / "discharge.csv";
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << "epoch,executed_macs,consumed_joules,percent_drop,cumulative_percent,"
          "rate_percent_per_hour\n";
    for (const DischargeEpoch& e : report.epochs) {
        os << e.epoch << ',' << e.executed_macs << ',' << format_double(e.consumed_joules)
           << ',' << format_double(e.percent_drop) << ','
           << format_double(e.cumulative_percent) << ','
           << format_double(e.rate_percent_per_hour) << '\n';
    }
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::vector<SweepRow> parse_sweep_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty sweep CSV " + path.string());
    if (line != "axis_value,energy_ratio,val_accuracy,mean_density,task_loss,error") {
        throw std::runtime_error("unexpected sweep CSV header in " + path.string());
    }

    std::vector<SweepRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        // Split into six fields; the error field may be quoted.
        std::vector<std::string> fields;
        std::size_t pos = 0;
        for (int f = 0; f < 5; ++f) {
            const std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) {
                throw std::runtime_error("malformed sweep CSV row '" + line + "'");
            }
            fields.push_back(line.substr(pos, comma - pos));
            pos = comma + 1;
        }
        std::string error = line.substr(pos);
        if (error.size() >= 2 && error.front() == '"' && error.back() == '"') {
            std::string unquoted;
            for (std::size_t i = 1; i + 1 < error.size(); ++i) {
                if (error[i] == '"' && i + 2 < error.size() && error[i + 1] == '"') ++i;
                unquoted += error[i];
            }
            error = unquoted;
        }

        SweepRow row;
        row.axis_value = parse_double(fields[0]);
        row.energy_ratio = parse_double(fields[1]);
        row.val_accuracy = parse_double(fields[2]);
        row.mean_density = parse_double(fields[3]);
        row.task_loss = parse_double(fields[4]);
        row.error = error;
        row.failed = !error.empty();
        rows.push_back(row);
    }
    return rows;
}

}  // namespace sponge
