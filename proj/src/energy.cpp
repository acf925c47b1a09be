#include "sponge/energy.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "sponge/objective.hpp"

namespace sponge {

const char* skip_rule_name(SkipRule rule) {
    switch (rule) {
        case SkipRule::zero_activation: return "zero-activation";
        case SkipRule::zero_weight: return "zero-weight";
        case SkipRule::either: return "either";
    }
    throw std::logic_error("unknown skip rule");
}

SkipRule skip_rule_from_name(const std::string& name) {
    if (name == "zero-activation") return SkipRule::zero_activation;
    if (name == "zero-weight") return SkipRule::zero_weight;
    if (name == "either") return SkipRule::either;
    throw std::invalid_argument("unknown skip rule '" + name +
                                "' (zero-activation | zero-weight | either)");
}

std::uint64_t worst_case_macs(const LayerSpec& layer,
                              const std::vector<std::size_t>& input_shape) {
    const auto out = layer_output_shape(layer, input_shape);
    switch (layer.kind) {
        case LayerKind::conv:
            // N * F * H' * W' * C * kh * kw
            return static_cast<std::uint64_t>(input_shape[0]) * layer.out_channels *
                   out[2] * out[3] * input_shape[1] * layer.kernel * layer.kernel;
        case LayerKind::depthwise_conv:
            // N * C * H' * W' * kh * kw
            return static_cast<std::uint64_t>(input_shape[0]) * input_shape[1] * out[2] *
                   out[3] * layer.kernel * layer.kernel;
        case LayerKind::dense:
            // N * in * out
            return static_cast<std::uint64_t>(input_shape[0]) * input_shape[1] *
                   layer.out_channels;
        case LayerKind::relu:
        case LayerKind::global_avg_pool:
            return 0;
    }
    throw std::logic_error("unknown layer kind");
}

namespace {

// Padded-tap lookup: taps outside the input are zero activations.
inline double tap_value(const double* plane, long long ih, long long iw, std::size_t h,
                        std::size_t w) {
    if (ih < 0 || iw < 0 || ih >= static_cast<long long>(h) ||
        iw >= static_cast<long long>(w)) {
        return 0.0;
    }
    return plane[static_cast<std::size_t>(ih) * w + static_cast<std::size_t>(iw)];
}

std::uint64_t skipped_dense(const Tensor& x, const Tensor& w, SkipRule rule) {
    const std::size_t n = x.shape[0], in = x.shape[1], out = w.shape[1];

    std::uint64_t zero_x = 0;
    std::vector<std::uint64_t> zero_x_col(in, 0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < in; ++i) {
            if (x.data[r * in + i] == 0.0) {
                ++zero_x;
                ++zero_x_col[i];
            }
        }
    }
    std::uint64_t zero_w = 0;
    std::vector<std::uint64_t> zero_w_row(in, 0);
    for (std::size_t i = 0; i < in; ++i) {
        for (std::size_t o = 0; o < out; ++o) {
            if (w.data[i * out + o] == 0.0) {
                ++zero_w;
                ++zero_w_row[i];
            }
        }
    }

    switch (rule) {
        case SkipRule::zero_activation:
            return zero_x * out;
        case SkipRule::zero_weight:
            return static_cast<std::uint64_t>(n) * zero_w;
        case SkipRule::either: {
            std::uint64_t both = 0;
            for (std::size_t i = 0; i < in; ++i) both += zero_x_col[i] * zero_w_row[i];
            return zero_x * out + static_cast<std::uint64_t>(n) * zero_w - both;
        }
    }
    throw std::logic_error("unknown skip rule");
}

std::uint64_t skipped_conv(const LayerSpec& layer, const Tensor& x, const Tensor& k,
                           SkipRule rule) {
    const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    const std::size_t f = k.shape[0], kh = k.shape[2], kw = k.shape[3];
    const auto out = layer_output_shape(layer, x.shape);
    const std::size_t oh = out[2], ow = out[3];
    const long long pad = static_cast<long long>(layer.padding);

    std::uint64_t zero_kernel = 0;
    // zero-filter count per (c, kh, kw) tap position
    std::vector<std::uint64_t> zero_f(c * kh * kw, 0);
    for (std::size_t fi = 0; fi < f; ++fi) {
        for (std::size_t t = 0; t < c * kh * kw; ++t) {
            if (k.data[fi * c * kh * kw + t] == 0.0) {
                ++zero_kernel;
                ++zero_f[t];
            }
        }
    }

    if (rule == SkipRule::zero_weight) {
        return static_cast<std::uint64_t>(n) * oh * ow * zero_kernel;
    }

    std::uint64_t zero_taps = 0, overlap = 0;
    for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t ci = 0; ci < c; ++ci) {
            const double* plane = &x.data[(ni * c + ci) * h * w];
            for (std::size_t ohi = 0; ohi < oh; ++ohi) {
                for (std::size_t owi = 0; owi < ow; ++owi) {
                    for (std::size_t khi = 0; khi < kh; ++khi) {
                        const long long ih =
                            static_cast<long long>(ohi * layer.stride + khi) - pad;
                        for (std::size_t kwi = 0; kwi < kw; ++kwi) {
                            const long long iw =
                                static_cast<long long>(owi * layer.stride + kwi) - pad;
                            if (tap_value(plane, ih, iw, h, w) == 0.0) {
                                ++zero_taps;
                                overlap += zero_f[(ci * kh + khi) * kw + kwi];
                            }
                        }
                    }
                }
            }
        }
    }

    if (rule == SkipRule::zero_activation) return zero_taps * f;
    return zero_taps * f + static_cast<std::uint64_t>(n) * oh * ow * zero_kernel - overlap;
}

std::uint64_t skipped_depthwise(const LayerSpec& layer, const Tensor& x, const Tensor& k,
                                SkipRule rule) {
    const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    const std::size_t kh = k.shape[1], kw = k.shape[2];
    const auto out = layer_output_shape(layer, x.shape);
    const std::size_t oh = out[2], ow = out[3];
    const long long pad = static_cast<long long>(layer.padding);

    std::uint64_t zero_kernel = 0;
    for (double v : k.data) {
        if (v == 0.0) ++zero_kernel;
    }
    if (rule == SkipRule::zero_weight) {
        return static_cast<std::uint64_t>(n) * oh * ow * zero_kernel;
    }

    std::uint64_t zero_taps = 0, overlap = 0;
    for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t ci = 0; ci < c; ++ci) {
            const double* plane = &x.data[(ni * c + ci) * h * w];
            const double* k_plane = &k.data[ci * kh * kw];
            for (std::size_t ohi = 0; ohi < oh; ++ohi) {
                for (std::size_t owi = 0; owi < ow; ++owi) {
                    for (std::size_t khi = 0; khi < kh; ++khi) {
                        const long long ih =
                            static_cast<long long>(ohi * layer.stride + khi) - pad;
                        for (std::size_t kwi = 0; kwi < kw; ++kwi) {
                            const long long iw =
                                static_cast<long long>(owi * layer.stride + kwi) - pad;
                            if (tap_value(plane, ih, iw, h, w) == 0.0) {
                                ++zero_taps;
                                if (k_plane[khi * kw + kwi] == 0.0) ++overlap;
                            }
                        }
                    }
                }
            }
        }
    }

    if (rule == SkipRule::zero_activation) return zero_taps;
    return zero_taps + static_cast<std::uint64_t>(n) * oh * ow * zero_kernel - overlap;
}

}  // namespace

std::uint64_t skipped_macs(const LayerSpec& layer, const Tensor& input_activations,
                           const Tensor& weights, SkipRule rule) {
    // Validates shape composition up front.
    layer_output_shape(layer, input_activations.shape);
    switch (layer.kind) {
        case LayerKind::dense:
            if (weights.rank() != 2 || weights.shape[0] != input_activations.shape[1] ||
                weights.shape[1] != layer.out_channels) {
                throw std::invalid_argument("skipped_macs: dense weight shape mismatch");
            }
            return skipped_dense(input_activations, weights, rule);
        case LayerKind::conv:
            if (weights.rank() != 4 || weights.shape[0] != layer.out_channels ||
                weights.shape[1] != input_activations.shape[1] ||
                weights.shape[2] != layer.kernel || weights.shape[3] != layer.kernel) {
                throw std::invalid_argument("skipped_macs: conv kernel shape mismatch");
            }
            return skipped_conv(layer, input_activations, weights, rule);
        case LayerKind::depthwise_conv:
            if (weights.rank() != 3 || weights.shape[0] != input_activations.shape[1] ||
                weights.shape[1] != layer.kernel || weights.shape[2] != layer.kernel) {
                throw std::invalid_argument(
                    "skipped_macs: depthwise kernel shape mismatch");
            }
            return skipped_depthwise(layer, input_activations, weights, rule);
        case LayerKind::relu:
        case LayerKind::global_avg_pool:
            return 0;
    }
    throw std::logic_error("unknown layer kind");
}

EnergyReport energy_report(const Model& model, const Tensor& batch, SkipRule rule) {
    const ForwardResult fwd = forward_traced(model, batch, TraceMode::all_layers);

    EnergyReport report;
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        const LayerSpec& layer = model.layers[k];
        const Tensor& input = k == 0 ? batch : fwd.activation(k - 1);
        const Tensor& output = fwd.activation(k);

        LayerEnergy le;
        le.layer_index = k;
        le.worst_case_macs = worst_case_macs(layer, input.shape);
        le.activation_density = true_density(output, 0.0);
        if (layer.kind == LayerKind::conv || layer.kind == LayerKind::depthwise_conv ||
            layer.kind == LayerKind::dense) {
            le.skipped_macs =
                skipped_macs(layer, input, model.params.at(param_weight_name(k)), rule);
        }
        report.total_worst += le.worst_case_macs;
        report.total_consumed += le.worst_case_macs - le.skipped_macs;
        report.layers.push_back(le);
    }
    if (report.total_worst == 0) {
        throw std::invalid_argument("energy_report: model has no MAC layers");
    }
    report.energy_ratio = static_cast<double>(report.total_consumed) /
                          static_cast<double>(report.total_worst);
    return report;
}

double energy_gap(const EnergyReport& attacked, const EnergyReport& clean) {
    if (attacked.layers.size() != clean.layers.size()) {
        throw std::invalid_argument("energy_gap: reports have different layer counts");
    }
    for (std::size_t i = 0; i < attacked.layers.size(); ++i) {
        if (attacked.layers[i].worst_case_macs != clean.layers[i].worst_case_macs) {
            throw std::invalid_argument(
                "energy_gap: architecture mismatch at layer " + std::to_string(i));
        }
    }
    return attacked.energy_ratio - clean.energy_ratio;
}

std::string energy_report_json(const EnergyReport& report) {
    nlohmann::ordered_json j;
    j["layers"] = nlohmann::ordered_json::array();
    for (const LayerEnergy& le : report.layers) {
        j["layers"].push_back({{"k", le.layer_index},
                               {"worst", le.worst_case_macs},
                               {"skipped", le.skipped_macs},
                               {"density", le.activation_density}});
    }
    j["total_worst"] = report.total_worst;
    j["total_consumed"] = report.total_consumed;
    j["energy_ratio"] = report.energy_ratio;
    return j.dump(2);
}

void write_energy_json(const EnergyReport& report, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << energy_report_json(report) << '\n';
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace sponge
