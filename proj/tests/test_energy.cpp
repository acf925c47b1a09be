#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sponge/energy.hpp"
#include "sponge/rng.hpp"

#include "oracles.hpp"

using namespace sponge;

namespace {

Tensor nonzero_tensor(std::vector<std::size_t> shape, Rng& rng) {
    return oracles::random_tensor_away_from_zero(std::move(shape), rng, 0.1);
}

// sprinkle exact zeros for skip counting
Tensor sparse_tensor(std::vector<std::size_t> shape, Rng& rng, double zero_fraction) {
    Tensor t = nonzero_tensor(std::move(shape), rng);
    for (double& v : t.data) {
        if (rng.uniform() < zero_fraction) v = 0.0;
    }
    return t;
}

}  // namespace

TEST_CASE("worst_case_macs closed forms") {
    CHECK(worst_case_macs(LayerSpec::dense(2), {1, 4}) == 8);
    CHECK(worst_case_macs(LayerSpec::conv(1, 3), {1, 1, 3, 3}) == 9);
    // N*F*H'*W'*C*kh*kw
    CHECK(worst_case_macs(LayerSpec::conv(4, 3, 1, 1), {2, 3, 8, 8}) ==
          2ull * 4 * 8 * 8 * 3 * 3 * 3);
    CHECK(worst_case_macs(LayerSpec::depthwise(3), {2, 5, 6, 6}) ==
          2ull * 5 * 4 * 4 * 3 * 3);
    CHECK(worst_case_macs(LayerSpec::relu(), {2, 3, 4, 4}) == 0);
    CHECK(worst_case_macs(LayerSpec::global_avg_pool(), {2, 3, 4, 4}) == 0);
    CHECK_THROWS_AS(worst_case_macs(LayerSpec::conv(1, 5), {1, 1, 3, 3}),
                    std::invalid_argument);
}

TEST_CASE("worst_case_macs equals enumerating every multiply site") {
    Rng rng(3);
    struct Case {
        LayerSpec layer;
        std::vector<std::size_t> in;
        std::vector<std::size_t> weight_shape;
    };
    const Case cases[] = {
        {LayerSpec::conv(3, 3, 1, 0), {2, 2, 6, 6}, {3, 2, 3, 3}},
        {LayerSpec::conv(2, 3, 2, 1), {1, 3, 7, 7}, {2, 3, 3, 3}},
        {LayerSpec::depthwise(3, 1, 1), {2, 4, 5, 5}, {4, 3, 3}},
        {LayerSpec::dense(5), {3, 7}, {7, 5}},
    };
    for (const Case& c : cases) {
        const Tensor x = nonzero_tensor(c.in, rng);
        const Tensor w = nonzero_tensor(c.weight_shape, rng);
        CHECK(worst_case_macs(c.layer, c.in) == oracles::count_mac_sites(c.layer, x, w));
    }
}

TEST_CASE("skipped_macs trivial cases") {
    Rng rng(5);
    const Tensor x = nonzero_tensor({2, 6}, rng);
    const Tensor w = nonzero_tensor({6, 3}, rng);
    for (SkipRule rule : {SkipRule::zero_activation, SkipRule::zero_weight, SkipRule::either}) {
        CHECK(skipped_macs(LayerSpec::dense(3), x, w, rule) == 0);
    }

    // dense 4 -> 2, input [1 0 1 0]: each zero activation kills `out` sites
    const Tensor gated({1, 4}, {1, 0, 1, 0});
    const Tensor w42 = nonzero_tensor({4, 2}, rng);
    CHECK(skipped_macs(LayerSpec::dense(2), gated, w42, SkipRule::zero_activation) == 4);
}

TEST_CASE("skipped_macs equals the site enumeration oracle") {
    Rng rng(7);
    struct Case {
        LayerSpec layer;
        std::vector<std::size_t> in;
        std::vector<std::size_t> weight_shape;
    };
    const Case cases[] = {
        {LayerSpec::conv(3, 3, 1, 0), {2, 2, 6, 6}, {3, 2, 3, 3}},
        {LayerSpec::conv(2, 3, 2, 1), {1, 3, 7, 7}, {2, 3, 3, 3}},
        {LayerSpec::conv(4, 1, 1, 0), {2, 3, 4, 4}, {4, 3, 1, 1}},
        {LayerSpec::depthwise(3, 1, 1), {2, 4, 5, 5}, {4, 3, 3}},
        {LayerSpec::depthwise(2, 2, 0), {1, 3, 6, 6}, {3, 2, 2}},
        {LayerSpec::dense(5), {3, 7}, {7, 5}},
    };
    for (const Case& c : cases) {
        for (double zero_fraction : {0.0, 0.3, 0.7}) {
            const Tensor x = sparse_tensor(c.in, rng, zero_fraction);
            const Tensor w = sparse_tensor(c.weight_shape, rng, zero_fraction * 0.5);
            for (SkipRule rule :
                 {SkipRule::zero_activation, SkipRule::zero_weight, SkipRule::either}) {
                CHECK(skipped_macs(c.layer, x, w, rule) ==
                      oracles::count_skipped_sites(c.layer, x, w, rule));
            }
        }
    }
}

TEST_CASE("either-rule dominates the single-operand rules") {
    Rng rng(11);
    const LayerSpec layer = LayerSpec::conv(3, 3, 1, 1);
    const Tensor x = sparse_tensor({2, 2, 5, 5}, rng, 0.4);
    const Tensor w = sparse_tensor({3, 2, 3, 3}, rng, 0.3);
    const auto either = skipped_macs(layer, x, w, SkipRule::either);
    CHECK(either >= skipped_macs(layer, x, w, SkipRule::zero_activation));
    CHECK(either >= skipped_macs(layer, x, w, SkipRule::zero_weight));
    CHECK(skipped_macs(layer, x, w, SkipRule::zero_activation) <=
          worst_case_macs(layer, x.shape));
}

TEST_CASE("zeroing one activation never lowers the activation-rule skip count") {
    Rng rng(13);
    const LayerSpec layer = LayerSpec::depthwise(3, 1, 1);
    Tensor x = sparse_tensor({1, 3, 5, 5}, rng, 0.2);
    const Tensor w = nonzero_tensor({3, 3, 3}, rng);
    const auto before = skipped_macs(layer, x, w, SkipRule::zero_activation);
    for (std::size_t i = 0; i < x.size(); i += 7) {
        Tensor zeroed = x;
        zeroed.data[i] = 0.0;
        CHECK(skipped_macs(layer, zeroed, w, SkipRule::zero_activation) >= before);
    }
}

TEST_CASE("energy_report on a dense-operand model has ratio one") {
    // weights drawn away from zero, inputs strictly positive, no padding
    Model model = build_toy_mobile_net({1, 8, 8}, 3, 1.0, 17);
    Rng rng(19);
    for (auto& [name, tensor] : model.params) {
        for (double& v : tensor.data) v = rng.uniform(0.05, 0.4);
    }
    Tensor batch({2, 1, 8, 8});
    for (double& v : batch.data) v = rng.uniform(0.1, 1.0);

    for (SkipRule rule : {SkipRule::zero_activation, SkipRule::zero_weight, SkipRule::either}) {
        const EnergyReport report = energy_report(model, batch, rule);
        CHECK(report.energy_ratio == 1.0);
        CHECK(report.total_consumed == report.total_worst);
    }
}

TEST_CASE("zero input under the activation rule skips the first conv entirely") {
    Model model = build_toy_mobile_net({1, 8, 8}, 3, 1.0, 23);
    const Tensor zero_batch({2, 1, 8, 8});
    const EnergyReport zeroed = energy_report(model, zero_batch, SkipRule::zero_activation);
    CHECK(zeroed.layers[0].skipped_macs == zeroed.layers[0].worst_case_macs);

    Rng rng(29);
    Tensor dense_batch({2, 1, 8, 8});
    for (double& v : dense_batch.data) v = rng.uniform(0.1, 1.0);
    const EnergyReport dense = energy_report(model, dense_batch, SkipRule::zero_activation);
    CHECK(zeroed.energy_ratio < dense.energy_ratio);
}

TEST_CASE("energy_report counts a hand-enumerated two-layer model") {
    // gap -> dense(2) on a 1x2x2 input: 1*1*2 = 2 MACs per sample
    Model m;
    m.layers = {LayerSpec::global_avg_pool(), LayerSpec::dense(2)};
    m.params.emplace("layer1.weight", Tensor({1, 2}, {0.5, 0.0}));
    m.params.emplace("layer1.bias", Tensor({2}, {0.1, 0.1}));
    m.input_shape = {1, 2, 2};
    m.num_classes = 2;

    // sample 0 pools to 0 (skip both sites), sample 1 pools to 1
    Tensor batch({2, 1, 2, 2});
    batch.data = {0, 0, 0, 0, 1, 1, 1, 1};

    const EnergyReport report = energy_report(m, batch, SkipRule::zero_activation);
    CHECK(report.total_worst == 4);
    CHECK(report.layers[1].skipped_macs == 2);
    CHECK(report.total_consumed == 2);
    CHECK(report.energy_ratio == 0.5);

    // weight rule: one zero weight kills one site per sample
    const EnergyReport weights = energy_report(m, batch, SkipRule::zero_weight);
    CHECK(weights.layers[1].skipped_macs == 2);

    // either rule: union of the two zero patterns = 3 sites
    const EnergyReport either = energy_report(m, batch, SkipRule::either);
    CHECK(either.layers[1].skipped_macs == 3);
}

TEST_CASE("energy_gap subtracts ratios and checks architecture") {
    EnergyReport attacked;
    attacked.layers = {{0, 100, 10, 0.9}};
    attacked.total_worst = 100;
    attacked.total_consumed = 90;
    attacked.energy_ratio = 0.9888554811;

    EnergyReport clean = attacked;
    clean.energy_ratio = 0.884;

    CHECK(energy_gap(attacked, attacked) == 0.0);
    // Rising about ten and a half percentage points over the baseline.
    CHECK(energy_gap(attacked, clean) * 100.0 ==
          doctest::Approx(10.48554811).epsilon(1e-9));

    EnergyReport other = clean;
    other.layers[0].worst_case_macs = 50;
    CHECK_THROWS_AS(energy_gap(attacked, other), std::invalid_argument);
}

TEST_CASE("energy report JSON carries the pinned fields") {
    Model model = build_toy_mobile_net({1, 8, 8}, 3, 1.0, 31);
    Rng rng(37);
    Tensor batch({1, 1, 8, 8});
    for (double& v : batch.data) v = rng.uniform(0.0, 1.0);
    const EnergyReport report = energy_report(model, batch, SkipRule::zero_activation);
    const std::string json = energy_report_json(report);
    CHECK(json.find("\"layers\"") != std::string::npos);
    CHECK(json.find("\"worst\"") != std::string::npos);
    CHECK(json.find("\"skipped\"") != std::string::npos);
    CHECK(json.find("\"density\"") != std::string::npos);
    CHECK(json.find("\"total_worst\"") != std::string::npos);
    CHECK(json.find("\"total_consumed\"") != std::string::npos);
    CHECK(json.find("\"energy_ratio\"") != std::string::npos);
}

TEST_CASE("skip rule names round-trip") {
    for (SkipRule rule : {SkipRule::zero_activation, SkipRule::zero_weight, SkipRule::either}) {
        CHECK(skip_rule_from_name(skip_rule_name(rule)) == rule);
    }
    CHECK_THROWS_AS(skip_rule_from_name("bogus"), std::invalid_argument);
}
