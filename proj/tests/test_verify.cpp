#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "mononet/data.hpp"
#include "mononet/errors.hpp"
#include "mononet/model.hpp"
#include "mononet/rng.hpp"
#include "mononet/train.hpp"
#include "mononet/verify.hpp"

using namespace mononet;

namespace {

Model demo_model(std::uint64_t seed, const std::string& spec = "8,3,8",
                 std::size_t input_dim = 5) {
    return Model::build(parse_spec_string(spec), input_dim, seed);
}

Tensor unit_box(std::size_t n, double v) { return Tensor::full({n}, v); }

} // namespace

TEST_CASE("probe arguments are validated") {
    Model m = demo_model(0);
    CHECK_THROWS_AS(probe_monotonicity(m, 0, {0.1}, 1), ContractError);
    CHECK_THROWS_AS(probe_monotonicity(m, 10, {}, 1), ContractError);
    CHECK_THROWS_AS(probe_monotonicity(m, 10, {0.0}, 1), ContractError);
    CHECK_THROWS_AS(probe_monotonicity(m, 10, {0.1, -0.5}, 1), ContractError);

    Tensor lo = unit_box(2, -1.0), hi = unit_box(2, 1.0);  // wrong width
    CHECK_THROWS_AS(probe_block(m.block(), lo, hi, 10, {0.1}, 1), DimensionError);
}

TEST_CASE("fresh models probe clean at every seed tried") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Model m = demo_model(seed);
        ProbeReport rep = probe_monotonicity(m, 1000, {1e-3, 0.1, 1.0}, 17 + seed);
        CHECK(rep.passed());
        CHECK(rep.violation_count == 0);
        CHECK(rep.max_violation_magnitude == 0.0);
    }
}

TEST_CASE("probe reports are deterministic in the seed") {
    Model m = demo_model(3);
    m.block().layers[0].sign_mask.at(0, 0) = -1.0;
    ProbeReport a = probe_monotonicity(m, 500, {0.1, 1.0}, 7);
    ProbeReport b = probe_monotonicity(m, 500, {0.1, 1.0}, 7);
    CHECK(a.violation_count == b.violation_count);
    CHECK(a.max_violation_magnitude == b.max_violation_magnitude);
    REQUIRE(!a.violations.empty());
    CHECK(a.violations[0].probe == b.violations[0].probe);
    CHECK(a.violations[0].coord == b.violations[0].coord);
    CHECK(a.violations[0].observed_diff == b.violations[0].observed_diff);
}

TEST_CASE("single negated weight is caught wherever it hides") {
    // Every (layer, row, col) slot of a small model, exhaustively.
    Model base = demo_model(5, "6,3,6", 4);
    const auto& layers = base.block().layers;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        for (std::size_t r = 0; r < layers[li].weight.rows(); ++r) {
            for (std::size_t c = 0; c < layers[li].weight.cols(); ++c) {
                Model m = base;
                m.block().layers[li].sign_mask.at(r, c) *= -1.0;
                ProbeReport rep = probe_monotonicity(m, 2000, {1e-3, 0.1, 1.0},
                                                     31 * li + 7 * r + c);
                INFO("layer " << li << " entry (" << r << "," << c << ")");
                CHECK(rep.violation_count > 0);
            }
        }
    }
}

TEST_CASE("violations carry a usable counter-example") {
    Model m = demo_model(9);
    m.block().layers[1].sign_mask.at(2, 0) = -1.0;
    ProbeReport rep = probe_monotonicity(m, 3000, {0.1, 1.0}, 23);
    REQUIRE(rep.violation_count > 0);
    const Violation& v = rep.violations[0];
    CHECK(!v.stage.empty());
    CHECK(v.delta > 0.0);
    CHECK(v.expected_sign != 0.0);
    // The observed move directed by the expected sign is negative past tolerance.
    CHECK(v.observed_diff * v.expected_sign < -rep.tolerance);
    CHECK(!v.point.empty());
}

TEST_CASE("sign consistency holds on clean models") {
    // Empirical movement direction, when past tolerance, matches the sign
    // matrix entry for the probed coordinate/output pair.
    Model m = demo_model(11);
    Tensor signs = m.signs();
    Rng rng(41);
    const std::size_t k = m.interp_width();
    for (int trial = 0; trial < 400; ++trial) {
        Tensor h({1, k});
        for (std::size_t i = 0; i < k; ++i) h.at(0, i) = rng.uniform(-1.0, 1.0);
        std::size_t coord = rng.uniform_int(k);
        double delta = rng.uniform(1e-3, 1.0);
        Tensor h2 = h;
        h2.at(0, coord) += delta;
        Tensor y1 = m.forward_from_interp(h);
        Tensor y2 = m.forward_from_interp(h2);
        for (std::size_t j = 0; j < m.output_width(); ++j) {
            double diff = y2.at(0, j) - y1.at(0, j);
            if (std::abs(diff) > 1e-9) {
                CHECK(diff * signs.at(coord, j) > 0.0);
            }
        }
    }
}

TEST_CASE("gradient check stays under tolerance on random models") {
    Rng arch(1234);
    for (int i = 0; i < 10; ++i) {
        std::size_t in = 2 + arch.uniform_int(5);
        std::string spec = std::to_string(2 + arch.uniform_int(6)) + "," +
                           std::to_string(2 + arch.uniform_int(3)) + "," +
                           std::to_string(2 + arch.uniform_int(6));
        std::size_t n_out = arch.uniform_int(3) == 0 ? 4 : 1;
        Model m = Model::build(parse_spec_string(spec, n_out), in, 500 + i);
        double err = gradient_check(m, 4, 900 + i);
        INFO("spec " << spec << " n_out " << n_out);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("gradient check copes with relu free layers") {
    auto specs = parse_spec_string("6,3,6");
    // Flip the first free layer to relu: kink handling must not blow up.
    specs[0].activation = Activation::Relu;
    Model m = Model::build(specs, 4, 77);
    CHECK(gradient_check(m, 6, 5) < 1e-4);
}

TEST_CASE("zero-input gradients are finite and tiny-step stable") {
    Model m = demo_model(13, "4,2,4", 3);
    Tensor x({2, 3});  // all zeros
    std::vector<int> labels = {0, 1};
    Tape tape;
    Model::Bound bound = m.bind(tape, x);
    Tape::NodeId loss = tape.bce_with_logits(bound.logits, labels);
    auto grads = tape.gradients(loss);
    for (const Tensor& g : grads.grads) {
        for (std::size_t i = 0; i < g.numel(); ++i) CHECK(std::isfinite(g[i]));
    }
    CHECK(gradient_check(m, 1, 3) < 1e-6);
}

TEST_CASE("positivity report locates a tampered entry") {
    Model m = demo_model(15);
    PositivityReport clean = check_weight_positivity(m);
    CHECK(clean.passed());
    CHECK(clean.entries_checked ==
          m.block().layers[0].weight.numel() + m.block().layers[1].weight.numel());

    m.block().layers[1].sign_mask.at(4, 0) = -1.0;
    PositivityReport bad = check_weight_positivity(m);
    REQUIRE(bad.issues.size() == 1);
    CHECK(bad.issues[0].layer == 1);
    CHECK(bad.issues[0].row == 4);
    CHECK(bad.issues[0].col == 0);
    CHECK(bad.issues[0].value < 0.0);
    CHECK(!bad.passed());
}

TEST_CASE("reports serialize to parseable json") {
    Model m = demo_model(19);
    ProbeReport rep = probe_monotonicity(m, 200, {0.1}, 3);
    nlohmann::json pj = nlohmann::json::parse(rep.to_json());
    CHECK(pj["violation_count"] == 0);
    CHECK(pj["probes_run"].get<std::size_t>() >= 200);
    CHECK(pj["deltas"].size() == 1);

    m.block().layers[0].sign_mask.at(0, 0) = -1.0;
    ProbeReport bad = probe_monotonicity(m, 2000, {0.1, 1.0}, 3);
    nlohmann::json bj = nlohmann::json::parse(bad.to_json());
    REQUIRE(bj["violation_count"].get<std::size_t>() > 0);
    CHECK(bj["violations"].size() > 0);
    CHECK(bj["violations"][0].contains("stage"));
    CHECK(bj["violations"][0].contains("observed_diff"));

    PositivityReport pos = check_weight_positivity(m);
    nlohmann::json qj = nlohmann::json::parse(pos.to_json());
    CHECK(qj["issues"].size() == 1);
}

TEST_CASE("probing honors recorded interpretable ranges") {
    Model m = demo_model(25);
    Rng rng(6);
    Tensor x({64, 5});
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    m.record_interp_range(x);
    REQUIRE(m.has_interp_range());
    const Tensor& lo = m.interp_lo();
    const Tensor& hi = m.interp_hi();
    REQUIRE(lo.numel() == m.interp_width());
    for (std::size_t i = 0; i < lo.numel(); ++i) CHECK(lo[i] <= hi[i]);
    // Tanh readings live strictly inside (-1, 1).
    for (std::size_t i = 0; i < lo.numel(); ++i) {
        CHECK(lo[i] > -1.0);
        CHECK(hi[i] < 1.0);
    }
    ProbeReport rep = probe_monotonicity(m, 800, {1e-3, 0.1, 1.0}, 8);
    CHECK(rep.passed());
}
