#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "mononet/conv.hpp"
#include "mononet/data.hpp"
#include "mononet/errors.hpp"
#include "mononet/model.hpp"
#include "mononet/rng.hpp"
#include "mononet/serialize.hpp"
#include "mononet/tape.hpp"
#include "mononet/train.hpp"
#include "mononet/verify.hpp"

using namespace mononet;

namespace {

// Independent quadruple-loop convolution oracle.
std::vector<Tensor> conv_oracle(const ConvSpec& spec, const Tensor& weight, const Tensor& bias,
                                const Tensor& image, std::size_t h, std::size_t w) {
    const std::size_t out_h = (h - spec.kernel_h) / spec.stride + 1;
    const std::size_t out_w = (w - spec.kernel_w) / spec.stride + 1;
    std::vector<Tensor> maps;
    for (std::size_t k = 0; k < spec.filters; ++k) {
        Tensor map({out_h, out_w});
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                double s = bias[k];
                for (std::size_t ky = 0; ky < spec.kernel_h; ++ky) {
                    for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
                        std::size_t iy = oy * spec.stride + ky;
                        std::size_t ix = ox * spec.stride + kx;
                        s += image[iy * w + ix] * weight.at(ky * spec.kernel_w + kx, k);
                    }
                }
                switch (spec.activation) {
                    case Activation::Relu: s = s > 0.0 ? s : 0.0; break;
                    case Activation::Tanh: s = std::tanh(s); break;
                    case Activation::Sigmoid: s = 1.0 / (1.0 + std::exp(-s)); break;
                    case Activation::Identity: break;
                }
                map.at(oy, ox) = s;
            }
        }
        maps.push_back(std::move(map));
    }
    return maps;
}

Tensor random_image(Rng& rng, std::size_t h, std::size_t w) {
    Tensor img({1, h * w});
    for (std::size_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform(0.0, 1.0);
    return img;
}

HierModel tiny_hier(std::uint64_t seed) {
    ConvSpec spec;
    spec.filters = 8;
    spec.kernel_h = 3;
    spec.kernel_w = 3;
    spec.stride = 1;
    return HierModel::build(spec, 8, 8, {12, 6}, {10}, 4, seed);
}

} // namespace

TEST_CASE("one-by-one identity kernel reproduces the image") {
    ConvSpec spec;
    spec.filters = 1;
    spec.kernel_h = 1;
    spec.kernel_w = 1;
    spec.stride = 1;
    spec.activation = Activation::Identity;
    Tensor weight({1, 1});
    weight.at(0, 0) = 1.0;
    Tensor bias({1});
    bias[0] = 0.0;
    Rng rng(1);
    Tensor img = random_image(rng, 4, 4);
    auto maps = conv_forward(spec, weight, bias, img, 4, 4);
    REQUIRE(maps.size() == 1);
    REQUIRE(maps[0].rows() == 4);
    REQUIRE(maps[0].cols() == 4);
    for (std::size_t i = 0; i < 16; ++i) {
        CHECK(maps[0][i] == doctest::Approx(img[i]).epsilon(1e-15));
    }
}

TEST_CASE("zero kernel yields the bias everywhere") {
    ConvSpec spec;
    spec.filters = 2;
    spec.kernel_h = 2;
    spec.kernel_w = 2;
    spec.stride = 1;
    spec.activation = Activation::Identity;
    Tensor weight({4, 2});  // all zeros
    Tensor bias({2});
    bias[0] = 0.75;
    bias[1] = -1.5;
    Rng rng(2);
    Tensor img = random_image(rng, 5, 5);
    auto maps = conv_forward(spec, weight, bias, img, 5, 5);
    for (std::size_t k = 0; k < 2; ++k) {
        for (std::size_t i = 0; i < maps[k].numel(); ++i) {
            CHECK(maps[k][i] == doctest::Approx(bias[k]).epsilon(1e-15));
        }
    }
}

TEST_CASE("conv_forward matches the quadruple-loop oracle") {
    Rng rng(7);
    for (int trial = 0; trial < 8; ++trial) {
        ConvSpec spec;
        spec.filters = 1 + rng.uniform_int(3);
        spec.kernel_h = 1 + rng.uniform_int(3);
        spec.kernel_w = 1 + rng.uniform_int(3);
        spec.stride = 1 + rng.uniform_int(2);
        spec.activation = trial % 2 ? Activation::Relu : Activation::Identity;
        std::size_t h = spec.kernel_h + 2 + rng.uniform_int(4);
        std::size_t w = spec.kernel_w + 2 + rng.uniform_int(4);
        Tensor weight({spec.kernel_h * spec.kernel_w, spec.filters});
        for (std::size_t i = 0; i < weight.numel(); ++i) weight[i] = rng.uniform(-1.0, 1.0);
        Tensor bias({spec.filters});
        for (std::size_t i = 0; i < bias.numel(); ++i) bias[i] = rng.uniform(-0.5, 0.5);
        Tensor img = random_image(rng, h, w);

        auto got = conv_forward(spec, weight, bias, img, h, w);
        auto want = conv_oracle(spec, weight, bias, img, h, w);
        REQUIRE(got.size() == want.size());
        for (std::size_t k = 0; k < got.size(); ++k) {
            REQUIRE(got[k].shape() == want[k].shape());
            for (std::size_t i = 0; i < got[k].numel(); ++i) {
                CHECK(got[k][i] == doctest::Approx(want[k][i]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("maxpool summary takes the earliest max position") {
    Tensor a({2, 2});
    a.at(0, 0) = 1.0;
    a.at(0, 1) = 7.0;
    a.at(1, 0) = 3.0;
    a.at(1, 1) = 2.0;
    Tensor tie({2, 2});
    tie.at(0, 0) = 5.0;
    tie.at(0, 1) = 5.0;
    tie.at(1, 0) = 5.0;
    tie.at(1, 1) = 5.0;
    Tensor flat({2, 2});
    for (std::size_t i = 0; i < 4; ++i) flat[i] = -2.0;

    auto [vals, locs] = maxpool_summary({a, tie, flat});
    CHECK(vals[0] == 7.0);
    CHECK(locs[0] == std::make_pair<std::size_t, std::size_t>(0, 1));
    CHECK(vals[1] == 5.0);
    CHECK(locs[1] == std::make_pair<std::size_t, std::size_t>(0, 0));  // lexicographic tie
    CHECK(vals[2] == -2.0);
    CHECK(locs[2] == std::make_pair<std::size_t, std::size_t>(0, 0));  // constant map
}

TEST_CASE("maxpool is monotone: raising any pixel never lowers a summary") {
    Rng rng(9);
    ConvSpec spec;  // defaults: 16 filters 9x9 stride 2 relu
    spec.filters = 4;
    HierModel m = HierModel::build(spec, 28, 28, {8, 4}, {8}, 3, 5);
    Tensor img = random_image(rng, 28, 28);
    auto base = m.activation_maps(img);
    for (int trial = 0; trial < 30; ++trial) {
        Tensor bumped = img;
        std::size_t px = rng.uniform_int(bumped.numel());
        bumped[px] += rng.uniform(0.0, 0.5);
        auto moved = m.activation_maps(bumped);
        for (std::size_t k = 0; k < spec.filters; ++k) {
            // Conv weights may be negative (free stage), so only the pooling
            // itself is monotone: compare against pooling of the same maps.
            auto pooled = maxpool_summary(moved.maps);
            CHECK(pooled.first[k] == moved.summaries[k]);
        }
    }
    // Direct pooling monotonicity on raw maps.
    Tensor map({3, 3});
    for (std::size_t i = 0; i < 9; ++i) map[i] = double(i % 4);
    auto [v1, l1] = maxpool_summary({map});
    Tensor higher = map;
    higher[4] += 2.0;
    auto [v2, l2] = maxpool_summary({higher});
    CHECK(v2[0] >= v1[0]);
}

TEST_CASE("hier model shapes and sign matrices") {
    HierModel m = tiny_hier(3);
    CHECK(m.classes() == 4);
    CHECK(m.hidden_width() == 6);
    Tensor s1 = m.stage1_signs();
    Tensor s2 = m.stage2_signs();
    CHECK(s1.rows() == 8);  // K filters
    CHECK(s1.cols() == 6);  // hidden width
    CHECK(s2.rows() == 6);
    CHECK(s2.cols() == 4);  // classes
    for (std::size_t i = 0; i < s1.numel(); ++i)
        CHECK((s1[i] == 1.0 || s1[i] == -1.0));

    Rng rng(4);
    Tensor batch({3, 64});
    for (std::size_t i = 0; i < batch.numel(); ++i) batch[i] = rng.uniform(0.0, 1.0);
    HierModel::Forward f = m.forward(batch);
    CHECK(f.logits.rows() == 3);
    CHECK(f.logits.cols() == 4);
    CHECK(f.summaries.rows() == 3);
    CHECK(f.summaries.cols() == 8);
    CHECK(f.hidden.rows() == 3);
    CHECK(f.hidden.cols() == 6);
    for (std::size_t i = 0; i < f.logits.numel(); ++i) CHECK(std::isfinite(f.logits[i]));
}

TEST_CASE("both hier stages probe clean, corrupted stages are caught") {
    HierModel m = tiny_hier(11);
    ProbeReport rep = probe_monotonicity(m, 600, {1e-3, 0.1, 1.0}, 21);
    CHECK(rep.passed());

    HierModel bad = m;
    bad.stage2().layers[0].sign_mask.at(1, 2) = -1.0;
    ProbeReport caught = probe_monotonicity(bad, 2000, {0.1, 1.0}, 22);
    CHECK(caught.violation_count > 0);

    HierModel bad1 = m;
    bad1.stage1().layers[0].sign_mask.at(0, 0) = -1.0;
    ProbeReport caught1 = probe_monotonicity(bad1, 2000, {0.1, 1.0}, 23);
    CHECK(caught1.violation_count > 0);

    PositivityReport pos = check_weight_positivity(bad);
    CHECK(!pos.passed());
    CHECK(pos.issues[0].where == "stage2");
}

TEST_CASE("composed stage path respects the product of stage signs") {
    // Fixing all other coordinates, pushing hidden feature j in its increasing
    // direction toward class c moves the logit as stage2 sign(j,c) dictates.
    HierModel m = tiny_hier(17);
    Tensor s2 = m.stage2_signs();
    Rng rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        Tensor h({1, m.hidden_width()});
        for (std::size_t i = 0; i < h.numel(); ++i) h[i] = rng.uniform(-1.0, 1.0);
        std::size_t j = rng.uniform_int(m.hidden_width());
        double delta = rng.uniform(1e-3, 1.0);
        Tensor h2 = h;
        h2.at(0, j) += delta;

        Tape tape;
        Tape::NodeId out1 = m.stage2().bind(tape, tape.constant(h), nullptr);
        Tensor y1 = tape.value(out1);
        Tape tape2;
        Tape::NodeId out2 = m.stage2().bind(tape2, tape2.constant(h2), nullptr);
        Tensor y2 = tape2.value(out2);
        for (std::size_t c = 0; c < m.classes(); ++c) {
            double diff = y2.at(0, c) - y1.at(0, c);
            if (std::abs(diff) > 1e-9) CHECK(diff * s2.at(j, c) > 0.0);
        }
    }
}

TEST_CASE("hier serialize round-trip is byte-exact") {
    HierModel m = tiny_hier(23);
    Rng rng(8);
    Tensor batch({4, 64});
    for (std::size_t i = 0; i < batch.numel(); ++i) batch[i] = rng.uniform(0.0, 1.0);
    m.record_ranges(batch);
    REQUIRE(m.has_ranges());

    auto bytes = serialize_model(m);
    CHECK(peek_kind(bytes) == ModelKind::Hierarchical);
    HierModel back = deserialize_hierarchical(bytes);
    CHECK(serialize_model(back) == bytes);

    Tensor a = m.forward(batch).logits;
    Tensor b = back.forward(batch).logits;
    REQUIRE(a.shape() == b.shape());
    CHECK(std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0);

    CHECK_THROWS_AS(deserialize_tabular(bytes), FormatError);
}

TEST_CASE("training a tiny hier model preserves invariants") {
    Rng rng(13);
    Dataset data;
    data.name = "toy-images";
    data.img_h = 8;
    data.img_w = 8;
    data.features = Tensor({40, 64});
    for (std::size_t i = 0; i < 40; ++i) {
        int cls = static_cast<int>(i % 2);
        // Class 1 images are bright overall, class 0 dark. Global max pooling
        // is translation invariant, so the task must hinge on intensity, not
        // position.
        double base = cls == 1 ? 0.85 : 0.15;
        for (std::size_t p = 0; p < 64; ++p)
            data.features.at(i, p) = base + 0.08 * rng.normal();
        data.labels.push_back(cls);
    }

    ConvSpec spec;
    spec.filters = 8;
    spec.kernel_h = 3;
    spec.kernel_w = 3;
    spec.stride = 1;
    // Head width matches the two observed classes: spare heads on a binary
    // task soak up the early descent (suppressing absent classes) and park
    // the bounded hidden units in saturation before discrimination starts.
    HierModel m = HierModel::build(spec, 8, 8, {12, 6}, {10}, 2, 29);
    TrainConfig cfg;
    cfg.epochs = 12;
    cfg.batch_size = 8;
    cfg.learning_rate = 5e-3;
    cfg.loss = "softmax_ce";
    cfg.seed = 1;
    TrainHistory h = train(m, data, cfg);
    CHECK(h.train_acc.back() >= 0.9);
    CHECK(check_weight_positivity(m).passed());
    m.record_ranges(data.features);
    ProbeReport rep = probe_monotonicity(m, 500, {1e-3, 0.1, 1.0}, 2);
    CHECK(rep.passed());
}

TEST_CASE("trace explanation is structurally valid and deterministic") {
    HierModel m = tiny_hier(31);
    Rng rng(10);
    Tensor img = random_image(rng, 8, 8);
    ExplanationTrace trace = trace_explanation(m, img, 5, 2, 1);
    CHECK(trace.sample_id == 5);
    CHECK(trace.true_class == 2);
    CHECK(trace.target_class == 1);
    CHECK(trace.predicted >= 0);
    CHECK(trace.predicted < 4);

    Tensor s2 = m.stage2_signs();
    Tensor s1 = m.stage1_signs();
    if (!trace.degenerate()) {
        double prev = 1e300;
        for (const TraceFeature& f : trace.features) {
            // Only features whose sign toward the target class is positive.
            CHECK(s2.at(f.feature, trace.target_class) == 1.0);
            CHECK(f.sign_toward_class == 1.0);
            CHECK(f.activation <= prev);  // ranked descending
            prev = f.activation;
            for (const TraceFilter& fl : f.filters) {
                CHECK(s1.at(fl.filter, f.feature) == 1.0);
                CHECK(fl.map.numel() > 0);
            }
        }
    }

    ExplanationTrace again = trace_explanation(m, img, 5, 2, 1);
    CHECK(again.to_text() == trace.to_text());
    CHECK(again.features.size() == trace.features.size());

    // Text rendering mentions the target class and stays nonempty.
    std::string text = trace.to_text();
    CHECK(!text.empty());
}

TEST_CASE("degenerate trace is reported, not fabricated") {
    // Force every stage-2 sign toward class 0 negative: beta_0 > 0 with all
    // alpha negative gives sign(alpha_j)*sign(beta_0) = -1 for every feature.
    HierModel m = tiny_hier(37);
    for (std::size_t i = 0; i < m.stage2().alpha.numel(); ++i) {
        m.stage2().alpha[i] = -std::abs(m.stage2().alpha[i]);
    }
    for (std::size_t i = 0; i < m.stage2().beta.numel(); ++i) {
        m.stage2().beta[i] = std::abs(m.stage2().beta[i]);
    }
    Rng rng(11);
    Tensor img = random_image(rng, 8, 8);
    ExplanationTrace trace = trace_explanation(m, img, 0, 0, 0);
    CHECK(trace.degenerate());
    CHECK(trace.features.empty());
    std::string text = trace.to_text();
    CHECK(text.find("no ") != std::string::npos);  // says nothing increases
}

TEST_CASE("activation maps agree with the standalone conv") {
    HierModel m = tiny_hier(41);
    Rng rng(12);
    Tensor img = random_image(rng, 8, 8);
    HierModel::Maps maps = m.activation_maps(img);
    auto want = conv_forward(m.conv(), m.conv_weight(), m.conv_bias(), img, 8, 8);
    REQUIRE(maps.maps.size() == want.size());
    for (std::size_t k = 0; k < want.size(); ++k) {
        for (std::size_t i = 0; i < want[k].numel(); ++i) {
            CHECK(maps.maps[k][i] == doctest::Approx(want[k][i]).epsilon(1e-12));
        }
    }
    auto [vals, locs] = maxpool_summary(want);
    for (std::size_t k = 0; k < vals.size(); ++k) {
        CHECK(maps.summaries[k] == doctest::Approx(vals[k]).epsilon(1e-12));
        CHECK(maps.argmax[k] == locs[k]);
    }
}

TEST_CASE("hier forward matches the composed manual pipeline") {
    // End-to-end oracle: conv -> pool -> stage1 -> stage2 assembled by hand
    // must equal HierModel::forward.
    HierModel m = tiny_hier(43);
    Rng rng(14);
    Tensor img = random_image(rng, 8, 8);

    auto maps = conv_forward(m.conv(), m.conv_weight(), m.conv_bias(), img, 8, 8);
    auto [vals, locs] = maxpool_summary(maps);
    Tensor summaries({1, vals.size()});
    for (std::size_t k = 0; k < vals.size(); ++k) summaries.at(0, k) = vals[k];

    Tape t1;
    Tensor hidden = t1.value(m.stage1().bind(t1, t1.constant(summaries), nullptr));
    Tape t2;
    Tensor logits = t2.value(m.stage2().bind(t2, t2.constant(hidden), nullptr));

    HierModel::Forward f = m.forward(img);
    REQUIRE(f.logits.cols() == logits.cols());
    for (std::size_t c = 0; c < logits.numel(); ++c) {
        CHECK(f.logits[c] == doctest::Approx(logits[c]).epsilon(1e-12));
    }
    for (std::size_t k = 0; k < vals.size(); ++k) {
        CHECK(f.summaries.at(0, k) == doctest::Approx(vals[k]).epsilon(1e-12));
    }
}
