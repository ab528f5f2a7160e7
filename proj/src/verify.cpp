#include "mononet/verify.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "mononet/rng.hpp"
#include "mononet/tape.hpp"

namespace mononet {

namespace {

constexpr std::size_t kMaxStoredViolations = 256;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

void merge_reports(ProbeReport& into, const ProbeReport& from) {
    into.probes_run += from.probes_run;
    into.violation_count += from.violation_count;
    into.max_violation_magnitude =
        std::max(into.max_violation_magnitude, from.max_violation_magnitude);
    for (const Violation& v : from.violations) {
        if (into.violations.size() >= kMaxStoredViolations) break;
        into.violations.push_back(v);
    }
}

// The input box a layer's own activation hands to its successor.
void activation_box(Activation act, std::size_t n, Tensor& lo, Tensor& hi) {
    double a = -3.0, b = 3.0;  // identity: probe a generous bounded window
    switch (act) {
        case Activation::Tanh: a = -1.0; b = 1.0; break;
        case Activation::Sigmoid: a = 0.0; b = 1.0; break;
        case Activation::Relu: a = 0.0; b = 3.0; break;
        case Activation::Identity: break;
    }
    lo = Tensor::full({n}, a);
    hi = Tensor::full({n}, b);
}

// Probes every dense layer of `block` as its own single-layer sub-block.
// A healthy layer is coordinate-wise non-decreasing at every point, so one
// negated effective weight flips a partial derivative's sign everywhere and
// any probe that bumps the affected coordinate witnesses it. The full
// composition cannot promise that: when many healthy channels share a
// coordinate they can outvote a single corrupted one, leaving the end-to-end
// map monotone and the tampering invisible to end-to-end probes alone.
ProbeReport probe_each_layer(const MonotoneBlock& block, const Tensor& lo, const Tensor& hi,
                             std::size_t n_probes, const std::vector<double>& deltas,
                             std::uint64_t seed, const std::string& stage_prefix) {
    ProbeReport merged;
    merged.deltas = deltas;
    for (std::size_t l = 0; l < block.layers.size(); ++l) {
        MonotoneBlock sub;
        sub.layers.push_back(block.layers[l]);
        sub.beta = Tensor::full({block.layers[l].out_width()}, 1.0);
        Tensor sub_lo, sub_hi;
        if (l == 0) {
            // First layer sees the scaled interpretable box.
            sub.alpha = block.alpha;
            sub_lo = lo;
            sub_hi = hi;
        } else {
            sub.alpha = Tensor::full({block.layers[l].in_width()}, 1.0);
            activation_box(block.layers[l - 1].activation, block.layers[l].in_width(),
                           sub_lo, sub_hi);
        }
        ProbeReport rep = probe_block(sub, sub_lo, sub_hi, n_probes, deltas,
                                      mix_seed(seed, 0xb10c + l), 1e-9,
                                      stage_prefix + "-layer" + std::to_string(l));
        merge_reports(merged, rep);
    }
    return merged;
}

} // namespace

ProbeReport probe_block(const MonotoneBlock& block, const Tensor& lo, const Tensor& hi,
                        std::size_t n_probes, const std::vector<double>& deltas,
                        std::uint64_t seed, double tolerance, const std::string& stage) {
    if (n_probes < 1) throw ContractError("probe: n_probes must be >= 1");
    if (deltas.empty()) throw ContractError("probe: need at least one delta");
    for (double d : deltas) {
        if (!(d > 0.0)) throw ContractError("probe: deltas must be positive");
    }
    const std::size_t m = block.n_in();
    if (lo.numel() != m || hi.numel() != m) {
        throw DimensionError("probe: range width does not match the block input");
    }

    ProbeReport report;
    report.deltas = deltas;
    report.tolerance = tolerance;
    report.probes_run = n_probes;

    // Sample all probe points (per-probe independent streams).
    Tensor points({n_probes, m});
    std::vector<std::size_t> coords(n_probes);
    for (std::size_t p = 0; p < n_probes; ++p) {
        Rng rng(mix_seed(seed, p));
        for (std::size_t i = 0; i < m; ++i) {
            points.at(p, i) = rng.uniform(lo[i], hi[i]);
        }
        coords[p] = static_cast<std::size_t>(rng.uniform_int(m));
    }

    const Tensor signs = block.signs();
    Tensor base;
    {
        Tape tape;
        base = tape.value(block.bind(tape, tape.constant(points), nullptr));
    }

    for (double delta : deltas) {
        Tensor bumped = points;
        for (std::size_t p = 0; p < n_probes; ++p) bumped.at(p, coords[p]) += delta;
        Tensor out;
        {
            Tape tape;
            out = tape.value(block.bind(tape, tape.constant(bumped), nullptr));
        }
        for (std::size_t p = 0; p < n_probes; ++p) {
            for (std::size_t j = 0; j < block.n_out(); ++j) {
                const double diff = out.at(p, j) - base.at(p, j);
                const double expected = signs.at(coords[p], j);
                const double directed = diff * expected;
                if (directed < -tolerance) {
                    ++report.violation_count;
                    report.max_violation_magnitude =
                        std::max(report.max_violation_magnitude, -directed);
                    if (report.violations.size() < kMaxStoredViolations) {
                        Violation v;
                        v.stage = stage;
                        v.probe = p;
                        v.coord = coords[p];
                        v.output = j;
                        v.delta = delta;
                        v.observed_diff = diff;
                        v.expected_sign = expected;
                        v.point.resize(m);
                        for (std::size_t i = 0; i < m; ++i) v.point[i] = points.at(p, i);
                        report.violations.push_back(std::move(v));
                    }
                }
            }
        }
    }
    return report;
}

ProbeReport probe_monotonicity(const Model& model, std::size_t n_probes,
                               const std::vector<double>& deltas, std::uint64_t seed) {
    const std::size_t m = model.interp_width();
    Tensor lo, hi;
    if (model.has_interp_range()) {
        lo = model.interp_lo();
        hi = model.interp_hi();
    } else {
        lo = Tensor::full({m}, -1.0);
        hi = Tensor::full({m}, 1.0);
    }
    ProbeReport report = probe_block(model.block(), lo, hi, n_probes, deltas, seed);
    ProbeReport layers = probe_each_layer(model.block(), lo, hi, n_probes, deltas,
                                          seed, "monotone");
    merge_reports(report, layers);
    return report;
}

ProbeReport probe_monotonicity(const HierModel& model, std::size_t n_probes,
                               const std::vector<double>& deltas, std::uint64_t seed) {
    Tensor slo, shi, hlo, hhi;
    if (model.has_ranges()) {
        slo = model.summary_lo();
        shi = model.summary_hi();
        hlo = model.hidden_lo();
        hhi = model.hidden_hi();
    } else {
        slo = Tensor::full({model.conv().filters}, -1.0);
        shi = Tensor::full({model.conv().filters}, 1.0);
        hlo = Tensor::full({model.hidden_width()}, -1.0);
        hhi = Tensor::full({model.hidden_width()}, 1.0);
    }
    ProbeReport report = probe_block(model.stage1(), slo, shi, n_probes, deltas, seed, 1e-9,
                                     "stage1");
    ProbeReport second = probe_block(model.stage2(), hlo, hhi, n_probes, deltas,
                                     mix_seed(seed, 0x51a9e2), 1e-9, "stage2");
    merge_reports(report, second);
    merge_reports(report, probe_each_layer(model.stage1(), slo, shi, n_probes, deltas,
                                           mix_seed(seed, 0x57a6e1), "stage1"));
    merge_reports(report, probe_each_layer(model.stage2(), hlo, hhi, n_probes, deltas,
                                           mix_seed(seed, 0x57a6e2), "stage2"));
    report.deltas = deltas;
    return report;
}

PositivityReport check_weight_positivity(const MonotoneBlock& block, const std::string& where) {
    PositivityReport report;
    for (std::size_t l = 0; l < block.layers.size(); ++l) {
        const DenseLayer& layer = block.layers[l];
        for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
            for (std::size_t c = 0; c < layer.weight.cols(); ++c) {
                ++report.entries_checked;
                const double eff =
                    layer.sign_mask.at(r, c) * std::exp(layer.weight.at(r, c));
                if (!(eff > 0.0) || !std::isfinite(eff)) {
                    report.issues.push_back({where, l, r, c, eff});
                }
            }
        }
    }
    return report;
}

PositivityReport check_weight_positivity(const Model& model) {
    return check_weight_positivity(model.block());
}

PositivityReport check_weight_positivity(const HierModel& model) {
    PositivityReport report = check_weight_positivity(model.stage1(), "stage1");
    PositivityReport second = check_weight_positivity(model.stage2(), "stage2");
    report.entries_checked += second.entries_checked;
    for (const PositivityIssue& i : second.issues) report.issues.push_back(i);
    return report;
}

namespace {

// Pre-activation values of every relu free layer, for the kink guard.
std::vector<double> relu_preactivations(const Model& model, const Tensor& x) {
    std::vector<double> out;
    Tape tape;
    Tape::NodeId h = tape.constant(x);
    for (const DenseLayer& layer : model.free_layers()) {
        Tape::NodeId pre =
            tape.add_rowvec(tape.matmul(h, tape.constant(layer.weight)), tape.constant(layer.bias));
        if (layer.activation == Activation::Relu) {
            const Tensor& v = tape.value(pre);
            for (std::size_t i = 0; i < v.numel(); ++i) out.push_back(v[i]);
            h = tape.relu(pre);
        } else {
            switch (layer.activation) {
                case Activation::Identity: h = pre; break;
                case Activation::Tanh: h = tape.tanh(pre); break;
                case Activation::Sigmoid: h = tape.sigmoid(pre); break;
                default: h = pre; break;
            }
        }
    }
    return out;
}

double loss_at(const Model& model, const Tensor& x, const std::vector<int>& labels,
               bool multiclass) {
    Tape tape;
    Model::Bound bound = model.bind(tape, x);
    Tape::NodeId loss = multiclass ? tape.softmax_cross_entropy(bound.logits, labels)
                                   : tape.bce_with_logits(bound.logits, labels);
    return tape.value(loss)[0];
}

} // namespace

double gradient_check(const Model& model, std::size_t n_points, std::uint64_t seed) {
    if (n_points < 1) throw ContractError("gradient_check: n_points must be >= 1");
    const double h = 1e-5;
    const bool multiclass = model.output_width() > 1;
    Rng rng(seed);
    double worst = 0.0;

    for (std::size_t pt = 0; pt < n_points; ++pt) {
        // Draw a point whose relu pre-activations are all clear of the kink:
        // the jump in the subgradient there is expected, not an error.
        Tensor x({1, model.input_dim()});
        bool ok = false;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-1.0, 1.0);
            ok = true;
            for (double v : relu_preactivations(model, x)) {
                if (std::fabs(v) < 10.0 * h) {
                    ok = false;
                    break;
                }
            }
        }
        std::vector<int> labels{
            multiclass ? static_cast<int>(rng.uniform_int(model.output_width()))
                       : static_cast<int>(rng.uniform_int(2))};

        Tape tape;
        Model::Bound bound = model.bind(tape, x);
        Tape::NodeId loss = multiclass ? tape.softmax_cross_entropy(bound.logits, labels)
                                       : tape.bce_with_logits(bound.logits, labels);
        Tape::Gradients grads = tape.gradients(loss);

        Model probe = model;
        std::vector<Tensor*> params = probe.params();
        for (std::size_t p = 0; p < params.size(); ++p) {
            Tensor& w = *params[p];
            for (std::size_t i = 0; i < w.numel(); ++i) {
                const double keep = w[i];
                w[i] = keep + h;
                const double up = loss_at(probe, x, labels, multiclass);
                w[i] = keep - h;
                const double down = loss_at(probe, x, labels, multiclass);
                w[i] = keep;
                const double fd = (up - down) / (2.0 * h);
                const double a = grads.grads[p][i];
                const double rel = std::fabs(a - fd) / std::max(1e-6, std::fabs(a) + std::fabs(fd));
                worst = std::max(worst, rel);
            }
        }
    }
    return worst;
}

std::string ProbeReport::to_json() const {
    nlohmann::json j;
    j["probes_run"] = probes_run;
    j["deltas"] = deltas;
    j["tolerance"] = tolerance;
    j["violation_count"] = violation_count;
    j["max_violation_magnitude"] = max_violation_magnitude;
    j["passed"] = passed();
    nlohmann::json vs = nlohmann::json::array();
    for (const Violation& v : violations) {
        nlohmann::json jv;
        jv["stage"] = v.stage;
        jv["probe"] = v.probe;
        jv["coord"] = v.coord;
        jv["output"] = v.output;
        jv["delta"] = v.delta;
        jv["observed_diff"] = v.observed_diff;
        jv["expected_sign"] = v.expected_sign;
        jv["point"] = v.point;
        vs.push_back(jv);
    }
    j["violations"] = vs;
    return j.dump(2);
}

std::string PositivityReport::to_json() const {
    nlohmann::json j;
    j["entries_checked"] = entries_checked;
    j["passed"] = passed();
    nlohmann::json is = nlohmann::json::array();
    for (const PositivityIssue& i : issues) {
        nlohmann::json ji;
        ji["where"] = i.where;
        ji["layer"] = i.layer;
        ji["row"] = i.row;
        ji["col"] = i.col;
        ji["value"] = i.value;
        is.push_back(ji);
    }
    j["issues"] = is;
    return j.dump(2);
}

} // namespace mononet
