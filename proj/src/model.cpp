#include "mononet/model.hpp"

#include <cmath>
#include <sstream>

namespace mononet {

namespace {

constexpr double kScaleFloor = 1e-6;

Tape::NodeId apply_activation(Tape& tape, Tape::NodeId x, Activation act) {
    switch (act) {
        case Activation::Identity: return x;
        case Activation::Tanh: return tape.tanh(x);
        case Activation::Relu: return tape.relu(x);
        case Activation::Sigmoid: return tape.sigmoid(x);
    }
    throw ContractError("unknown activation");
}

std::vector<std::size_t> split_widths(const std::string& csv) {
    std::vector<std::size_t> widths;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) throw ParseError("spec string: empty width entry in '" + csv + "'");
        std::size_t pos = 0;
        long w = 0;
        try {
            w = std::stol(item, &pos);
        } catch (const std::exception&) {
            throw ParseError("spec string: '" + item + "' is not a width");
        }
        if (pos != item.size() || w <= 0) {
            throw ParseError("spec string: '" + item + "' is not a positive width");
        }
        widths.push_back(static_cast<std::size_t>(w));
    }
    if (widths.empty()) throw ParseError("spec string: no widths in '" + csv + "'");
    return widths;
}

} // namespace

Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::Identity;
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    if (s == "sigmoid") return Activation::Sigmoid;
    throw ParseError("unknown activation '" + s + "'");
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
    }
    return "?";
}

void validate_specs(const std::vector<LayerSpec>& specs) {
    // free_dense+ scale monotone_dense+ scale
    enum State { FreeRun, MonoRun, Done };
    State state = FreeRun;
    std::size_t free_count = 0, mono_count = 0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const LayerSpec& s = specs[i];
        const std::string where = "layer " + std::to_string(i);
        if (s.kind != LayerKind::Scale && s.width == 0) {
            throw SpecError(where + ": dense width must be positive");
        }
        switch (state) {
            case FreeRun:
                if (s.kind == LayerKind::FreeDense) {
                    ++free_count;
                } else if (s.kind == LayerKind::Scale) {
                    if (free_count == 0) {
                        throw SpecError(where + ": scale before any free dense layer");
                    }
                    if (s.activation != Activation::Identity) {
                        throw SpecError(where + ": input-side scale takes no activation");
                    }
                    state = MonoRun;
                } else {
                    throw SpecError(where + ": monotone dense before the input-side scale");
                }
                break;
            case MonoRun:
                if (s.kind == LayerKind::MonotoneDense) {
                    ++mono_count;
                } else if (s.kind == LayerKind::Scale) {
                    if (mono_count == 0) {
                        throw SpecError(where + ": two adjacent scale layers");
                    }
                    if (s.activation != Activation::Identity &&
                        s.activation != Activation::Sigmoid) {
                        throw SpecError(where + ": output activation must be identity or sigmoid");
                    }
                    state = Done;
                } else {
                    throw SpecError(where + ": free dense inside the monotone span");
                }
                break;
            case Done:
                throw SpecError(where + ": trailing layer after the output-side scale");
        }
    }
    if (state != Done) {
        throw SpecError("incomplete stack: expected free dense layers, a scale, monotone dense "
                        "layers, and a final scale");
    }
}

Tensor MonotoneBlock::signs() const {
    Tensor s({n_in(), n_out()});
    for (std::size_t i = 0; i < n_in(); ++i) {
        const double si = alpha[i] < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n_out(); ++j) {
            const double sj = beta[j] < 0.0 ? -1.0 : 1.0;
            s.at(i, j) = si * sj;
        }
    }
    return s;
}

Tape::NodeId MonotoneBlock::bind(Tape& tape, Tape::NodeId input,
                                 std::vector<Tape::NodeId>* param_nodes) const {
    auto enter = [&](const Tensor& t) {
        if (param_nodes) {
            Tape::NodeId id = tape.param(t);
            param_nodes->push_back(id);
            return id;
        }
        return tape.constant(t);
    };

    Tape::NodeId a = enter(alpha);
    Tape::NodeId h = tape.mul_rowvec(input, a);
    for (const DenseLayer& layer : layers) {
        Tape::NodeId v = enter(layer.weight);
        Tape::NodeId b = enter(layer.bias);
        Tape::NodeId eff = tape.mul(tape.exp(v), tape.constant(layer.sign_mask));
        h = apply_activation(tape, tape.add_rowvec(tape.matmul(h, eff), b), layer.activation);
    }
    Tape::NodeId be = enter(beta);
    return tape.mul_rowvec(h, be);
}

std::vector<Tensor*> MonotoneBlock::params() {
    std::vector<Tensor*> out;
    out.push_back(&alpha);
    for (DenseLayer& l : layers) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    out.push_back(&beta);
    return out;
}

std::vector<const Tensor*> MonotoneBlock::params() const {
    std::vector<const Tensor*> out;
    out.push_back(&alpha);
    for (const DenseLayer& l : layers) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    out.push_back(&beta);
    return out;
}

void MonotoneBlock::clamp_scales() {
    auto clamp = [](Tensor& t) {
        for (std::size_t i = 0; i < t.numel(); ++i) {
            if (std::fabs(t[i]) < kScaleFloor) {
                t[i] = t[i] < 0.0 ? -kScaleFloor : kScaleFloor;
            }
        }
    };
    clamp(alpha);
    clamp(beta);
}

DenseLayer init_free_dense(std::size_t in, std::size_t out, Activation act, Rng& rng) {
    DenseLayer l;
    l.activation = act;
    l.weight = Tensor({in, out});
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t i = 0; i < l.weight.numel(); ++i) l.weight[i] = rng.uniform(-s, s);
    l.bias = Tensor({out});
    return l;
}

DenseLayer init_monotone_dense(std::size_t in, std::size_t out, Activation act, Rng& rng) {
    DenseLayer l;
    l.activation = act;
    l.weight = Tensor({in, out});
    // Effective weights exp(V) start clustered below 1/fan_in so that row sums
    // stay O(1) and bounded activations do not saturate at any width.
    const double mean = -std::log(static_cast<double>(in)) - 0.5;
    for (std::size_t i = 0; i < l.weight.numel(); ++i) l.weight[i] = rng.normal(mean, 0.3);
    l.bias = Tensor({out});
    l.sign_mask = Tensor::full({in, out}, 1.0);
    return l;
}

Tensor init_scale(std::size_t n, Rng& rng) {
    Tensor t({n});
    for (std::size_t i = 0; i < n; ++i) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        t[i] = sign + 0.01 * rng.normal();
    }
    return t;
}

MonotoneBlock init_monotone_block(std::size_t n_in, const std::vector<std::size_t>& widths,
                                  const std::vector<Activation>& acts, Rng& rng) {
    if (widths.empty() || widths.size() != acts.size()) {
        throw SpecError("monotone block needs at least one layer with matching activations");
    }
    MonotoneBlock block;
    block.alpha = init_scale(n_in, rng);
    std::size_t in = n_in;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        block.layers.push_back(init_monotone_dense(in, widths[i], acts[i], rng));
        in = widths[i];
    }
    block.beta = init_scale(in, rng);
    return block;
}

Model Model::build(const std::vector<LayerSpec>& specs, std::size_t input_dim,
                   std::uint64_t seed) {
    validate_specs(specs);
    if (input_dim == 0) throw SpecError("input dimension must be positive");

    Rng rng(seed);
    Model m;
    m.input_dim_ = input_dim;
    m.specs_ = specs;

    std::size_t in = input_dim;
    std::size_t i = 0;
    for (; specs[i].kind == LayerKind::FreeDense; ++i) {
        m.free_layers_.push_back(init_free_dense(in, specs[i].width, specs[i].activation, rng));
        in = specs[i].width;
    }
    ++i;  // input-side scale
    std::vector<std::size_t> widths;
    std::vector<Activation> acts;
    for (; specs[i].kind == LayerKind::MonotoneDense; ++i) {
        widths.push_back(specs[i].width);
        acts.push_back(specs[i].activation);
    }
    m.output_act_ = specs[i].activation;  // output-side scale
    m.block_ = init_monotone_block(in, widths, acts, rng);
    return m;
}

Model model_from_parts(std::size_t input_dim, std::vector<LayerSpec> specs,
                       std::vector<DenseLayer> free_layers, MonotoneBlock block,
                       Activation output_act) {
    validate_specs(specs);
    Model m;
    m.input_dim_ = input_dim;
    m.specs_ = std::move(specs);
    m.free_layers_ = std::move(free_layers);
    m.block_ = std::move(block);
    m.output_act_ = output_act;
    return m;
}

Model::Bound Model::bind(Tape& tape, const Tensor& x) const {
    if (x.ndim() != 2 || x.cols() != input_dim_) {
        throw DimensionError("model forward: input " + x.shape_str() + " does not match width " +
                             std::to_string(input_dim_));
    }
    Bound out;
    Tape::NodeId h = tape.constant(x);
    for (const DenseLayer& layer : free_layers_) {
        Tape::NodeId w = tape.param(layer.weight);
        out.param_nodes.push_back(w);
        Tape::NodeId b = tape.param(layer.bias);
        out.param_nodes.push_back(b);
        h = apply_activation(tape, tape.add_rowvec(tape.matmul(h, w), b), layer.activation);
    }
    out.interp = h;
    out.logits = block_.bind(tape, h, &out.param_nodes);
    return out;
}

Model::Forward Model::forward(const Tensor& x) const {
    if (x.ndim() != 2 || x.cols() != input_dim_) {
        throw DimensionError("model forward: input " + x.shape_str() + " does not match width " +
                             std::to_string(input_dim_));
    }
    Tape tape;
    Tape::NodeId h = tape.constant(x);
    for (const DenseLayer& layer : free_layers_) {
        Tape::NodeId w = tape.constant(layer.weight);
        Tape::NodeId b = tape.constant(layer.bias);
        h = apply_activation(tape, tape.add_rowvec(tape.matmul(h, w), b), layer.activation);
    }
    Forward f;
    f.interp = tape.value(h);
    f.logits = tape.value(block_.bind(tape, h, nullptr));
    return f;
}

Tensor Model::forward_from_interp(const Tensor& h) const {
    if (h.ndim() != 2 || h.cols() != block_.n_in()) {
        throw DimensionError("forward_from_interp: input " + h.shape_str() +
                             " does not match interpretable width " +
                             std::to_string(block_.n_in()));
    }
    Tape tape;
    return tape.value(block_.bind(tape, tape.constant(h), nullptr));
}

Tensor Model::predict_proba(const Tensor& x) const {
    Tensor logits = forward(x).logits;
    Tape tape;
    return tape.value(tape.sigmoid(tape.constant(logits)));
}

std::vector<Tensor*> Model::params() {
    std::vector<Tensor*> out;
    for (DenseLayer& l : free_layers_) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    for (Tensor* t : block_.params()) out.push_back(t);
    return out;
}

std::vector<const Tensor*> Model::params() const {
    std::vector<const Tensor*> out;
    for (const DenseLayer& l : free_layers_) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    for (const Tensor* t : static_cast<const MonotoneBlock&>(block_).params()) out.push_back(t);
    return out;
}

void Model::set_interp_range(Tensor lo, Tensor hi) {
    if (lo.numel() != block_.n_in() || hi.numel() != block_.n_in()) {
        throw DimensionError("interpretable range width mismatch");
    }
    interp_lo_ = std::move(lo);
    interp_hi_ = std::move(hi);
}

void Model::record_interp_range(const Tensor& x) {
    Tensor h = forward(x).interp;
    Tensor lo({block_.n_in()}), hi({block_.n_in()});
    for (std::size_t j = 0; j < h.cols(); ++j) {
        double mn = h.at(0, j), mx = h.at(0, j);
        for (std::size_t i = 1; i < h.rows(); ++i) {
            mn = std::min(mn, h.at(i, j));
            mx = std::max(mx, h.at(i, j));
        }
        lo[j] = mn;
        hi[j] = mx;
    }
    set_interp_range(std::move(lo), std::move(hi));
}

std::vector<LayerSpec> parse_spec_string(const std::string& csv, std::size_t n_out,
                                         int interp_index) {
    std::vector<std::size_t> widths = split_widths(csv);
    if (widths.size() < 2) {
        throw ParseError("spec string needs at least an interpretable and one monotone width");
    }
    const std::size_t k = interp_index >= 0 ? static_cast<std::size_t>(interp_index)
                                            : widths.size() - 2;
    if (k >= widths.size()) {
        throw ParseError("interpretable index " + std::to_string(interp_index) +
                         " out of range for " + std::to_string(widths.size()) + " widths");
    }

    std::vector<LayerSpec> specs;
    for (std::size_t i = 0; i < k; ++i) {
        specs.push_back({LayerKind::FreeDense, widths[i], Activation::Relu});
    }
    // The interpretable layer itself: bounded activation keeps unit
    // activations in a comparable, probe-friendly range.
    specs.push_back({LayerKind::FreeDense, widths[k], Activation::Tanh});
    specs.push_back({LayerKind::Scale, 0, Activation::Identity});
    for (std::size_t i = k + 1; i < widths.size(); ++i) {
        specs.push_back({LayerKind::MonotoneDense, widths[i], Activation::Tanh});
    }
    specs.push_back({LayerKind::MonotoneDense, n_out, Activation::Identity});
    specs.push_back({LayerKind::Scale, 0, Activation::Identity});
    return specs;
}

} // namespace mononet
