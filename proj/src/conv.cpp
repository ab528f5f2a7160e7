#include "mononet/conv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mononet {

namespace {

Tape::NodeId apply_activation(Tape& tape, Tape::NodeId x, Activation act) {
    switch (act) {
        case Activation::Identity: return x;
        case Activation::Tanh: return tape.tanh(x);
        case Activation::Relu: return tape.relu(x);
        case Activation::Sigmoid: return tape.sigmoid(x);
    }
    throw ContractError("unknown activation");
}

Tensor range_lo(const Tensor& m) {
    Tensor lo({m.cols()});
    for (std::size_t c = 0; c < m.cols(); ++c) {
        double v = m.at(0, c);
        for (std::size_t r = 1; r < m.rows(); ++r) v = std::min(v, m.at(r, c));
        lo[c] = v;
    }
    return lo;
}

Tensor range_hi(const Tensor& m) {
    Tensor hi({m.cols()});
    for (std::size_t c = 0; c < m.cols(); ++c) {
        double v = m.at(0, c);
        for (std::size_t r = 1; r < m.rows(); ++r) v = std::max(v, m.at(r, c));
        hi[c] = v;
    }
    return hi;
}

} // namespace

HierModel HierModel::build(const ConvSpec& conv, std::size_t img_h, std::size_t img_w,
                           const std::vector<std::size_t>& stage1_widths,
                           const std::vector<std::size_t>& stage2_widths, std::size_t classes,
                           std::uint64_t seed) {
    if (conv.filters == 0) throw SpecError("conv: needs at least one filter");
    if (conv.kernel_h == 0 || conv.kernel_w == 0 || conv.stride == 0) {
        throw SpecError("conv: kernel and stride must be positive");
    }
    if (conv.kernel_h > img_h || conv.kernel_w > img_w) {
        throw SpecError("conv: kernel does not fit the image");
    }
    if (stage1_widths.empty()) throw SpecError("hierarchical model: stage-1 widths empty");
    if (classes < 2) throw SpecError("hierarchical model: needs >= 2 classes");

    Rng rng(seed);
    HierModel m;
    m.conv_ = conv;
    m.img_h_ = img_h;
    m.img_w_ = img_w;

    const std::size_t fan_in = conv.kernel_h * conv.kernel_w;
    m.conv_w_ = Tensor({fan_in, conv.filters});
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < m.conv_w_.numel(); ++i) m.conv_w_[i] = rng.uniform(-s, s);
    m.conv_b_ = Tensor({conv.filters});

    std::vector<Activation> acts1(stage1_widths.size(), Activation::Tanh);
    m.stage1_ = init_monotone_block(conv.filters, stage1_widths, acts1, rng);

    std::vector<std::size_t> widths2 = stage2_widths;
    widths2.push_back(classes);
    std::vector<Activation> acts2(widths2.size(), Activation::Tanh);
    acts2.back() = Activation::Identity;
    m.stage2_ = init_monotone_block(stage1_widths.back(), widths2, acts2, rng);
    return m;
}

HierModel HierModel::from_parts(ConvSpec conv, std::size_t img_h, std::size_t img_w, Tensor conv_w,
                                Tensor conv_b, MonotoneBlock stage1, MonotoneBlock stage2) {
    HierModel m;
    m.conv_ = conv;
    m.img_h_ = img_h;
    m.img_w_ = img_w;
    m.conv_w_ = std::move(conv_w);
    m.conv_b_ = std::move(conv_b);
    m.stage1_ = std::move(stage1);
    m.stage2_ = std::move(stage2);
    if (m.conv_w_.ndim() != 2 || m.conv_w_.rows() != conv.kernel_h * conv.kernel_w ||
        m.conv_w_.cols() != conv.filters || m.conv_b_.numel() != conv.filters) {
        throw SpecError("hierarchical model: conv parameter shapes do not match the declared "
                        "kernel geometry");
    }
    if (m.stage1_.n_in() != conv.filters) {
        throw SpecError("hierarchical model: stage-1 input width must equal filter count");
    }
    if (m.stage2_.n_in() != m.stage1_.n_out()) {
        throw SpecError("hierarchical model: stage widths do not chain");
    }
    return m;
}

HierModel::Bound HierModel::bind(Tape& tape, const Tensor& images) const {
    if (images.ndim() != 2 || images.cols() != img_h_ * img_w_) {
        throw DimensionError("hierarchical forward: images " + images.shape_str() +
                             " do not match " + std::to_string(img_h_) + "x" +
                             std::to_string(img_w_));
    }
    Bound out;
    Im2colGeom geom(images.rows(), img_h_, img_w_, conv_.kernel_h, conv_.kernel_w, conv_.stride);
    Tape::NodeId cols = tape.im2col(tape.constant(images), geom);
    Tape::NodeId w = tape.param(conv_w_);
    out.param_nodes.push_back(w);
    Tape::NodeId b = tape.param(conv_b_);
    out.param_nodes.push_back(b);
    Tape::NodeId act = apply_activation(tape, tape.add_rowvec(tape.matmul(cols, w), b),
                                        conv_.activation);
    out.summaries = tape.maxpool_rows(act, geom.positions());
    out.hidden = stage1_.bind(tape, out.summaries, &out.param_nodes);
    out.logits = stage2_.bind(tape, out.hidden, &out.param_nodes);
    return out;
}

HierModel::Forward HierModel::forward(const Tensor& images) const {
    if (images.ndim() != 2 || images.cols() != img_h_ * img_w_) {
        throw DimensionError("hierarchical forward: images " + images.shape_str() +
                             " do not match " + std::to_string(img_h_) + "x" +
                             std::to_string(img_w_));
    }
    Tape tape;
    Im2colGeom geom(images.rows(), img_h_, img_w_, conv_.kernel_h, conv_.kernel_w, conv_.stride);
    Tape::NodeId cols = tape.im2col(tape.constant(images), geom);
    Tape::NodeId act = apply_activation(
        tape, tape.add_rowvec(tape.matmul(cols, tape.constant(conv_w_)), tape.constant(conv_b_)),
        conv_.activation);
    Tape::NodeId summaries = tape.maxpool_rows(act, geom.positions());
    Tape::NodeId hidden = stage1_.bind(tape, summaries, nullptr);
    Tape::NodeId logits = stage2_.bind(tape, hidden, nullptr);
    Forward f;
    f.summaries = tape.value(summaries);
    f.hidden = tape.value(hidden);
    f.logits = tape.value(logits);
    return f;
}

std::vector<Tensor*> HierModel::params() {
    std::vector<Tensor*> out;
    out.push_back(&conv_w_);
    out.push_back(&conv_b_);
    for (Tensor* t : stage1_.params()) out.push_back(t);
    for (Tensor* t : stage2_.params()) out.push_back(t);
    return out;
}

void HierModel::clamp_scales() {
    stage1_.clamp_scales();
    stage2_.clamp_scales();
}

HierModel::Maps HierModel::activation_maps(const Tensor& image) const {
    Tensor img = image;
    if (img.ndim() == 1) img = Tensor({1, image.numel()}, image.values());
    if (img.ndim() != 2 || img.rows() != 1 || img.cols() != img_h_ * img_w_) {
        throw DimensionError("activation_maps: expected a single image");
    }
    std::vector<Tensor> maps = conv_forward(conv_, conv_w_, conv_b_, img, img_h_, img_w_);
    Maps out;
    auto [summaries, locations] = maxpool_summary(maps);
    out.maps = std::move(maps);
    out.summaries = std::move(summaries);
    out.argmax = std::move(locations);
    return out;
}

void HierModel::set_ranges(Tensor slo, Tensor shi, Tensor hlo, Tensor hhi) {
    if (slo.numel() != conv_.filters || shi.numel() != conv_.filters ||
        hlo.numel() != stage2_.n_in() || hhi.numel() != stage2_.n_in()) {
        throw DimensionError("hierarchical ranges: width mismatch");
    }
    summary_lo_ = std::move(slo);
    summary_hi_ = std::move(shi);
    hidden_lo_ = std::move(hlo);
    hidden_hi_ = std::move(hhi);
}

void HierModel::record_ranges(const Tensor& images) {
    Forward f = forward(images);
    set_ranges(range_lo(f.summaries), range_hi(f.summaries), range_lo(f.hidden),
               range_hi(f.hidden));
}

std::vector<Tensor> conv_forward(const ConvSpec& spec, const Tensor& weight, const Tensor& bias,
                                 const Tensor& image, std::size_t img_h, std::size_t img_w) {
    if (weight.ndim() != 2 || weight.rows() != spec.kernel_h * spec.kernel_w ||
        weight.cols() != spec.filters || bias.numel() != spec.filters) {
        throw DimensionError("conv_forward: parameter shapes do not match the declared "
                             "kernel geometry");
    }
    Tensor img = image;
    if (img.ndim() == 1) img = Tensor({1, image.numel()}, image.values());
    if (img.rows() != 1 || img.cols() != img_h * img_w) {
        throw DimensionError("conv_forward: expected one image of " + std::to_string(img_h) + "x" +
                             std::to_string(img_w) + " pixels");
    }
    Tape tape;
    Im2colGeom geom(1, img_h, img_w, spec.kernel_h, spec.kernel_w, spec.stride);
    Tape::NodeId cols = tape.im2col(tape.constant(img), geom);
    Tape::NodeId act = apply_activation(
        tape, tape.add_rowvec(tape.matmul(cols, tape.constant(weight)), tape.constant(bias)),
        spec.activation);
    const Tensor& flat = tape.value(act);  // [P x K]
    std::vector<Tensor> maps;
    maps.reserve(spec.filters);
    for (std::size_t k = 0; k < spec.filters; ++k) {
        Tensor map({geom.out_h, geom.out_w});
        for (std::size_t p = 0; p < geom.positions(); ++p) map[p] = flat.at(p, k);
        maps.push_back(std::move(map));
    }
    return maps;
}

std::pair<std::vector<double>, std::vector<std::pair<std::size_t, std::size_t>>> maxpool_summary(
    const std::vector<Tensor>& maps) {
    if (maps.empty()) throw ContractError("maxpool_summary: no maps");
    std::vector<double> summaries;
    std::vector<std::pair<std::size_t, std::size_t>> locations;
    for (const Tensor& map : maps) {
        double best = map[0];
        std::size_t best_flat = 0;
        for (std::size_t i = 1; i < map.numel(); ++i) {
            if (map[i] > best) {
                best = map[i];
                best_flat = i;
            }
        }
        summaries.push_back(best);
        locations.emplace_back(best_flat / map.cols(), best_flat % map.cols());
    }
    return {summaries, locations};
}

ExplanationTrace trace_explanation(const HierModel& model, const Tensor& image,
                                   std::size_t sample_id, int true_class,
                                   std::size_t target_class) {
    if (target_class >= model.classes()) {
        throw ContractError("trace: target class " + std::to_string(target_class) +
                            " out of range for " + std::to_string(model.classes()) + " classes");
    }
    Tensor img = image;
    if (img.ndim() == 1) img = Tensor({1, image.numel()}, image.values());

    HierModel::Forward f = model.forward(img);
    ExplanationTrace trace;
    trace.sample_id = sample_id;
    trace.true_class = true_class;
    trace.target_class = target_class;
    {
        std::size_t best = 0;
        for (std::size_t j = 1; j < f.logits.cols(); ++j) {
            if (f.logits[j] > f.logits[best]) best = j;
        }
        trace.predicted = static_cast<int>(best);
    }

    const Tensor s2 = model.stage2_signs();  // [F x C]
    const Tensor s1 = model.stage1_signs();  // [K x F]
    HierModel::Maps maps = model.activation_maps(img);

    std::vector<std::size_t> features;
    for (std::size_t ft = 0; ft < model.hidden_width(); ++ft) {
        if (s2.at(ft, target_class) > 0.0) features.push_back(ft);
    }
    std::stable_sort(features.begin(), features.end(), [&](std::size_t a, std::size_t b) {
        return f.hidden[a] > f.hidden[b];
    });

    for (std::size_t ft : features) {
        TraceFeature tf;
        tf.feature = ft;
        tf.activation = f.hidden[ft];
        tf.sign_toward_class = s2.at(ft, target_class);
        std::vector<std::size_t> filters;
        for (std::size_t k = 0; k < model.conv().filters; ++k) {
            if (s1.at(k, ft) > 0.0) filters.push_back(k);
        }
        std::stable_sort(filters.begin(), filters.end(), [&](std::size_t a, std::size_t b) {
            return maps.summaries[a] > maps.summaries[b];
        });
        for (std::size_t k : filters) {
            TraceFilter tfl;
            tfl.filter = k;
            tfl.summary = maps.summaries[k];
            tfl.argmax = maps.argmax[k];
            tfl.map = maps.maps[k];
            tf.filters.push_back(std::move(tfl));
        }
        trace.features.push_back(std::move(tf));
    }
    return trace;
}

std::string ExplanationTrace::to_text() const {
    std::ostringstream os;
    os << "sample " << sample_id << ": true class " << true_class << ", predicted " << predicted
       << "\n";
    os << "features monotonically increasing toward class " << target_class << ":\n";
    if (degenerate()) {
        os << "  (none - no hidden feature increases this class's logit)\n";
        return os.str();
    }
    for (const TraceFeature& ft : features) {
        os << "  feature " << ft.feature << " (activation " << ft.activation << ")\n";
        for (const TraceFilter& fl : ft.filters) {
            os << "    filter " << fl.filter << " summary " << fl.summary << " peak at ("
               << fl.argmax.first << "," << fl.argmax.second << ")\n";
        }
    }
    return os.str();
}

void write_pgm(const Tensor& map, const std::string& path) {
    if (map.ndim() != 2) throw DimensionError("write_pgm: map must be 2-D");
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    double lo = map[0], hi = map[0];
    for (std::size_t i = 1; i < map.numel(); ++i) {
        lo = std::min(lo, map[i]);
        hi = std::max(hi, map[i]);
    }
    const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
    out << "P2\n" << map.cols() << ' ' << map.rows() << "\n255\n";
    for (std::size_t r = 0; r < map.rows(); ++r) {
        for (std::size_t c = 0; c < map.cols(); ++c) {
            const int v = static_cast<int>(std::lround((map.at(r, c) - lo) * scale));
            out << v << (c + 1 == map.cols() ? '\n' : ' ');
        }
    }
    if (!out) throw FormatError("short write to " + path);
}

} // namespace mononet
