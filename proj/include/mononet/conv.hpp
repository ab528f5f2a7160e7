#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mononet/model.hpp"
#include "mononet/tape.hpp"
#include "mononet/tensor.hpp"

namespace mononet {

struct ConvSpec {
    std::size_t filters = 16;
    std::size_t kernel_h = 9;
    std::size_t kernel_w = 9;
    std::size_t stride = 2;
    Activation activation = Activation::Relu;
};

// Hierarchical monotone model over images: an unconstrained conv layer whose
// per-filter global max-pool summaries feed two stacked monotone blocks —
// summaries -> hidden features, then hidden features -> class logits. Each
// block carries its own scales, so monotonicity statements hold between
// directly connected stages only.
class HierModel {
public:
    HierModel() = default;

    // stage1_widths ends in the hidden feature width; stage2_widths are the
    // widths before the class layer (appended automatically).
    static HierModel build(const ConvSpec& conv, std::size_t img_h, std::size_t img_w,
                           const std::vector<std::size_t>& stage1_widths,
                           const std::vector<std::size_t>& stage2_widths, std::size_t classes,
                           std::uint64_t seed);

    struct Forward {
        Tensor logits;     // [B x classes]
        Tensor summaries;  // [B x K] max-pool summaries (stage-1 inputs)
        Tensor hidden;     // [B x F] hidden interpretable features (stage-2 inputs)
    };
    Forward forward(const Tensor& images) const;

    struct Bound {
        std::vector<Tape::NodeId> param_nodes;
        Tape::NodeId summaries = -1;
        Tape::NodeId hidden = -1;
        Tape::NodeId logits = -1;
    };
    Bound bind(Tape& tape, const Tensor& images) const;

    std::vector<Tensor*> params();
    void clamp_scales();

    // Per-filter activation maps of a single image plus the max locations and
    // summary values used by the pooling stage.
    struct Maps {
        std::vector<Tensor> maps;                            // K maps [out_h x out_w]
        std::vector<std::pair<std::size_t, std::size_t>> argmax;  // (row, col), earliest on ties
        std::vector<double> summaries;
    };
    Maps activation_maps(const Tensor& image) const;  // image: [1 x H*W] or [H*W]

    Tensor stage1_signs() const { return stage1_.signs(); }
    Tensor stage2_signs() const { return stage2_.signs(); }

    const ConvSpec& conv() const { return conv_; }
    std::size_t img_h() const { return img_h_; }
    std::size_t img_w() const { return img_w_; }
    std::size_t classes() const { return stage2_.n_out(); }
    std::size_t hidden_width() const { return stage2_.n_in(); }

    const Tensor& conv_weight() const { return conv_w_; }
    Tensor& conv_weight() { return conv_w_; }
    const Tensor& conv_bias() const { return conv_b_; }
    Tensor& conv_bias() { return conv_b_; }
    const MonotoneBlock& stage1() const { return stage1_; }
    MonotoneBlock& stage1() { return stage1_; }
    const MonotoneBlock& stage2() const { return stage2_; }
    MonotoneBlock& stage2() { return stage2_; }

    bool has_ranges() const { return summary_lo_.numel() > 0; }
    const Tensor& summary_lo() const { return summary_lo_; }
    const Tensor& summary_hi() const { return summary_hi_; }
    const Tensor& hidden_lo() const { return hidden_lo_; }
    const Tensor& hidden_hi() const { return hidden_hi_; }
    void set_ranges(Tensor slo, Tensor shi, Tensor hlo, Tensor hhi);
    // Records observed per-unit ranges of summaries and hidden features.
    void record_ranges(const Tensor& images);

    static HierModel from_parts(ConvSpec conv, std::size_t img_h, std::size_t img_w,
                                Tensor conv_w, Tensor conv_b, MonotoneBlock stage1,
                                MonotoneBlock stage2);

private:
    ConvSpec conv_;
    std::size_t img_h_ = 0, img_w_ = 0;
    Tensor conv_w_;  // [kh*kw x K]
    Tensor conv_b_;  // [K]
    MonotoneBlock stage1_;
    MonotoneBlock stage2_;
    Tensor summary_lo_, summary_hi_, hidden_lo_, hidden_hi_;
};

// Filter-level entry of an explanation chain.
struct TraceFilter {
    std::size_t filter = 0;
    double summary = 0.0;
    std::pair<std::size_t, std::size_t> argmax{0, 0};
    Tensor map;  // [out_h x out_w]
};

// Hidden-feature entry: the filters listed are those monotonically increasing
// toward this feature.
struct TraceFeature {
    std::size_t feature = 0;
    double activation = 0.0;
    double sign_toward_class = 1.0;
    std::vector<TraceFilter> filters;
};

struct ExplanationTrace {
    std::size_t sample_id = 0;
    int predicted = -1;
    int true_class = -1;
    std::size_t target_class = 0;
    // Hidden features monotonically increasing toward the target class,
    // ranked by activation (descending). Empty iff degenerate.
    std::vector<TraceFeature> features;
    bool degenerate() const { return features.empty(); }
    std::string to_text() const;
};

ExplanationTrace trace_explanation(const HierModel& model, const Tensor& image,
                                   std::size_t sample_id, int true_class,
                                   std::size_t target_class);

// Standalone conv utilities (also the oracle surface for tests).
// Returns K activation maps, each [out_h x out_w].
std::vector<Tensor> conv_forward(const ConvSpec& spec, const Tensor& weight, const Tensor& bias,
                                 const Tensor& image, std::size_t img_h, std::size_t img_w);
// Global max per map with the earliest (row, col) location on ties.
std::pair<std::vector<double>, std::vector<std::pair<std::size_t, std::size_t>>> maxpool_summary(
    const std::vector<Tensor>& maps);

// Writes a grayscale map as a plain-text PGM (P2), min-max scaled to 0..255.
void write_pgm(const Tensor& map, const std::string& path);

} // namespace mononet
