#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mononet/rng.hpp"
#include "mononet/tape.hpp"
#include "mononet/tensor.hpp"

namespace mononet {

enum class Activation : std::uint8_t { Identity = 0, Tanh = 1, Relu = 2, Sigmoid = 3 };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

enum class LayerKind : std::uint8_t { FreeDense = 0, MonotoneDense = 1, Scale = 2 };

// One entry of a model description. Dense layers carry an output width and an
// activation; scale layers take their width from the incoming layer.
struct LayerSpec {
    LayerKind kind = LayerKind::FreeDense;
    std::size_t width = 0;
    Activation activation = Activation::Identity;
};

// Validates the stack shape: one or more free dense layers, one input-side
// scale, one or more monotone dense layers, one output-side scale whose
// activation (identity or sigmoid) acts as the output activation.
// Throws SpecError naming the offending layer index.
void validate_specs(const std::vector<LayerSpec>& specs);

struct DenseLayer {
    Tensor weight;     // [in x out]; for monotone layers the stored pre-parameter
    Tensor bias;       // [out]
    Activation activation = Activation::Identity;
    // Monotone layers only: per-entry factors in {-1,+1} applied to the
    // effective weight exp(weight). All +1 for any model this library builds;
    // kept as data so that tampered files are representable and detectable.
    Tensor sign_mask;

    bool monotone() const { return sign_mask.numel() > 0; }
    std::size_t in_width() const { return weight.rows(); }
    std::size_t out_width() const { return weight.cols(); }
};

// The constrained span of a MonoNet: component-wise input scale (alpha), a
// stack of positive-weight dense layers, and a component-wise output scale
// (beta). Monotone from its input vector to its output vector, coordinate by
// coordinate, with direction sign(alpha_i) * sign(beta_j).
struct MonotoneBlock {
    Tensor alpha;                    // [n_in]
    std::vector<DenseLayer> layers;  // all monotone
    Tensor beta;                     // [n_out]

    std::size_t n_in() const { return alpha.numel(); }
    std::size_t n_out() const { return beta.numel(); }

    // Sign matrix: [n_in x n_out], entry(i,j) = sign(alpha_i) * sign(beta_j).
    Tensor signs() const;

    // Appends this block's graph to the tape. When `param_nodes` is non-null
    // every trainable tensor is registered as a tape parameter (appended to
    // the list in canonical order); otherwise tensors enter as constants.
    Tape::NodeId bind(Tape& tape, Tape::NodeId input,
                      std::vector<Tape::NodeId>* param_nodes) const;

    // Trainable tensors in canonical order: alpha, each layer's weight and
    // bias, beta.
    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;

    // Keep every scale entry away from zero so directions stay defined.
    void clamp_scales();
};

// A tabular MonoNet: unconstrained feature layers followed by one
// MonotoneBlock. The interpretable vector h is the output of the last free
// layer (the block's input before the alpha scale).
class Model {
public:
    Model() = default;

    static Model build(const std::vector<LayerSpec>& specs, std::size_t input_dim,
                       std::uint64_t seed);

    struct Forward {
        Tensor logits;  // [B x n_out], before the output activation
        Tensor interp;  // [B x m] interpretable-layer activations
    };

    // Full forward pass; x is [B x input_dim].
    Forward forward(const Tensor& x) const;

    // Monotone sub-path only: h is [B x m] interpretable vectors.
    Tensor forward_from_interp(const Tensor& h) const;

    // Probability of class 1 for binary models (sigmoid of the logit).
    Tensor predict_proba(const Tensor& x) const;

    Tensor signs() const { return block_.signs(); }

    // Graph construction for training. Input enters as a constant; parameters
    // are registered on the tape in params() order.
    struct Bound {
        std::vector<Tape::NodeId> param_nodes;
        Tape::NodeId interp = -1;
        Tape::NodeId logits = -1;
    };
    Bound bind(Tape& tape, const Tensor& x) const;

    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;
    void clamp_scales() { block_.clamp_scales(); }

    std::size_t input_dim() const { return input_dim_; }
    std::size_t interp_width() const { return block_.n_in(); }
    std::size_t output_width() const { return block_.n_out(); }
    Activation output_activation() const { return output_act_; }

    const std::vector<LayerSpec>& specs() const { return specs_; }
    const std::vector<DenseLayer>& free_layers() const { return free_layers_; }
    std::vector<DenseLayer>& free_layers() { return free_layers_; }
    const MonotoneBlock& block() const { return block_; }
    MonotoneBlock& block() { return block_; }

    // Empirical interpretable-layer ranges observed on training data; used by
    // the probe sampler. Empty until set_interp_range is called.
    bool has_interp_range() const { return interp_lo_.numel() > 0; }
    const Tensor& interp_lo() const { return interp_lo_; }
    const Tensor& interp_hi() const { return interp_hi_; }
    void set_interp_range(Tensor lo, Tensor hi);

    // Records the observed interpretable-activation range of `x`.
    void record_interp_range(const Tensor& x);

private:
    std::size_t input_dim_ = 0;
    std::vector<LayerSpec> specs_;
    std::vector<DenseLayer> free_layers_;
    MonotoneBlock block_;
    Activation output_act_ = Activation::Identity;
    Tensor interp_lo_, interp_hi_;

    friend Model model_from_parts(std::size_t, std::vector<LayerSpec>, std::vector<DenseLayer>,
                                  MonotoneBlock, Activation);
};

// Assembles a Model from deserialized parts; validates the layer list.
Model model_from_parts(std::size_t input_dim, std::vector<LayerSpec> specs,
                       std::vector<DenseLayer> free_layers, MonotoneBlock block,
                       Activation output_act);

// Shared initializers (also used by the hierarchical model).
DenseLayer init_free_dense(std::size_t in, std::size_t out, Activation act, Rng& rng);
DenseLayer init_monotone_dense(std::size_t in, std::size_t out, Activation act, Rng& rng);
Tensor init_scale(std::size_t n, Rng& rng);
MonotoneBlock init_monotone_block(std::size_t n_in, const std::vector<std::size_t>& widths,
                                  const std::vector<Activation>& acts, Rng& rng);

// Parses the CLI width convention "a,b,k,c": entries before the second-to-last
// are free widths, the second-to-last is the interpretable width (its free
// layer uses tanh), entries after are monotone widths, and a final monotone
// output layer of width `n_out` is appended. interp_index overrides which
// entry is the interpretable width (0-based; default size-2).
std::vector<LayerSpec> parse_spec_string(const std::string& csv, std::size_t n_out = 1,
                                         int interp_index = -1);

} // namespace mononet
