#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mononet/data.hpp"
#include "mononet/errors.hpp"
#include "mononet/rng.hpp"
#include "mononet/tape.hpp"
#include "mononet/tensor.hpp"

namespace mononet {

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::string optimizer = "adam";  // "adam" | "sgd"
    AdamParams adam;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    std::string loss = "bce_with_logits";  // | "softmax_ce"

    void validate() const;
    // Plain-text key=value file; '#' starts a comment.
    static TrainConfig from_file(const std::string& path);
    // Applies one key=value override (the CLI flag path).
    void set(const std::string& key, const std::string& value);
};

struct TrainHistory {
    std::vector<double> train_loss;  // one entry per epoch
    std::vector<double> train_acc;
    double test_acc = -1.0;  // set when a test set is supplied
};

class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) = 0;
};

class Sgd : public Optimizer {
public:
    Sgd(double lr, double weight_decay) : lr_(lr), wd_(weight_decay) {}
    void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) override;

private:
    double lr_, wd_;
};

class Adam : public Optimizer {
public:
    Adam(double lr, AdamParams p, double weight_decay) : lr_(lr), p_(p), wd_(weight_decay) {}
    void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) override;

private:
    double lr_;
    AdamParams p_;
    double wd_;
    std::vector<Tensor> m_, v_;
    long t_ = 0;
};

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& cfg);

// Class predictions from raw logits: binary ([B x 1]) thresholds the logit at
// 0 with ties to class 0; multiclass takes the argmax with ties to the lower
// class index.
std::vector<int> predict_classes(const Tensor& logits);

double accuracy_from_logits(const Tensor& logits, const std::vector<int>& labels,
                            std::size_t offset = 0);

namespace detail {
Tensor slice_rows(const Tensor& features, const std::vector<std::size_t>& order,
                  std::size_t begin, std::size_t end);
std::vector<int> slice_labels(const std::vector<int>& labels, const std::vector<std::size_t>& order,
                              std::size_t begin, std::size_t end);
} // namespace detail

// Mini-batch training. Works for any model exposing bind(tape, X) with
// param_nodes/logits, params(), and clamp_scales(). Deterministic under
// cfg.seed. Throws DivergedError when the loss stops being finite.
template <typename ModelT>
TrainHistory train(ModelT& model, const Dataset& train_data, const TrainConfig& cfg,
                   const Dataset* test_data = nullptr) {
    cfg.validate();
    if (train_data.size() == 0) throw ContractError("train: empty dataset");
    const bool multiclass = cfg.loss == "softmax_ce";

    auto opt = make_optimizer(cfg);
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(train_data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainHistory history;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, order.size());
            Tensor x = detail::slice_rows(train_data.features, order, begin, end);
            std::vector<int> y = detail::slice_labels(train_data.labels, order, begin, end);
            try {
                Tape tape;
                auto bound = model.bind(tape, x);
                Tape::NodeId loss = multiclass
                                        ? tape.softmax_cross_entropy(bound.logits, y)
                                        : tape.bce_with_logits(bound.logits, y);
                loss_sum += tape.value(loss)[0] * static_cast<double>(end - begin);
                const Tensor& logits = tape.value(bound.logits);
                std::vector<int> pred = predict_classes(logits);
                for (std::size_t i = 0; i < pred.size(); ++i) {
                    if (pred[i] == y[i]) ++correct;
                }
                auto grads = tape.gradients(loss);
                opt->step(model.params(), grads.grads);
            } catch (const NumericError& e) {
                throw DivergedError("training diverged at epoch " + std::to_string(epoch) +
                                        ", batch " + std::to_string(begin / cfg.batch_size) +
                                        ": " + e.what(),
                                    static_cast<int>(epoch),
                                    static_cast<int>(begin / cfg.batch_size));
            }
            model.clamp_scales();
        }
        history.train_loss.push_back(loss_sum / static_cast<double>(order.size()));
        history.train_acc.push_back(static_cast<double>(correct) /
                                    static_cast<double>(order.size()));
    }
    if (test_data) {
        history.test_acc = evaluate_accuracy(model, *test_data);
    }
    return history;
}

// Accuracy over a dataset, evaluated in fixed-size batches.
template <typename ModelT>
double evaluate_accuracy(const ModelT& model, const Dataset& data) {
    if (data.size() == 0) throw ContractError("evaluate_accuracy: empty dataset");
    const std::size_t chunk = 512;
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
        const std::size_t end = std::min(begin + chunk, data.size());
        Tensor x = detail::slice_rows(data.features, order, begin, end);
        Tensor logits = model.forward(x).logits;
        std::vector<int> pred = predict_classes(logits);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (pred[i] == data.labels[begin + i]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

} // namespace mononet
