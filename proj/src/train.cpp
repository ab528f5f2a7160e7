#include "mononet/train.hpp"

#include <cmath>
#include <fstream>

namespace mononet {

void TrainConfig::validate() const {
    if (epochs < 1) throw ContractError("config: epochs must be >= 1");
    if (batch_size < 1) throw ContractError("config: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ContractError("config: learning_rate must be > 0");
    if (optimizer != "adam" && optimizer != "sgd") {
        throw ContractError("config: optimizer must be adam or sgd, got '" + optimizer + "'");
    }
    if (loss != "bce_with_logits" && loss != "softmax_ce") {
        throw ContractError("config: loss must be bce_with_logits or softmax_ce, got '" + loss +
                            "'");
    }
    if (weight_decay < 0.0) throw ContractError("config: weight_decay must be >= 0");
}

void TrainConfig::set(const std::string& key, const std::string& value) {
    auto as_count = [&](const char* what) {
        try {
            const long v = std::stol(value);
            if (v < 1) throw std::exception();
            return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            throw ParseError(std::string("config: ") + what + " = '" + value +
                             "' is not a positive integer");
        }
    };
    auto as_real = [&](const char* what) {
        try {
            return std::stod(value);
        } catch (const std::exception&) {
            throw ParseError(std::string("config: ") + what + " = '" + value +
                             "' is not a number");
        }
    };
    if (key == "epochs") {
        epochs = as_count("epochs");
    } else if (key == "batch_size") {
        batch_size = as_count("batch_size");
    } else if (key == "learning_rate") {
        learning_rate = as_real("learning_rate");
    } else if (key == "optimizer") {
        optimizer = value;
    } else if (key == "adam_beta1") {
        adam.beta1 = as_real("adam_beta1");
    } else if (key == "adam_beta2") {
        adam.beta2 = as_real("adam_beta2");
    } else if (key == "adam_eps") {
        adam.eps = as_real("adam_eps");
    } else if (key == "weight_decay") {
        weight_decay = as_real("weight_decay");
    } else if (key == "seed") {
        try {
            seed = std::stoull(value);
        } catch (const std::exception&) {
            throw ParseError("config: seed = '" + value + "' is not an integer");
        }
    } else if (key == "loss") {
        loss = value;
    } else {
        throw ParseError("config: unknown key '" + key + "'");
    }
}

TrainConfig TrainConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config " + path);
    TrainConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::size_t a = line.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) continue;
        std::size_t b = line.find_last_not_of(" \t\r\n");
        line = line.substr(a, b - a + 1);
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        auto trim = [](std::string s) {
            std::size_t x = s.find_first_not_of(" \t");
            if (x == std::string::npos) return std::string();
            std::size_t y = s.find_last_not_of(" \t");
            return s.substr(x, y - x + 1);
        };
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

void Sgd::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    if (params.size() != grads.size()) throw ContractError("optimizer: param/grad count mismatch");
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& w = *params[p];
        const Tensor& g = grads[p];
        for (std::size_t i = 0; i < w.numel(); ++i) {
            w[i] -= lr_ * (g[i] + wd_ * w[i]);
        }
    }
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    if (params.size() != grads.size()) throw ContractError("optimizer: param/grad count mismatch");
    if (m_.empty()) {
        for (const Tensor* t : params) {
            m_.push_back(Tensor(t->shape()));
            v_.push_back(Tensor(t->shape()));
        }
    }
    if (m_.size() != params.size()) throw ContractError("optimizer: param set changed mid-run");
    ++t_;
    const double bc1 = 1.0 - std::pow(p_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(p_.beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& w = *params[p];
        const Tensor& g = grads[p];
        Tensor& m = m_[p];
        Tensor& v = v_[p];
        for (std::size_t i = 0; i < w.numel(); ++i) {
            const double gi = g[i] + wd_ * w[i];
            m[i] = p_.beta1 * m[i] + (1.0 - p_.beta1) * gi;
            v[i] = p_.beta2 * v[i] + (1.0 - p_.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr_ * mhat / (std::sqrt(vhat) + p_.eps);
        }
    }
}

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& cfg) {
    if (cfg.optimizer == "sgd") {
        return std::make_unique<Sgd>(cfg.learning_rate, cfg.weight_decay);
    }
    return std::make_unique<Adam>(cfg.learning_rate, cfg.adam, cfg.weight_decay);
}

std::vector<int> predict_classes(const Tensor& logits) {
    if (logits.ndim() != 2) throw DimensionError("predict: logits must be 2-D");
    std::vector<int> out(logits.rows());
    if (logits.cols() == 1) {
        for (std::size_t i = 0; i < logits.rows(); ++i) {
            out[i] = logits[i] > 0.0 ? 1 : 0;
        }
    } else {
        for (std::size_t i = 0; i < logits.rows(); ++i) {
            const double* row = logits.data() + i * logits.cols();
            std::size_t best = 0;
            for (std::size_t j = 1; j < logits.cols(); ++j) {
                if (row[j] > row[best]) best = j;
            }
            out[i] = static_cast<int>(best);
        }
    }
    return out;
}

double accuracy_from_logits(const Tensor& logits, const std::vector<int>& labels,
                            std::size_t offset) {
    std::vector<int> pred = predict_classes(logits);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == labels[offset + i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

namespace detail {

Tensor slice_rows(const Tensor& features, const std::vector<std::size_t>& order, std::size_t begin,
                  std::size_t end) {
    const std::size_t d = features.cols();
    Tensor out({end - begin, d});
    for (std::size_t r = begin; r < end; ++r) {
        const double* src = features.data() + order[r] * d;
        double* dst = out.data() + (r - begin) * d;
        for (std::size_t c = 0; c < d; ++c) dst[c] = src[c];
    }
    return out;
}

std::vector<int> slice_labels(const std::vector<int>& labels, const std::vector<std::size_t>& order,
                              std::size_t begin, std::size_t end) {
    std::vector<int> out(end - begin);
    for (std::size_t r = begin; r < end; ++r) out[r - begin] = labels[order[r]];
    return out;
}

} // namespace detail

} // namespace mononet
