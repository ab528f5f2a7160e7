#include "mononet/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace mononet {

namespace {

const char* op_name(Tape::Op op) {
    switch (op) {
        case Tape::Op::Constant: return "constant";
        case Tape::Op::Param: return "param";
        case Tape::Op::Matmul: return "matmul";
        case Tape::Op::Add: return "add";
        case Tape::Op::AddRow: return "add_rowvec";
        case Tape::Op::Mul: return "mul";
        case Tape::Op::MulRow: return "mul_rowvec";
        case Tape::Op::Neg: return "neg";
        case Tape::Op::Exp: return "exp";
        case Tape::Op::Tanh: return "tanh";
        case Tape::Op::Relu: return "relu";
        case Tape::Op::Sigmoid: return "sigmoid";
        case Tape::Op::Sum: return "sum";
        case Tape::Op::Mean: return "mean";
        case Tape::Op::BceLogits: return "bce_with_logits";
        case Tape::Op::SoftmaxCe: return "softmax_cross_entropy";
        case Tape::Op::Im2col: return "im2col";
        case Tape::Op::MaxPoolRows: return "maxpool_rows";
    }
    return "?";
}

double stable_sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Column-wise max over consecutive row groups. If argmax is non-null it
// receives, per output cell, the global input row index of the winner
// (earliest row wins ties).
Tensor maxpool_forward(const Tensor& in, std::size_t group, std::vector<int>* argmax) {
    const std::size_t rows = in.rows(), cols = in.cols();
    const std::size_t groups = rows / group;
    Tensor out({groups, cols});
    if (argmax) argmax->assign(groups * cols, 0);
    for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t base = g * group;
        for (std::size_t c = 0; c < cols; ++c) {
            double best = in[base * cols + c];
            std::size_t best_row = base;
            for (std::size_t r = 1; r < group; ++r) {
                const double v = in[(base + r) * cols + c];
                if (v > best) {
                    best = v;
                    best_row = base + r;
                }
            }
            out[g * cols + c] = best;
            if (argmax) (*argmax)[g * cols + c] = static_cast<int>(best_row);
        }
    }
    return out;
}

void add_into(Tensor& dst, const Tensor& src) {
    double* d = dst.data();
    const double* s = src.data();
    const std::size_t n = dst.numel();
    for (std::size_t i = 0; i < n; ++i) d[i] += s[i];
}

} // namespace

Im2colGeom::Im2colGeom(std::size_t batch_, std::size_t in_h_, std::size_t in_w_, std::size_t kh_,
                       std::size_t kw_, std::size_t stride_)
    : batch(batch_), in_h(in_h_), in_w(in_w_), kh(kh_), kw(kw_), stride(stride_) {
    if (kh == 0 || kw == 0 || stride == 0) {
        throw DimensionError("im2col: kernel and stride must be positive");
    }
    if (kh > in_h || kw > in_w) {
        throw DimensionError("im2col: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                             " larger than image " + std::to_string(in_h) + "x" +
                             std::to_string(in_w));
    }
    out_h = (in_h - kh) / stride + 1;
    out_w = (in_w - kw) / stride + 1;
}

const Tensor& Tape::Gradients::for_param(NodeId id) const {
    for (std::size_t i = 0; i < param_ids.size(); ++i) {
        if (param_ids[i] == id) return grads[i];
    }
    throw ContractError("gradients: node " + std::to_string(id) + " is not a parameter");
}

Tape::NodeId Tape::push(Node n) {
    n.value.require_finite(op_name(n.op));
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

const Tensor& Tape::value(NodeId id) const { return node(id).value; }

const Tape::Node& Tape::node(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw ContractError("tape: node id " + std::to_string(id) + " out of range");
    }
    return nodes_[static_cast<std::size_t>(id)];
}

Tape::NodeId Tape::constant(Tensor v) {
    Node n;
    n.op = Op::Constant;
    n.value = std::move(v);
    return push(std::move(n));
}

Tape::NodeId Tape::param(Tensor v) {
    Node n;
    n.op = Op::Param;
    n.value = std::move(v);
    NodeId id = push(std::move(n));
    params_.push_back(id);
    return id;
}

Tensor Tape::compute(const Node& n) const {
    auto in = [&](NodeId id) -> const Tensor& { return nodes_[static_cast<std::size_t>(id)].value; };
    switch (n.op) {
        case Op::Constant:
        case Op::Param:
            return n.value;
        case Op::Matmul:
            return mononet::matmul(in(n.a), in(n.b));
        case Op::Add: {
            Tensor out = in(n.a);
            add_into(out, in(n.b));
            return out;
        }
        case Op::AddRow: {
            const Tensor& m = in(n.a);
            const Tensor& v = in(n.b);
            Tensor out = m;
            const std::size_t rows = m.rows(), cols = m.cols();
            for (std::size_t r = 0; r < rows; ++r) {
                double* row = out.data() + r * cols;
                for (std::size_t c = 0; c < cols; ++c) row[c] += v[c];
            }
            return out;
        }
        case Op::Mul: {
            const Tensor& a = in(n.a);
            const Tensor& b = in(n.b);
            Tensor out = a;
            for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b[i];
            return out;
        }
        case Op::MulRow: {
            const Tensor& m = in(n.a);
            const Tensor& v = in(n.b);
            Tensor out = m;
            const std::size_t rows = m.rows(), cols = m.cols();
            for (std::size_t r = 0; r < rows; ++r) {
                double* row = out.data() + r * cols;
                for (std::size_t c = 0; c < cols; ++c) row[c] *= v[c];
            }
            return out;
        }
        case Op::Neg: {
            Tensor out = in(n.a);
            for (std::size_t i = 0; i < out.numel(); ++i) out[i] = -out[i];
            return out;
        }
        case Op::Exp: {
            Tensor out = in(n.a);
            for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::exp(out[i]);
            return out;
        }
        case Op::Tanh: {
            Tensor out = in(n.a);
            for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
            return out;
        }
        case Op::Relu: {
            Tensor out = in(n.a);
            for (std::size_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
            return out;
        }
        case Op::Sigmoid: {
            Tensor out = in(n.a);
            for (std::size_t i = 0; i < out.numel(); ++i) out[i] = stable_sigmoid(out[i]);
            return out;
        }
        case Op::Sum: {
            const Tensor& a = in(n.a);
            double s = 0.0;
            for (std::size_t i = 0; i < a.numel(); ++i) s += a[i];
            return Tensor({1}, {s});
        }
        case Op::Mean: {
            const Tensor& a = in(n.a);
            double s = 0.0;
            for (std::size_t i = 0; i < a.numel(); ++i) s += a[i];
            return Tensor({1}, {s / static_cast<double>(a.numel())});
        }
        case Op::BceLogits: {
            const Tensor& z = in(n.a);
            const std::size_t b = n.labels.size();
            double s = 0.0;
            for (std::size_t i = 0; i < b; ++i) {
                const double zi = z[i];
                const double yi = static_cast<double>(n.labels[i]);
                // max(z,0) - z*y + log(1 + exp(-|z|)): stable for large |z|.
                s += std::max(zi, 0.0) - zi * yi + std::log1p(std::exp(-std::fabs(zi)));
            }
            return Tensor({1}, {s / static_cast<double>(b)});
        }
        case Op::SoftmaxCe: {
            const Tensor& z = in(n.a);
            const std::size_t b = z.rows(), c = z.cols();
            double s = 0.0;
            for (std::size_t i = 0; i < b; ++i) {
                const double* row = z.data() + i * c;
                double m = row[0];
                for (std::size_t j = 1; j < c; ++j) m = std::max(m, row[j]);
                double lse = 0.0;
                for (std::size_t j = 0; j < c; ++j) lse += std::exp(row[j] - m);
                s += m + std::log(lse) - row[static_cast<std::size_t>(n.labels[i])];
            }
            return Tensor({1}, {s / static_cast<double>(b)});
        }
        case Op::Im2col: {
            const Tensor& img = in(n.a);
            const Im2colGeom& g = n.geom;
            const std::size_t p = g.positions();
            Tensor out({g.batch * p, g.kh * g.kw});
            for (std::size_t bi = 0; bi < g.batch; ++bi) {
                const double* im = img.data() + bi * g.in_h * g.in_w;
                double* orow = out.data() + bi * p * g.kh * g.kw;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        for (std::size_t ky = 0; ky < g.kh; ++ky) {
                            const double* src = im + (oy * g.stride + ky) * g.in_w + ox * g.stride;
                            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                                orow[ky * g.kw + kx] = src[kx];
                            }
                        }
                        orow += g.kh * g.kw;
                    }
                }
            }
            return out;
        }
        case Op::MaxPoolRows:
            return maxpool_forward(in(n.a), n.group, nullptr);
    }
    throw ContractError("tape: unknown op");
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
    Node n;
    n.op = Op::Matmul;
    n.a = a;
    n.b = b;
    n.value = compute(n);
    return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    if (!value(a).same_shape(value(b))) {
        throw DimensionError("add: " + value(a).shape_str() + " vs " + value(b).shape_str());
    }
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.value = compute(n);
    return push(std::move(n));
}

Tape::NodeId Tape::add_rowvec(NodeId m, NodeId v) {
    if (value(m).ndim() != 2 || value(v).ndim() != 1 || value(v).numel() != value(m).cols()) {
        throw DimensionError("add_rowvec: " + value(m).shape_str() + " vs " + value(v).shape_str());
    }
    Node n;
    n.op = Op::AddRow;
    n.a = m;
    n.b = v;
    n.value = compute(n);
    return push(std::move(n));
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
    if (!value(a).same_shape(value(b))) {
        throw DimensionError("mul: " + value(a).shape_str() + " vs " + value(b).shape_str());
    }
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.value = compute(n);
    return push(std::move(n));
}

Tape::NodeId Tape::mul_rowvec(NodeId m, NodeId v) {
    if (value(m).ndim() != 2 || value(v).ndim() != 1 || value(v).numel() != value(m).cols()) {
        throw DimensionError("mul_rowvec: " + value(m).shape_str() + " vs " + value(v).shape_str());
    }
    Node n;
    n.op = Op::MulRow;
    n.a = m;
    n.b = v;
    n.value = compute(n);
    return push(std::move(n));
}

#define MONONET_UNARY(fn, opcode)              \
    Tape::NodeId Tape::fn(NodeId a) {          \
        Node n;                                \
        n.op = opcode;                         \
        n.a = a;                               \
        n.value = compute(n);                  \
        return push(std::move(n));             \
    }

MONONET_UNARY(neg, Op::Neg)
MONONET_UNARY(exp, Op::Exp)
MONONET_UNARY(tanh, Op::Tanh)
MONONET_UNARY(relu, Op::Relu)
MONONET_UNARY(sigmoid, Op::Sigmoid)
MONONET_UNARY(sum, Op::Sum)
MONONET_UNARY(mean, Op::Mean)

#undef MONONET_UNARY

Tape::NodeId Tape::bce_with_logits(NodeId logits, std::vector<int> labels) {
    const Tensor& z = value(logits);
    if (z.numel() != labels.size()) {
        throw DimensionError("bce_with_logits: " + std::to_string(z.numel()) + " logits vs " +
                             std::to_string(labels.size()) + " labels");
    }
    if (labels.empty()) throw ContractError("bce_with_logits: empty batch");
    for (int y : labels) {
        if (y != 0 && y != 1) {
            throw DataError("bce_with_logits: label " + std::to_string(y) + " not in {0,1}");
        }
    }
    Node n;
    n.op = Op::BceLogits;
    n.a = logits;
    n.labels = std::move(labels);
    n.value = compute(n);
    return push(std::move(n));
}

Tape::NodeId Tape::softmax_cross_entropy(NodeId logits, std::vector<int> labels) {
    const Tensor& z = value(logits);
    if (z.ndim() != 2 || z.rows() != labels.size()) {
        throw DimensionError("softmax_cross_entropy: logits " + z.shape_str() + " vs " +
                             std::to_string(labels.size()) + " labels");
    }
    if (labels.empty()) throw ContractError("softmax_cross_entropy: empty batch");
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= z.cols()) {
            throw DataError("softmax_cross_entropy: label " + std::to_string(y) +
                            " out of range for " + std::to_string(z.cols()) + " classes");
        }
    }
    Node n;
    n.op = Op::SoftmaxCe;
    n.a = logits;
    n.labels = std::move(labels);
    n.value = compute(n);
    return push(std::move(n));
}

Tape::NodeId Tape::im2col(NodeId images, const Im2colGeom& geom) {
    const Tensor& img = value(images);
    if (img.ndim() != 2 || img.rows() != geom.batch || img.cols() != geom.in_h * geom.in_w) {
        throw DimensionError("im2col: image tensor " + img.shape_str() + " does not match geometry");
    }
    Node n;
    n.op = Op::Im2col;
    n.a = images;
    n.geom = geom;
    n.value = compute(n);
    return push(std::move(n));
}

Tape::NodeId Tape::maxpool_rows(NodeId m, std::size_t group) {
    const Tensor& in = value(m);
    if (in.ndim() != 2 || group == 0 || in.rows() % group != 0) {
        throw DimensionError("maxpool_rows: " + in.shape_str() + " not divisible into groups of " +
                             std::to_string(group));
    }
    Node n;
    n.op = Op::MaxPoolRows;
    n.a = m;
    n.group = group;
    n.value = maxpool_forward(in, group, &n.argmax);
    return push(std::move(n));
}

Tape::Gradients Tape::gradients(NodeId loss) const {
    const Tensor& lv = value(loss);
    if (lv.numel() != 1) {
        throw ContractError("gradients: loss must be scalar, got shape " + lv.shape_str());
    }

    std::vector<Tensor> grad(nodes_.size());
    std::vector<char> seen(nodes_.size(), 0);
    auto acc = [&](NodeId id) -> Tensor& {
        auto i = static_cast<std::size_t>(id);
        if (!seen[i]) {
            grad[i] = Tensor(nodes_[i].value.shape());
            seen[i] = 1;
        }
        return grad[i];
    };

    acc(loss)[0] = 1.0;

    for (NodeId id = loss; id >= 0; --id) {
        const auto i = static_cast<std::size_t>(id);
        if (!seen[i]) continue;
        const Node& n = nodes_[i];
        const Tensor& g = grad[i];
        switch (n.op) {
            case Op::Constant:
            case Op::Param:
                break;
            case Op::Matmul: {
                const Tensor& a = nodes_[static_cast<std::size_t>(n.a)].value;
                const Tensor& b = nodes_[static_cast<std::size_t>(n.b)].value;
                add_into(acc(n.a), matmul_nt(g, b));
                add_into(acc(n.b), matmul_tn(a, g));
                break;
            }
            case Op::Add: {
                add_into(acc(n.a), g);
                add_into(acc(n.b), g);
                break;
            }
            case Op::AddRow: {
                add_into(acc(n.a), g);
                Tensor& gv = acc(n.b);
                const std::size_t rows = g.rows(), cols = g.cols();
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* row = g.data() + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) gv[c] += row[c];
                }
                break;
            }
            case Op::Mul: {
                const Tensor& a = nodes_[static_cast<std::size_t>(n.a)].value;
                const Tensor& b = nodes_[static_cast<std::size_t>(n.b)].value;
                Tensor& ga = acc(n.a);
                Tensor& gb = acc(n.b);
                for (std::size_t k = 0; k < g.numel(); ++k) {
                    ga[k] += g[k] * b[k];
                    gb[k] += g[k] * a[k];
                }
                break;
            }
            case Op::MulRow: {
                const Tensor& m = nodes_[static_cast<std::size_t>(n.a)].value;
                const Tensor& v = nodes_[static_cast<std::size_t>(n.b)].value;
                Tensor& gm = acc(n.a);
                Tensor& gv = acc(n.b);
                const std::size_t rows = m.rows(), cols = m.cols();
                for (std::size_t r = 0; r < rows; ++r) {
                    const std::size_t base = r * cols;
                    for (std::size_t c = 0; c < cols; ++c) {
                        gm[base + c] += g[base + c] * v[c];
                        gv[c] += g[base + c] * m[base + c];
                    }
                }
                break;
            }
            case Op::Neg: {
                Tensor& ga = acc(n.a);
                for (std::size_t k = 0; k < g.numel(); ++k) ga[k] -= g[k];
                break;
            }
            case Op::Exp: {
                Tensor& ga = acc(n.a);
                for (std::size_t k = 0; k < g.numel(); ++k) ga[k] += g[k] * n.value[k];
                break;
            }
            case Op::Tanh: {
                Tensor& ga = acc(n.a);
                for (std::size_t k = 0; k < g.numel(); ++k) {
                    ga[k] += g[k] * (1.0 - n.value[k] * n.value[k]);
                }
                break;
            }
            case Op::Relu: {
                const Tensor& a = nodes_[static_cast<std::size_t>(n.a)].value;
                Tensor& ga = acc(n.a);
                // Subgradient 0 at the kink.
                for (std::size_t k = 0; k < g.numel(); ++k) {
                    if (a[k] > 0.0) ga[k] += g[k];
                }
                break;
            }
            case Op::Sigmoid: {
                Tensor& ga = acc(n.a);
                for (std::size_t k = 0; k < g.numel(); ++k) {
                    ga[k] += g[k] * n.value[k] * (1.0 - n.value[k]);
                }
                break;
            }
            case Op::Sum: {
                Tensor& ga = acc(n.a);
                const double s = g[0];
                for (std::size_t k = 0; k < ga.numel(); ++k) ga[k] += s;
                break;
            }
            case Op::Mean: {
                Tensor& ga = acc(n.a);
                const double s = g[0] / static_cast<double>(ga.numel());
                for (std::size_t k = 0; k < ga.numel(); ++k) ga[k] += s;
                break;
            }
            case Op::BceLogits: {
                const Tensor& z = nodes_[static_cast<std::size_t>(n.a)].value;
                Tensor& ga = acc(n.a);
                const double scale = g[0] / static_cast<double>(n.labels.size());
                for (std::size_t k = 0; k < n.labels.size(); ++k) {
                    ga[k] += scale * (stable_sigmoid(z[k]) - static_cast<double>(n.labels[k]));
                }
                break;
            }
            case Op::SoftmaxCe: {
                const Tensor& z = nodes_[static_cast<std::size_t>(n.a)].value;
                Tensor& ga = acc(n.a);
                const std::size_t b = z.rows(), c = z.cols();
                const double scale = g[0] / static_cast<double>(b);
                for (std::size_t r = 0; r < b; ++r) {
                    const double* row = z.data() + r * c;
                    double m = row[0];
                    for (std::size_t j = 1; j < c; ++j) m = std::max(m, row[j]);
                    double lse = 0.0;
                    for (std::size_t j = 0; j < c; ++j) lse += std::exp(row[j] - m);
                    for (std::size_t j = 0; j < c; ++j) {
                        const double p = std::exp(row[j] - m) / lse;
                        const double onehot = (static_cast<std::size_t>(n.labels[r]) == j) ? 1.0 : 0.0;
                        ga[r * c + j] += scale * (p - onehot);
                    }
                }
                break;
            }
            case Op::Im2col: {
                Tensor& ga = acc(n.a);
                const Im2colGeom& geo = n.geom;
                const std::size_t p = geo.positions();
                const std::size_t patch = geo.kh * geo.kw;
                for (std::size_t bi = 0; bi < geo.batch; ++bi) {
                    double* gim = ga.data() + bi * geo.in_h * geo.in_w;
                    const double* grow = g.data() + bi * p * patch;
                    for (std::size_t oy = 0; oy < geo.out_h; ++oy) {
                        for (std::size_t ox = 0; ox < geo.out_w; ++ox) {
                            for (std::size_t ky = 0; ky < geo.kh; ++ky) {
                                double* dst = gim + (oy * geo.stride + ky) * geo.in_w +
                                              ox * geo.stride;
                                for (std::size_t kx = 0; kx < geo.kw; ++kx) {
                                    dst[kx] += grow[ky * geo.kw + kx];
                                }
                            }
                            grow += patch;
                        }
                    }
                }
                break;
            }
            case Op::MaxPoolRows: {
                Tensor& ga = acc(n.a);
                const std::size_t cols = g.cols();
                for (std::size_t cell = 0; cell < g.numel(); ++cell) {
                    const std::size_t r = static_cast<std::size_t>(n.argmax[cell]);
                    ga[r * cols + cell % cols] += g[cell];
                }
                break;
            }
        }
    }

    Gradients out;
    out.param_ids = params_;
    out.grads.reserve(params_.size());
    for (NodeId pid : params_) {
        const auto i = static_cast<std::size_t>(pid);
        if (seen[i]) {
            out.grads.push_back(std::move(grad[i]));
        } else {
            out.grads.push_back(Tensor(nodes_[i].value.shape()));
        }
    }
    return out;
}

bool Tape::replay_matches() const {
    for (const Node& n : nodes_) {
        if (n.op == Op::Constant || n.op == Op::Param) continue;
        Tensor again = compute(n);
        if (!again.same_shape(n.value)) return false;
        if (std::memcmp(again.data(), n.value.data(), again.numel() * sizeof(double)) != 0) {
            return false;
        }
    }
    return true;
}

} // namespace mononet
