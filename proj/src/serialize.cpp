#include "mononet/serialize.hpp"

#include <cstring>
#include <fstream>

namespace mononet {

namespace {

constexpr char kMagic[4] = {'M', 'N', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        std::uint8_t raw[8];
        std::memcpy(raw, &v, 8);
        buf_.insert(buf_.end(), raw, raw + 8);
    }
    void tensor(const Tensor& t) {
        u8(static_cast<std::uint8_t>(t.ndim()));
        for (std::size_t d : t.shape()) u32(static_cast<std::uint32_t>(d));
        for (std::size_t i = 0; i < t.numel(); ++i) f64(t[i]);
    }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& buf) : buf_(buf) {}

    std::uint8_t u8() {
        need(1);
        return buf_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_++]) << (8 * i);
        return v;
    }
    double f64() {
        need(8);
        double v;
        std::memcpy(&v, buf_.data() + pos_, 8);
        pos_ += 8;
        return v;
    }
    Tensor tensor() {
        const std::size_t ndim = u8();
        if (ndim > 2) throw FormatError("model file: tensor rank " + std::to_string(ndim));
        std::vector<std::size_t> shape;
        std::size_t numel = 1;
        for (std::size_t i = 0; i < ndim; ++i) {
            shape.push_back(u32());
            numel *= shape.back();
        }
        std::vector<double> data(numel);
        for (std::size_t i = 0; i < numel; ++i) data[i] = f64();
        return Tensor(std::move(shape), std::move(data));
    }
    void expect_end() const {
        if (pos_ != buf_.size()) throw FormatError("model file: trailing bytes");
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > buf_.size()) throw FormatError("model file: truncated");
    }
    const std::vector<std::uint8_t>& buf_;
    std::size_t pos_ = 0;
};

void write_header(Writer& w, ModelKind kind) {
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u32(kVersion);
    w.u8(static_cast<std::uint8_t>(kind));
}

ModelKind read_header(Reader& r) {
    for (char c : kMagic) {
        if (r.u8() != static_cast<std::uint8_t>(c)) {
            throw FormatError("model file: bad magic");
        }
    }
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw FormatError("model file: unsupported format version " + std::to_string(version) +
                          " (this build reads version " + std::to_string(kVersion) + ")");
    }
    const std::uint8_t kind = r.u8();
    if (kind != static_cast<std::uint8_t>(ModelKind::Tabular) &&
        kind != static_cast<std::uint8_t>(ModelKind::Hierarchical)) {
        throw FormatError("model file: unknown model kind " + std::to_string(kind));
    }
    return static_cast<ModelKind>(kind);
}

void write_dense(Writer& w, const DenseLayer& l) {
    w.u8(static_cast<std::uint8_t>(l.activation));
    w.tensor(l.weight);
    w.tensor(l.bias);
    w.u8(l.monotone() ? 1 : 0);
    if (l.monotone()) w.tensor(l.sign_mask);
}

DenseLayer read_dense(Reader& r) {
    DenseLayer l;
    l.activation = static_cast<Activation>(r.u8());
    l.weight = r.tensor();
    l.bias = r.tensor();
    if (r.u8()) l.sign_mask = r.tensor();
    return l;
}

void write_block(Writer& w, const MonotoneBlock& b) {
    w.tensor(b.alpha);
    w.u32(static_cast<std::uint32_t>(b.layers.size()));
    for (const DenseLayer& l : b.layers) write_dense(w, l);
    w.tensor(b.beta);
}

MonotoneBlock read_block(Reader& r) {
    MonotoneBlock b;
    b.alpha = r.tensor();
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        b.layers.push_back(read_dense(r));
        if (!b.layers.back().monotone()) {
            throw FormatError("model file: monotone layer missing its sign data");
        }
    }
    b.beta = r.tensor();
    return b;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open model file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::vector<std::uint8_t>& bytes, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write model file: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to model file: " + path);
}

} // namespace

std::vector<std::uint8_t> serialize_model(const Model& m) {
    Writer w;
    write_header(w, ModelKind::Tabular);
    w.u32(static_cast<std::uint32_t>(m.input_dim()));
    w.u32(static_cast<std::uint32_t>(m.specs().size()));
    for (const LayerSpec& s : m.specs()) {
        w.u8(static_cast<std::uint8_t>(s.kind));
        w.u32(static_cast<std::uint32_t>(s.width));
        w.u8(static_cast<std::uint8_t>(s.activation));
    }
    w.u32(static_cast<std::uint32_t>(m.free_layers().size()));
    for (const DenseLayer& l : m.free_layers()) write_dense(w, l);
    write_block(w, m.block());
    w.u8(static_cast<std::uint8_t>(m.output_activation()));
    w.u8(m.has_interp_range() ? 1 : 0);
    if (m.has_interp_range()) {
        w.tensor(m.interp_lo());
        w.tensor(m.interp_hi());
    }
    return w.take();
}

std::vector<std::uint8_t> serialize_model(const HierModel& m) {
    Writer w;
    write_header(w, ModelKind::Hierarchical);
    w.u32(static_cast<std::uint32_t>(m.img_h()));
    w.u32(static_cast<std::uint32_t>(m.img_w()));
    w.u32(static_cast<std::uint32_t>(m.conv().filters));
    w.u32(static_cast<std::uint32_t>(m.conv().kernel_h));
    w.u32(static_cast<std::uint32_t>(m.conv().kernel_w));
    w.u32(static_cast<std::uint32_t>(m.conv().stride));
    w.u8(static_cast<std::uint8_t>(m.conv().activation));
    w.tensor(m.conv_weight());
    w.tensor(m.conv_bias());
    write_block(w, m.stage1());
    write_block(w, m.stage2());
    w.u8(m.has_ranges() ? 1 : 0);
    if (m.has_ranges()) {
        w.tensor(m.summary_lo());
        w.tensor(m.summary_hi());
        w.tensor(m.hidden_lo());
        w.tensor(m.hidden_hi());
    }
    return w.take();
}

ModelKind peek_kind(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    return read_header(r);
}

Model deserialize_tabular(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    if (read_header(r) != ModelKind::Tabular) {
        throw FormatError("model file: not a tabular model");
    }
    const std::size_t input_dim = r.u32();
    const std::uint32_t n_specs = r.u32();
    std::vector<LayerSpec> specs;
    for (std::uint32_t i = 0; i < n_specs; ++i) {
        LayerSpec s;
        s.kind = static_cast<LayerKind>(r.u8());
        s.width = r.u32();
        s.activation = static_cast<Activation>(r.u8());
        specs.push_back(s);
    }
    const std::uint32_t n_free = r.u32();
    std::vector<DenseLayer> free_layers;
    for (std::uint32_t i = 0; i < n_free; ++i) free_layers.push_back(read_dense(r));
    MonotoneBlock block = read_block(r);
    const Activation output_act = static_cast<Activation>(r.u8());
    Model m = model_from_parts(input_dim, std::move(specs), std::move(free_layers),
                               std::move(block), output_act);
    if (r.u8()) {
        Tensor lo = r.tensor();
        Tensor hi = r.tensor();
        m.set_interp_range(std::move(lo), std::move(hi));
    }
    r.expect_end();
    return m;
}

HierModel deserialize_hierarchical(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    if (read_header(r) != ModelKind::Hierarchical) {
        throw FormatError("model file: not a hierarchical model");
    }
    const std::size_t img_h = r.u32();
    const std::size_t img_w = r.u32();
    ConvSpec conv;
    conv.filters = r.u32();
    conv.kernel_h = r.u32();
    conv.kernel_w = r.u32();
    conv.stride = r.u32();
    conv.activation = static_cast<Activation>(r.u8());
    Tensor conv_w = r.tensor();
    Tensor conv_b = r.tensor();
    MonotoneBlock stage1 = read_block(r);
    MonotoneBlock stage2 = read_block(r);
    HierModel m = HierModel::from_parts(conv, img_h, img_w, std::move(conv_w), std::move(conv_b),
                                        std::move(stage1), std::move(stage2));
    if (r.u8()) {
        Tensor slo = r.tensor();
        Tensor shi = r.tensor();
        Tensor hlo = r.tensor();
        Tensor hhi = r.tensor();
        m.set_ranges(std::move(slo), std::move(shi), std::move(hlo), std::move(hhi));
    }
    r.expect_end();
    return m;
}

void save_model(const Model& m, const std::string& path) { write_file(serialize_model(m), path); }

void save_model(const HierModel& m, const std::string& path) {
    write_file(serialize_model(m), path);
}

ModelKind peek_kind_file(const std::string& path) { return peek_kind(read_file(path)); }

Model load_tabular(const std::string& path) { return deserialize_tabular(read_file(path)); }

HierModel load_hierarchical(const std::string& path) {
    return deserialize_hierarchical(read_file(path));
}

} // namespace mononet
