#include "mononet/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mononet/errors.hpp"
#include "mononet/rng.hpp"

namespace mononet {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_cell(const std::string& cell, std::size_t line_no, const std::string& what) {
    const std::string s = strip(cell);
    if (s.empty()) {
        throw ParseError("line " + std::to_string(line_no) + ": missing " + what);
    }
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": '" + s + "' is not numeric");
    }
    if (pos != s.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": '" + s + "' is not numeric");
    }
    return v;
}

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
    unsigned char raw[4];
    in.read(reinterpret_cast<char*>(raw), 4);
    if (!in) throw FormatError(path + ": truncated header");
    return (std::uint32_t(raw[0]) << 24) | (std::uint32_t(raw[1]) << 16) |
           (std::uint32_t(raw[2]) << 8) | std::uint32_t(raw[3]);
}

} // namespace

int Dataset::num_classes() const {
    int mx = 0;
    for (int y : labels) mx = std::max(mx, y);
    return mx + 1;
}

Dataset Dataset::take(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.feature_names = feature_names;
    out.name = name;
    out.img_h = img_h;
    out.img_w = img_w;
    const std::size_t d = width();
    out.features = Tensor({indices.size(), d});
    out.labels.reserve(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t src = indices[r];
        if (src >= size()) throw ContractError("take: index out of range");
        for (std::size_t c = 0; c < d; ++c) out.features.at(r, c) = features.at(src, c);
        out.labels.push_back(labels[src]);
    }
    return out;
}

int Dataset::feature_index(const std::string& fname) const {
    for (std::size_t i = 0; i < feature_names.size(); ++i) {
        if (feature_names[i] == fname) return static_cast<int>(i);
    }
    return -1;
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    std::vector<std::string> header = split_line(line);
    if (header.size() < 2) {
        throw ParseError("line 1: header needs an outcome column and at least one feature");
    }

    Dataset data;
    data.name = path;
    for (std::size_t i = 1; i < header.size(); ++i) {
        data.feature_names.push_back(strip(header[i]));
    }
    for (std::size_t i = 0; i < data.feature_names.size(); ++i) {
        for (std::size_t j = i + 1; j < data.feature_names.size(); ++j) {
            if (data.feature_names[i] == data.feature_names[j]) {
                throw ParseError("line 1: duplicate feature name '" + data.feature_names[i] + "'");
            }
        }
    }

    const std::size_t d = data.feature_names.size();
    std::vector<double> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (strip(line).empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != d + 1) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(d + 1) + " cells, got " + std::to_string(cells.size()));
        }
        const double raw_label = parse_cell(cells[0], line_no, "outcome");
        int label = 0;
        if (raw_label == 1.0) {
            label = 1;
        } else if (raw_label == 0.0 || raw_label == -1.0) {
            label = 0;
        } else {
            throw ParseError("line " + std::to_string(line_no) + ": outcome '" + strip(cells[0]) +
                             "' is not in {-1, 0, +1}");
        }
        data.labels.push_back(label);
        for (std::size_t c = 0; c < d; ++c) {
            values.push_back(parse_cell(cells[c + 1], line_no, "feature"));
        }
    }
    if (data.labels.empty()) throw ParseError(path + ": no data rows");
    data.features = Tensor({data.labels.size(), d}, std::move(values));
    return data;
}

void save_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    out << "outcome";
    for (const std::string& n : data.feature_names) out << ',' << n;
    out << '\n';
    char buf[64];
    for (std::size_t r = 0; r < data.size(); ++r) {
        out << data.labels[r];
        for (std::size_t c = 0; c < data.width(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", data.features.at(r, c));
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw ParseError("short write to " + path);
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw FormatError("cannot open " + images_path);
    if (read_be_u32(imgs, images_path) != 0x00000803u) {
        throw FormatError(images_path + ": bad image magic (want 0x00000803)");
    }
    const std::uint32_t n = read_be_u32(imgs, images_path);
    const std::uint32_t rows = read_be_u32(imgs, images_path);
    const std::uint32_t cols = read_be_u32(imgs, images_path);

    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw FormatError("cannot open " + labels_path);
    if (read_be_u32(labs, labels_path) != 0x00000801u) {
        throw FormatError(labels_path + ": bad label magic (want 0x00000801)");
    }
    const std::uint32_t n_labels = read_be_u32(labs, labels_path);
    if (n != n_labels) {
        throw FormatError("image count " + std::to_string(n) + " != label count " +
                          std::to_string(n_labels));
    }
    if (n == 0) throw FormatError(images_path + ": zero samples");

    const std::size_t pixels = std::size_t(rows) * cols;
    std::vector<unsigned char> raw(std::size_t(n) * pixels);
    imgs.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (imgs.gcount() != static_cast<std::streamsize>(raw.size())) {
        throw FormatError(images_path + ": truncated pixel data");
    }
    std::vector<unsigned char> raw_labels(n);
    labs.read(reinterpret_cast<char*>(raw_labels.data()), n);
    if (labs.gcount() != static_cast<std::streamsize>(n)) {
        throw FormatError(labels_path + ": truncated label data");
    }

    Dataset data;
    data.name = images_path;
    data.img_h = rows;
    data.img_w = cols;
    data.features = Tensor({n, pixels});
    for (std::size_t i = 0; i < raw.size(); ++i) {
        data.features[i] = static_cast<double>(raw[i]) / 255.0;
    }
    data.labels.assign(raw_labels.begin(), raw_labels.end());
    data.feature_names.reserve(pixels);
    for (std::size_t p = 0; p < pixels; ++p) {
        data.feature_names.push_back("px" + std::to_string(p));
    }
    return data;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ContractError("split: test fraction must be in (0, 1)");
    }
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);

    Rng rng(seed);
    std::vector<std::size_t> train_idx, test_idx;
    for (auto& [label, idx] : by_class) {
        if (idx.size() < 2) {
            throw DataError("split: class " + std::to_string(label) + " has " +
                            std::to_string(idx.size()) + " sample(s); stratification needs >= 2");
        }
        rng.shuffle(idx);
        std::size_t n_test = static_cast<std::size_t>(
            test_fraction * static_cast<double>(idx.size()) + 0.5);
        n_test = std::max<std::size_t>(1, std::min(n_test, idx.size() - 1));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i < n_test ? test_idx : train_idx).push_back(idx[i]);
        }
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {data.take(train_idx), data.take(test_idx)};
}

void minmax_scale(Dataset& data) {
    const std::size_t n = data.size(), d = data.width();
    for (std::size_t c = 0; c < d; ++c) {
        double lo = data.features.at(0, c), hi = lo;
        for (std::size_t r = 1; r < n; ++r) {
            lo = std::min(lo, data.features.at(r, c));
            hi = std::max(hi, data.features.at(r, c));
        }
        if (hi > lo) {
            for (std::size_t r = 0; r < n; ++r) {
                data.features.at(r, c) = (data.features.at(r, c) - lo) / (hi - lo);
            }
        }
    }
}

} // namespace mononet
