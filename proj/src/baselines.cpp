#include "mononet/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "mononet/errors.hpp"

namespace mononet {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace

void ScoreTable::add(const std::string& name, int points) {
    for (const auto& e : entries) {
        if (e.first == name) throw DataError("score table: duplicate feature '" + name + "'");
    }
    entries.emplace_back(name, points);
}

int ScoreTable::points_for(const std::string& name) const {
    for (const auto& e : entries) {
        if (e.first == name) return e.second;
    }
    return 0;
}

ScoreTable ScoreTable::parse(const std::string& text, const std::string& origin) {
    ScoreTable table;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool saw_offset = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos) continue;
        if (line[start] == '#') continue;
        std::istringstream cells(line);
        std::string name;
        cells >> name;
        if (name == "offset") {
            if (saw_offset) {
                throw ParseError(origin + " line " + std::to_string(line_no) +
                                 ": repeated offset line");
            }
            double value = 0.0;
            if (!(cells >> value)) {
                throw ParseError(origin + " line " + std::to_string(line_no) +
                                 ": offset needs a numeric value");
            }
            table.offset = value;
            saw_offset = true;
        } else {
            long long points = 0;
            if (!(cells >> points)) {
                throw ParseError(origin + " line " + std::to_string(line_no) +
                                 ": expected '<feature> <integer points>'");
            }
            table.add(name, static_cast<int>(points));
        }
        std::string extra;
        if (cells >> extra) {
            throw ParseError(origin + " line " + std::to_string(line_no) +
                             ": trailing content '" + extra + "'");
        }
    }
    return table;
}

ScoreTable ScoreTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open score table: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

std::string ScoreTable::to_string() const {
    std::ostringstream out;
    char offbuf[64];
    std::snprintf(offbuf, sizeof(offbuf), "%.17g", offset);
    out << "offset " << offbuf << "\n";
    for (const auto& e : entries) out << e.first << " " << e.second << "\n";
    return out.str();
}

void ScoreTable::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write score table: " + path);
    out << to_string();
    if (!out) throw FormatError("failed writing score table: " + path);
}

int risk_score(const ScoreTable& table, const std::vector<std::string>& active) {
    int s = 0;
    for (const std::string& name : active) s += table.points_for(name);
    return s;
}

double risk_predict(const ScoreTable& table, const std::vector<std::string>& active) {
    return sigmoid(table.offset + static_cast<double>(risk_score(table, active)));
}

namespace {

// Column index of each table entry in this dataset, -1 when absent.
std::vector<int> table_columns(const ScoreTable& table, const Dataset& data) {
    std::vector<int> cols;
    cols.reserve(table.entries.size());
    for (const auto& e : table.entries) cols.push_back(data.feature_index(e.first));
    return cols;
}

int row_score(const ScoreTable& table, const std::vector<int>& cols, const Dataset& data,
              std::size_t row) {
    int s = 0;
    for (std::size_t i = 0; i < table.entries.size(); ++i) {
        if (cols[i] >= 0 &&
            data.features.at(row, static_cast<std::size_t>(cols[i])) > 0.5) {
            s += table.entries[i].second;
        }
    }
    return s;
}

} // namespace

int risk_score(const ScoreTable& table, const Dataset& data, std::size_t row) {
    if (row >= data.size()) throw ContractError("risk_score: row out of range");
    return row_score(table, table_columns(table, data), data, row);
}

double risk_predict(const ScoreTable& table, const Dataset& data, std::size_t row) {
    return sigmoid(table.offset + static_cast<double>(risk_score(table, data, row)));
}

double fit_offset(ScoreTable& table, const Dataset& train) {
    if (train.size() == 0) throw ContractError("fit_offset: empty training set");
    const std::vector<int> cols = table_columns(table, train);
    std::vector<int> scores(train.size());
    for (std::size_t r = 0; r < train.size(); ++r) scores[r] = row_score(table, cols, train, r);

    // The log-likelihood in the offset alone is concave; its derivative
    // sum(y - sigmoid(o + S)) is strictly decreasing, so bisect it.
    auto grad = [&](double o) {
        double g = 0.0;
        for (std::size_t r = 0; r < train.size(); ++r) {
            g += static_cast<double>(train.labels[r]) -
                 sigmoid(o + static_cast<double>(scores[r]));
        }
        return g;
    };
    double lo = -20.0, hi = 20.0;
    if (grad(lo) <= 0.0) {
        table.offset = lo;
        return lo;
    }
    if (grad(hi) >= 0.0) {
        table.offset = hi;
        return hi;
    }
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (grad(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    table.offset = 0.5 * (lo + hi);
    return table.offset;
}

double risk_accuracy(const ScoreTable& table, const Dataset& data) {
    if (data.size() == 0) throw ContractError("risk_accuracy: empty dataset");
    const std::vector<int> cols = table_columns(table, data);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < data.size(); ++r) {
        const double p =
            sigmoid(table.offset + static_cast<double>(row_score(table, cols, data, r)));
        const int pred = p > 0.5 ? 1 : 0;
        if (pred == data.labels[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

double gini(const std::vector<std::size_t>& counts) {
    std::size_t total = 0;
    for (std::size_t c : counts) total += c;
    if (total == 0) return 0.0;
    double sum_sq = 0.0;
    for (std::size_t c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

namespace {

struct Split {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = 0.0;
};

std::vector<std::size_t> class_counts(const Dataset& data, const std::vector<std::size_t>& rows,
                                      std::size_t classes) {
    std::vector<std::size_t> counts(classes, 0);
    for (std::size_t r : rows) counts[static_cast<std::size_t>(data.labels[r])]++;
    return counts;
}

int majority(const std::vector<std::size_t>& counts) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c) {
        if (counts[c] > counts[best]) best = c; // keep-first on ties -> lowest class
    }
    return static_cast<int>(best);
}

Split best_split(const Dataset& data, const std::vector<std::size_t>& rows, std::size_t classes,
                 std::size_t min_leaf) {
    Split best;
    const std::size_t n = rows.size();
    const std::vector<std::size_t> parent = class_counts(data, rows, classes);
    const double parent_gini = gini(parent);
    const double nd = static_cast<double>(n);

    std::vector<std::pair<double, int>> column(n);
    for (std::size_t f = 0; f < data.width(); ++f) {
        for (std::size_t i = 0; i < n; ++i) {
            column[i] = {data.features.at(rows[i], f), data.labels[rows[i]]};
        }
        std::sort(column.begin(), column.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        std::vector<std::size_t> left(classes, 0);
        std::vector<std::size_t> right = parent;
        // Walk the sorted column; a boundary between distinct values is a
        // candidate threshold at their midpoint.
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const std::size_t cls = static_cast<std::size_t>(column[i].second);
            ++left[cls];
            --right[cls];
            if (column[i].first == column[i + 1].first) continue;
            const std::size_t n_left = i + 1;
            const std::size_t n_right = n - n_left;
            if (n_left < min_leaf || n_right < min_leaf) continue;
            const double gain = parent_gini -
                                (static_cast<double>(n_left) / nd) * gini(left) -
                                (static_cast<double>(n_right) / nd) * gini(right);
            // Strict improvement keeps the earliest (lowest feature, then
            // lowest threshold) among equal-gain splits.
            if (gain > best.gain + 1e-12) {
                best.found = true;
                best.feature = f;
                best.threshold = 0.5 * (column[i].first + column[i + 1].first);
                best.gain = gain;
            }
        }
    }
    return best;
}

} // namespace

DecisionTree cart_fit(const Dataset& train, std::size_t max_depth, std::size_t min_leaf) {
    if (train.size() == 0) throw ContractError("cart_fit: empty training set");
    if (min_leaf == 0) throw ContractError("cart_fit: min_leaf must be >= 1");
    DecisionTree tree;
    tree.width = train.width();
    tree.classes = std::max<std::size_t>(train.num_classes(), 2);

    std::vector<std::size_t> all(train.size());
    std::iota(all.begin(), all.end(), 0);

    std::function<int(std::vector<std::size_t>&, std::size_t)> build =
        [&](std::vector<std::size_t>& rows, std::size_t depth) -> int {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[static_cast<std::size_t>(id)].counts =
            class_counts(train, rows, tree.classes);
        tree.nodes[static_cast<std::size_t>(id)].pred =
            majority(tree.nodes[static_cast<std::size_t>(id)].counts);

        const bool pure = gini(tree.nodes[static_cast<std::size_t>(id)].counts) == 0.0;
        if (depth >= max_depth || pure || rows.size() < 2 * min_leaf) return id;

        const Split split = best_split(train, rows, tree.classes, min_leaf);
        if (!split.found) return id;

        std::vector<std::size_t> left_rows, right_rows;
        left_rows.reserve(rows.size());
        right_rows.reserve(rows.size());
        for (std::size_t r : rows) {
            if (train.features.at(r, split.feature) <= split.threshold) {
                left_rows.push_back(r);
            } else {
                right_rows.push_back(r);
            }
        }
        rows.clear();
        rows.shrink_to_fit();

        tree.nodes[static_cast<std::size_t>(id)].feature = static_cast<int>(split.feature);
        tree.nodes[static_cast<std::size_t>(id)].threshold = split.threshold;
        const int left = build(left_rows, depth + 1);
        tree.nodes[static_cast<std::size_t>(id)].left = left;
        const int right = build(right_rows, depth + 1);
        tree.nodes[static_cast<std::size_t>(id)].right = right;
        return id;
    };
    build(all, 0);
    return tree;
}

int cart_predict(const DecisionTree& tree, const std::vector<double>& x) {
    if (tree.nodes.empty()) throw ContractError("cart_predict: empty tree");
    if (x.size() != tree.width) {
        throw DimensionError("cart_predict: sample width " + std::to_string(x.size()) +
                             " does not match training width " + std::to_string(tree.width));
    }
    std::size_t id = 0;
    while (!tree.nodes[id].leaf()) {
        const TreeNode& node = tree.nodes[id];
        id = static_cast<std::size_t>(
            x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                        : node.right);
    }
    return tree.nodes[id].pred;
}

int cart_predict(const DecisionTree& tree, const Tensor& features, std::size_t row) {
    std::vector<double> x(features.cols());
    for (std::size_t f = 0; f < features.cols(); ++f) x[f] = features.at(row, f);
    return cart_predict(tree, x);
}

double cart_accuracy(const DecisionTree& tree, const Dataset& data) {
    if (data.size() == 0) throw ContractError("cart_accuracy: empty dataset");
    std::size_t correct = 0;
    for (std::size_t r = 0; r < data.size(); ++r) {
        if (cart_predict(tree, data.features, r) == data.labels[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::size_t tree_depth(const DecisionTree& tree) {
    if (tree.nodes.empty()) return 0;
    std::function<std::size_t(std::size_t)> depth_of = [&](std::size_t id) -> std::size_t {
        const TreeNode& node = tree.nodes[id];
        if (node.leaf()) return 0;
        return 1 + std::max(depth_of(static_cast<std::size_t>(node.left)),
                            depth_of(static_cast<std::size_t>(node.right)));
    };
    return depth_of(0);
}

} // namespace mononet
