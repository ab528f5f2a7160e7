#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mononet/data.hpp"

namespace mononet {

/// An additive integer score over named binary features, plus a real offset.
/// Risk probability is sigmoid(offset + sum of points of active features);
/// features absent from the table contribute nothing.
struct ScoreTable {
    std::vector<std::pair<std::string, int>> entries;
    double offset = 0.0;

    /// Appends an entry; duplicate names are a data error.
    void add(const std::string& name, int points);

    /// Points for a named feature, 0 when the name is not in the table.
    int points_for(const std::string& name) const;

    /// Text format: '#' comment lines, one optional "offset <value>" line,
    /// and "<feature> <integer points>" lines.
    static ScoreTable load(const std::string& path);
    void save(const std::string& path) const;
    static ScoreTable parse(const std::string& text, const std::string& origin = "score table");
    std::string to_string() const;
};

/// Integer score S for the active feature names.
int risk_score(const ScoreTable& table, const std::vector<std::string>& active);

/// sigmoid(offset + S) for the active feature names.
double risk_predict(const ScoreTable& table, const std::vector<std::string>& active);

/// Row-wise score/probability for a dataset whose columns are binary
/// features; a column counts as active when its value exceeds 0.5.
int risk_score(const ScoreTable& table, const Dataset& data, std::size_t row);
double risk_predict(const ScoreTable& table, const Dataset& data, std::size_t row);

/// Maximum-likelihood offset for the table's fixed points on a {0,1}-labeled
/// training set (1-D logistic regression in the offset alone). Returns the
/// fitted offset and writes it into the table.
double fit_offset(ScoreTable& table, const Dataset& train);

/// Accuracy at the 0.5 threshold; probability exactly 0.5 predicts class 0.
double risk_accuracy(const ScoreTable& table, const Dataset& data);

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int pred = 0;
    std::vector<std::size_t> counts; // class histogram of the training rows here
    bool leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes; // nodes[0] is the root
    std::size_t width = 0;       // training feature count
    std::size_t classes = 0;
};

/// Gini impurity 1 - sum p_c^2 of a class histogram (0 for an empty one).
double gini(const std::vector<std::size_t>& counts);

/// Greedy Gini-gain CART. Splits send x[f] <= t left and x[f] > t right,
/// with t the midpoint of consecutive distinct sorted values. Tie rule:
/// among equal gains, the lowest feature index wins, then the lowest
/// threshold. Recursion stops at max_depth, when a child would fall below
/// min_leaf, on pure nodes, or when no split improves impurity. Leaf ties
/// predict the lowest class index.
DecisionTree cart_fit(const Dataset& train, std::size_t max_depth = 6, std::size_t min_leaf = 5);

int cart_predict(const DecisionTree& tree, const std::vector<double>& x);
int cart_predict(const DecisionTree& tree, const Tensor& features, std::size_t row);
double cart_accuracy(const DecisionTree& tree, const Dataset& data);

/// Depth of the tree (a single leaf has depth 0).
std::size_t tree_depth(const DecisionTree& tree);

} // namespace mononet
