#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mononet/tensor.hpp"

namespace mononet {

struct Dataset {
    Tensor features;  // [N x D]
    std::vector<int> labels;
    std::vector<std::string> feature_names;
    std::string name;
    std::size_t img_h = 0, img_w = 0;  // nonzero for image datasets

    std::size_t size() const { return labels.size(); }
    std::size_t width() const { return features.ndim() == 2 ? features.cols() : 0; }
    int num_classes() const;
    Dataset take(const std::vector<std::size_t>& indices) const;
    // Index of a feature column by name; -1 when absent.
    int feature_index(const std::string& name) const;
};

// Binary tabular CSV: header row, first column the outcome ({0,1} or {-1,+1},
// mapped to {0,1}), remaining columns numeric features. Errors carry 1-based
// line numbers.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& data, const std::string& path);

// IDX image/label pair (big-endian, magics 0x803/0x801); pixels scaled to
// [0,1], 28x28 metadata retained.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Stratified split; deterministic under seed; partition of the input indices.
std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed);

// Per-column min-max scaling to [0,1] (constant columns left unchanged).
void minmax_scale(Dataset& data);

} // namespace mononet
