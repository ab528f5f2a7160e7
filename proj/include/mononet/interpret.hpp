#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mononet/data.hpp"
#include "mononet/model.hpp"

namespace mononet {

/// Sample indices ordered by the unit's activation on `data`, largest first.
/// Equal activations keep ascending sample-index order, so the ranking is a
/// deterministic permutation of 0..N-1.
std::vector<std::size_t> rank_samples(const Model& model, const Dataset& data, std::size_t unit);

/// The same ordering rule applied to a raw value vector (one value per sample).
std::vector<std::size_t> rank_by_values(const std::vector<double>& values);

struct FeatureGap {
    std::size_t feature = 0;
    std::string name;
    double top_mean = 0.0;
    double bottom_mean = 0.0;
    double gap = 0.0; // |top_mean - bottom_mean|
};

/// Per-feature means over the first and last ceil(q*N) ranked samples.
/// q must lie in (0, 0.5]; an empty selection is a contract error.
std::vector<FeatureGap> top_bottom_gaps(const std::vector<std::size_t>& ranking,
                                        const Dataset& data, double q);

/// Rank correlation: Pearson correlation of ranks, with tied values receiving
/// the average (fractional) rank of their run. Throws
/// UndefinedCorrelationError when either argument has no rank variance.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct UnitExplanation {
    std::size_t unit = 0;
    std::vector<double> output_signs;     // structural: sign-matrix row for this unit
    std::vector<double> empirical_signs;  // sign of cov(activation, outcome), per output
    std::vector<FeatureGap> gaps;         // one entry per input feature, feature order
    std::vector<FeatureGap> top_features; // largest gaps first; ties -> lower feature index
};

struct InterpretationReport {
    std::string dataset_id;
    std::string model_id;
    double q = 0.1;
    std::size_t top_k = 4;
    std::vector<UnitExplanation> units;

    std::string to_json() const;
    std::string to_text() const;
};

/// One UnitExplanation per interpretable unit. The report's headline
/// correlation direction comes from the sign matrix (structural); the
/// empirical direction is included alongside as a cross-check.
InterpretationReport build_report(const Model& model, const Dataset& train, double q = 0.1,
                                  std::size_t top_k = 4, const std::string& model_id = "");

} // namespace mononet
