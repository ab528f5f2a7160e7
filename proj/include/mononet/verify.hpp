#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mononet/conv.hpp"
#include "mononet/model.hpp"

namespace mononet {

// One monotonicity counter-example: moving interpretable coordinate `coord`
// of `point` by +delta moved output `output` against its expected direction.
struct Violation {
    std::string stage;  // "monotone" for tabular; "stage1"/"stage2" for hierarchical
    std::size_t probe = 0;
    std::size_t coord = 0;
    std::size_t output = 0;
    double delta = 0.0;
    double observed_diff = 0.0;
    double expected_sign = 0.0;
    std::vector<double> point;
};

struct ProbeReport {
    std::size_t probes_run = 0;
    std::vector<double> deltas;
    double tolerance = 1e-9;
    std::size_t violation_count = 0;
    double max_violation_magnitude = 0.0;
    // First violations, capped so corrupted models cannot flood memory.
    std::vector<Violation> violations;

    bool passed() const { return violation_count == 0; }
    std::string to_json() const;
};

// Probes one monotone block: samples points uniformly inside [lo, hi] per
// coordinate, bumps a random coordinate by each delta, and compares every
// output's movement against the block's sign matrix. Differences within
// `tolerance` of zero are not violations (monotonicity is non-strict).
ProbeReport probe_block(const MonotoneBlock& block, const Tensor& lo, const Tensor& hi,
                        std::size_t n_probes, const std::vector<double>& deltas,
                        std::uint64_t seed, double tolerance = 1e-9,
                        const std::string& stage = "monotone");

// Tabular model: probes the monotone span over the recorded interpretable
// ranges (unit cube [-1,1] per coordinate when none are recorded).
ProbeReport probe_monotonicity(const Model& model, std::size_t n_probes,
                               const std::vector<double>& deltas, std::uint64_t seed);

// Hierarchical model: probes both stages independently over their recorded
// ranges; reports are merged.
ProbeReport probe_monotonicity(const HierModel& model, std::size_t n_probes,
                               const std::vector<double>& deltas, std::uint64_t seed);

struct PositivityIssue {
    std::string where;
    std::size_t layer = 0;
    std::size_t row = 0;
    std::size_t col = 0;
    double value = 0.0;
};

struct PositivityReport {
    std::size_t entries_checked = 0;
    std::vector<PositivityIssue> issues;
    bool passed() const { return issues.empty(); }
    std::string to_json() const;
};

PositivityReport check_weight_positivity(const MonotoneBlock& block,
                                         const std::string& where = "monotone");
PositivityReport check_weight_positivity(const Model& model);
PositivityReport check_weight_positivity(const HierModel& model);

// Compares tape gradients against central finite differences on `n_points`
// random inputs; returns the maximum relative error. Points that land a relu
// pre-activation within the finite-difference step of its kink are redrawn
// (the subgradient jump there is not a defect).
double gradient_check(const Model& model, std::size_t n_points, std::uint64_t seed);

} // namespace mononet
