#include "mononet/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "mononet/errors.hpp"

namespace mononet {

namespace {

double sign_of(double v) {
    if (v > 0.0) return 1.0;
    if (v < 0.0) return -1.0;
    return 0.0;
}

// Average-of-run fractional ranks (1-based; the base cancels in Pearson).
std::vector<double> fractional_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

std::vector<FeatureGap> top_k_by_gap(const std::vector<FeatureGap>& gaps, std::size_t top_k) {
    std::vector<FeatureGap> sorted = gaps;
    std::stable_sort(sorted.begin(), sorted.end(), [](const FeatureGap& a, const FeatureGap& b) {
        if (a.gap != b.gap) return a.gap > b.gap;
        return a.feature < b.feature;
    });
    if (sorted.size() > top_k) sorted.resize(top_k);
    return sorted;
}

std::string sign_word(double s) {
    if (s > 0.0) return "positive";
    if (s < 0.0) return "negative";
    return "zero";
}

} // namespace

std::vector<std::size_t> rank_by_values(const std::vector<double>& values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return values[a] > values[b];
    });
    return order;
}

std::vector<std::size_t> rank_samples(const Model& model, const Dataset& data, std::size_t unit) {
    if (unit >= model.interp_width()) {
        throw ContractError("rank_samples: unit " + std::to_string(unit) +
                            " out of range (interpretable width " +
                            std::to_string(model.interp_width()) + ")");
    }
    const Model::Forward fwd = model.forward(data.features);
    std::vector<double> values(data.size());
    for (std::size_t s = 0; s < data.size(); ++s) values[s] = fwd.interp.at(s, unit);
    return rank_by_values(values);
}

std::vector<FeatureGap> top_bottom_gaps(const std::vector<std::size_t>& ranking,
                                        const Dataset& data, double q) {
    if (!(q > 0.0) || q > 0.5) {
        throw ContractError("top_bottom_gaps: q must lie in (0, 0.5]");
    }
    if (ranking.size() != data.size()) {
        throw ContractError("top_bottom_gaps: ranking does not cover the dataset");
    }
    const std::size_t n = ranking.size();
    const std::size_t take =
        static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    if (take == 0) throw ContractError("top_bottom_gaps: empty top/bottom selection");

    const std::size_t d = data.width();
    std::vector<FeatureGap> gaps(d);
    for (std::size_t f = 0; f < d; ++f) {
        double top_sum = 0.0;
        double bot_sum = 0.0;
        for (std::size_t k = 0; k < take; ++k) {
            top_sum += data.features.at(ranking[k], f);
            bot_sum += data.features.at(ranking[n - 1 - k], f);
        }
        FeatureGap& g = gaps[f];
        g.feature = f;
        g.name = f < data.feature_names.size() ? data.feature_names[f] : std::to_string(f);
        g.top_mean = top_sum / static_cast<double>(take);
        g.bottom_mean = bot_sum / static_cast<double>(take);
        g.gap = std::fabs(g.top_mean - g.bottom_mean);
    }
    return gaps;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ContractError("spearman: length mismatch");
    if (x.size() < 2) throw ContractError("spearman: need at least 2 observations");
    const std::vector<double> rx = fractional_ranks(x);
    const std::vector<double> ry = fractional_ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = rx[i] - mx;
        const double dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw UndefinedCorrelationError("spearman: an argument has zero rank variance");
    }
    return sxy / std::sqrt(sxx * syy);
}

InterpretationReport build_report(const Model& model, const Dataset& train, double q,
                                  std::size_t top_k, const std::string& model_id) {
    if (!(q > 0.0) || q > 0.5) throw ContractError("build_report: q must lie in (0, 0.5]");
    if (train.size() == 0) throw ContractError("build_report: empty dataset");
    if (train.width() != model.input_dim()) {
        throw DimensionError("build_report: dataset width " + std::to_string(train.width()) +
                             " does not match model input " +
                             std::to_string(model.input_dim()));
    }

    InterpretationReport report;
    report.dataset_id = train.name;
    report.model_id = model_id;
    report.q = q;
    report.top_k = top_k;

    const Model::Forward fwd = model.forward(train.features);
    const Tensor signs = model.block().signs();
    const std::size_t width = model.interp_width();
    const std::size_t n_out = model.output_width();
    const std::size_t n = train.size();

    for (std::size_t u = 0; u < width; ++u) {
        UnitExplanation ex;
        ex.unit = u;

        std::vector<double> values(n);
        for (std::size_t s = 0; s < n; ++s) values[s] = fwd.interp.at(s, u);
        double v_mean = 0.0;
        for (double v : values) v_mean += v;
        v_mean /= static_cast<double>(n);

        for (std::size_t j = 0; j < n_out; ++j) {
            ex.output_signs.push_back(signs.at(u, j));
            // Empirical direction: covariance between the unit's activation
            // and the outcome indicator (class j for multiclass heads, the
            // positive label otherwise).
            auto outcome = [&](std::size_t s) {
                if (n_out == 1) return static_cast<double>(train.labels[s]);
                return static_cast<std::size_t>(train.labels[s]) == j ? 1.0 : 0.0;
            };
            double y_mean = 0.0;
            for (std::size_t s = 0; s < n; ++s) y_mean += outcome(s);
            y_mean /= static_cast<double>(n);
            double cov = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                cov += (values[s] - v_mean) * (outcome(s) - y_mean);
            }
            ex.empirical_signs.push_back(sign_of(cov));
        }

        const std::vector<std::size_t> ranking = rank_by_values(values);
        ex.gaps = top_bottom_gaps(ranking, train, q);
        ex.top_features = top_k_by_gap(ex.gaps, top_k);
        report.units.push_back(std::move(ex));
    }
    return report;
}

std::string InterpretationReport::to_json() const {
    nlohmann::json j;
    j["dataset_id"] = dataset_id;
    j["model_id"] = model_id;
    j["q"] = q;
    j["top_k"] = top_k;
    nlohmann::json ju = nlohmann::json::array();
    for (const UnitExplanation& ex : units) {
        nlohmann::json je;
        je["unit"] = ex.unit;
        nlohmann::json outs = nlohmann::json::array();
        for (std::size_t o = 0; o < ex.output_signs.size(); ++o) {
            nlohmann::json jo;
            jo["output"] = o;
            jo["sign"] = ex.output_signs[o];
            jo["correlation_with_outcome"] = sign_word(ex.output_signs[o]);
            jo["empirical_sign"] = ex.empirical_signs[o];
            outs.push_back(jo);
        }
        je["outputs"] = outs;
        auto gap_json = [](const FeatureGap& g) {
            nlohmann::json jg;
            jg["feature"] = g.feature;
            jg["name"] = g.name;
            jg["top_mean"] = g.top_mean;
            jg["bottom_mean"] = g.bottom_mean;
            jg["gap"] = g.gap;
            return jg;
        };
        nlohmann::json all = nlohmann::json::array();
        for (const FeatureGap& g : ex.gaps) all.push_back(gap_json(g));
        je["gaps"] = all;
        nlohmann::json top = nlohmann::json::array();
        for (const FeatureGap& g : ex.top_features) top.push_back(gap_json(g));
        je["top_features"] = top;
        ju.push_back(je);
    }
    j["units"] = ju;
    return j.dump(2);
}

std::string InterpretationReport::to_text() const {
    std::ostringstream out;
    out << "interpretation report\n";
    out << "dataset: " << (dataset_id.empty() ? "(unnamed)" : dataset_id);
    if (!model_id.empty()) out << "  model: " << model_id;
    out << "\n";
    out << "q: " << std::setprecision(6) << q << "  top_k: " << top_k << "\n";

    std::size_t name_w = 7;
    for (const UnitExplanation& ex : units) {
        for (const FeatureGap& g : ex.top_features) name_w = std::max(name_w, g.name.size());
    }

    out << std::fixed << std::setprecision(4);
    for (const UnitExplanation& ex : units) {
        out << "\nunit " << ex.unit << "\n";
        for (std::size_t o = 0; o < ex.output_signs.size(); ++o) {
            out << "  output " << o << ": " << sign_word(ex.output_signs[o])
                << " correlation with outcome (structural; empirical "
                << sign_word(ex.empirical_signs[o]) << ")\n";
        }
        out << "  " << std::left << std::setw(static_cast<int>(name_w)) << "feature"
            << std::right << std::setw(10) << "top" << std::setw(10) << "bottom"
            << std::setw(10) << "gap" << "\n";
        for (const FeatureGap& g : ex.top_features) {
            out << "  " << std::left << std::setw(static_cast<int>(name_w)) << g.name
                << std::right << std::setw(10) << g.top_mean << std::setw(10) << g.bottom_mean
                << std::setw(10) << g.gap << "\n";
        }
    }
    return out.str();
}

} // namespace mononet
