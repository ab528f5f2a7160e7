// Generates the synthetic tabular benchmark files and the shipped score
// tables. Each dataset is drawn from a documented latent person/object model
// with a logistic ground truth, so accuracy ceilings are known and printed.
#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "mononet/baselines.hpp"
#include "mononet/data.hpp"
#include "mononet/rng.hpp"
#include "mononet/tensor.hpp"

using namespace mononet;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::size_t choice(Rng& rng, const std::vector<double>& p) {
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return i;
    }
    return p.size() - 1;
}

struct Built {
    Dataset data;
    double bayes = 0.0; // accuracy of the generative rule itself
};

void report(const std::string& id, const Built& built) {
    double positives = 0.0;
    for (int y : built.data.labels) positives += y;
    positives /= static_cast<double>(built.data.size());
    std::printf("%-10s N=%-6zu width=%-3zu positives=%.3f bayes=%.4f\n", id.c_str(),
                built.data.size(), built.data.width(), positives, built.bayes);
}

// ---------------------------------------------------------------- income --
Built make_income(std::size_t n, Rng& rng) {
    const std::vector<std::string> names = {
        "Male", "Female", "Age_leq_21", "Age_22_to_29", "Age_30_to_44", "Age_45_to_59",
        "Age_geq_60", "Married", "NeverMarried", "DivorcedOrSeparated", "NoHS", "HSDiploma",
        "SomeCollege", "CollegeDegree", "JobManagerial", "JobService", "JobBlueCollar",
        "JobWhiteCollar", "WorkHrsPerWeek_leq_40", "AnyCapitalGains"};
    Built built;
    built.data.feature_names = names;
    built.data.features = Tensor({n, names.size()});
    built.data.labels.resize(n);
    built.data.name = "income";

    double bayes = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool male = rng.uniform() < 0.67;
        const std::size_t age = choice(rng, {0.08, 0.18, 0.34, 0.28, 0.12});
        // Marital status depends on age: the young have rarely married.
        std::vector<double> p_mar;
        switch (age) {
            case 0: p_mar = {0.92, 0.06, 0.02}; break;
            case 1: p_mar = {0.55, 0.38, 0.07}; break;
            case 2: p_mar = {0.20, 0.62, 0.18}; break;
            case 3: p_mar = {0.12, 0.66, 0.22}; break;
            default: p_mar = {0.10, 0.62, 0.28}; break;
        }
        const std::size_t mar = choice(rng, p_mar); // 0 never, 1 married, 2 div/sep
        const std::size_t edu = choice(rng, {0.12, 0.33, 0.30, 0.25});
        const std::size_t job = choice(rng, {0.14, 0.26, 0.35, 0.25});
        const bool hrs_le40 = rng.uniform() < 0.58;
        const bool capgain = rng.uniform() < 0.09;

        const double z = -6.1 + 4.2 * (mar == 1) + 3.9 * capgain + 1.9 * (job == 0) +
                         1.9 * (edu == 3) + 0.9 * (edu == 2) - 1.7 * (edu == 0) + 1.0 * male -
                         1.8 * hrs_le40 - 2.3 * (age == 0) + 1.2 * (age >= 2) - 0.8 * (job == 1);
        const double p = sigmoid(z);
        bayes += std::max(p, 1.0 - p);
        built.data.labels[i] = rng.uniform() < p ? 1 : 0;

        double* row = &built.data.features.at(i, 0);
        row[0] = male;
        row[1] = !male;
        for (std::size_t a = 0; a < 5; ++a) row[2 + a] = age == a;
        row[7] = mar == 1;
        row[8] = mar == 0;
        row[9] = mar == 2;
        for (std::size_t e = 0; e < 4; ++e) row[10 + e] = edu == e;
        row[14] = job == 0;
        row[15] = job == 1;
        row[16] = job == 2;
        row[17] = job == 3;
        row[18] = hrs_le40;
        row[19] = capgain;
    }
    built.bayes = bayes / static_cast<double>(n);
    return built;
}

// -------------------------------------------------------------- mushroom --
// population_eq_several x gill_size_eq_broad carries a fixed joint count
// table so the pairwise rank correlation is a known constant of the file.
Built make_mushroom(Rng& rng) {
    const std::size_t kBoth = 1840, kPopOnly = 2200, kGillOnly = 3772, kNeither = 312;
    const std::size_t n = kBoth + kPopOnly + kGillOnly + kNeither; // 8124
    const std::vector<std::string> names = {
        "odor_eq_none", "odor_eq_foul", "odor_eq_almond", "odor_eq_anise", "odor_eq_pungent",
        "odor_eq_creosote", "odor_eq_fishy", "odor_eq_musty", "odor_eq_spicy",
        "population_eq_several", "gill_size_eq_broad", "spore_print_color_eq_green",
        "cap_shape_eq_bell", "bruises", "gill_spacing_eq_close", "stalk_shape_eq_enlarging",
        "ring_number_geq_2", "habitat_eq_woods"};
    Built built;
    built.data.feature_names = names;
    built.data.features = Tensor({n, names.size()});
    built.data.labels.resize(n);
    built.data.name = "mushroom";

    // Fixed-count population/gill assignment, then a shuffle of row order.
    std::vector<std::pair<int, int>> pop_gill;
    pop_gill.reserve(n);
    for (std::size_t i = 0; i < kBoth; ++i) pop_gill.push_back({1, 1});
    for (std::size_t i = 0; i < kPopOnly; ++i) pop_gill.push_back({1, 0});
    for (std::size_t i = 0; i < kGillOnly; ++i) pop_gill.push_back({0, 1});
    for (std::size_t i = 0; i < kNeither; ++i) pop_gill.push_back({0, 0});
    rng.shuffle(pop_gill);

    double bayes = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t odor = choice(
            rng, {0.43, 0.27, 0.05, 0.05, 0.08, 0.04, 0.04, 0.02, 0.02});
        const int pop = pop_gill[i].first;
        const int gill = pop_gill[i].second;
        const bool spore_green = rng.uniform() < 0.03;
        const bool bell = rng.uniform() < 0.09;
        const bool bruises = rng.uniform() < 0.42;
        const bool close = rng.uniform() < 0.81;
        const bool enlarging = rng.uniform() < 0.43;
        const bool rings2 = rng.uniform() < 0.07;
        const bool woods = rng.uniform() < 0.38;

        // Odor nearly settles the class; the odorless stratum stays noisy.
        double z;
        if (odor == 2 || odor == 3) {
            z = -6.0; // almond/anise: reliably edible
        } else if (odor != 0) {
            z = 6.0; // foul and the pungent group: reliably poisonous
        } else {
            z = -3.5 + 6.0 * spore_green + 1.2 * pop - 1.2 * gill + 0.8 * bruises -
                0.5 * woods;
        }
        const double p = sigmoid(z);
        bayes += std::max(p, 1.0 - p);
        built.data.labels[i] = rng.uniform() < p ? 1 : 0;

        double* row = &built.data.features.at(i, 0);
        for (std::size_t o = 0; o < 9; ++o) row[o] = odor == o;
        row[9] = pop;
        row[10] = gill;
        row[11] = spore_green;
        row[12] = bell;
        row[13] = bruises;
        row[14] = close;
        row[15] = enlarging;
        row[16] = rings2;
        row[17] = woods;
    }
    built.bayes = bayes / static_cast<double>(n);
    return built;
}

// ------------------------------------------------------------------ bank --
Built make_bank(std::size_t n, Rng& rng) {
    const std::vector<std::string> names = {
        "age_geq_60", "job_blue_collar", "job_technician", "job_admin", "marital_married",
        "marital_single", "education_university", "education_secondary", "housing_loan",
        "personal_loan", "contact_cellular", "contact_telephone", "month_may",
        "previous_contact", "poutcome_success", "balance_positive"};
    Built built;
    built.data.feature_names = names;
    built.data.features = Tensor({n, names.size()});
    built.data.labels.resize(n);
    built.data.name = "bank";

    double bayes = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool age60 = rng.uniform() < 0.05;
        const std::size_t job = choice(rng, {0.22, 0.17, 0.11, 0.50}); // blue, tech, admin, other
        const std::size_t mar = choice(rng, {0.55, 0.28, 0.17});       // married, single, other
        const std::size_t edu = choice(rng, {0.30, 0.49, 0.21});       // university, secondary, other
        const bool housing = rng.uniform() < 0.54;
        const bool loan = rng.uniform() < 0.16;
        const std::size_t contact = choice(rng, {0.63, 0.06, 0.31}); // cellular, telephone, unknown
        const bool may = rng.uniform() < 0.33;
        const bool prev = rng.uniform() < 0.18;
        const bool success = prev && rng.uniform() < 0.55;
        const bool balance = rng.uniform() < 0.76;

        const double z = -0.62 + 1.65 * success + 0.75 * (contact == 0) -
                         0.68 * (job == 0) + 0.75 * age60 + 0.53 * (edu == 0) -
                         0.45 * housing + 0.45 * (mar == 1) - 0.38 * may + 0.30 * prev +
                         0.22 * balance - 0.15 * loan;
        const double p = sigmoid(z);
        bayes += std::max(p, 1.0 - p);
        built.data.labels[i] = rng.uniform() < p ? 1 : 0;

        double* row = &built.data.features.at(i, 0);
        row[0] = age60;
        row[1] = job == 0;
        row[2] = job == 1;
        row[3] = job == 2;
        row[4] = mar == 0;
        row[5] = mar == 1;
        row[6] = edu == 0;
        row[7] = edu == 1;
        row[8] = housing;
        row[9] = loan;
        row[10] = contact == 0;
        row[11] = contact == 1;
        row[12] = may;
        row[13] = prev;
        row[14] = success;
        row[15] = balance;
    }
    built.bayes = bayes / static_cast<double>(n);
    return built;
}

// ----------------------------------------------------------------- mammo --
Built make_mammo(std::size_t n, Rng& rng) {
    const std::vector<std::string> names = {
        "age_lt_45", "age_45_to_59", "age_geq_60", "shape_round", "shape_oval",
        "shape_lobular", "shape_irregular", "margin_circumscribed", "margin_microlobulated",
        "margin_obscured", "margin_illdefined", "margin_spiculated", "density_high"};
    Built built;
    built.data.feature_names = names;
    built.data.features = Tensor({n, names.size()});
    built.data.labels.resize(n);
    built.data.name = "mammo";

    double bayes = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t age = choice(rng, {0.24, 0.40, 0.36});
        const std::size_t shape = choice(rng, {0.20, 0.21, 0.10, 0.49});
        // Irregular shapes mostly carry suspicious margins.
        std::vector<double> p_margin;
        if (shape == 3) {
            p_margin = {0.08, 0.08, 0.10, 0.46, 0.28};
        } else {
            p_margin = {0.70, 0.10, 0.13, 0.05, 0.02};
        }
        const std::size_t margin = choice(rng, p_margin);
        const bool dense = rng.uniform() < 0.87;

        const double z = -1.4 + 1.2 * (shape == 3) + 1.1 * (margin == 4) +
                         0.7 * (margin == 3) + 0.9 * (age == 2) + 0.4 * (age == 1) -
                         0.6 * (margin == 0) - 0.35 * (shape == 0) + 0.15 * dense;
        const double p = sigmoid(z);
        bayes += std::max(p, 1.0 - p);
        built.data.labels[i] = rng.uniform() < p ? 1 : 0;

        double* row = &built.data.features.at(i, 0);
        for (std::size_t a = 0; a < 3; ++a) row[a] = age == a;
        for (std::size_t s = 0; s < 4; ++s) row[3 + s] = shape == s;
        for (std::size_t m = 0; m < 5; ++m) row[7 + m] = margin == m;
        row[12] = dense;
    }
    built.bayes = bayes / static_cast<double>(n);
    return built;
}

double phi_counts(const Dataset& d, const std::string& a, const std::string& b) {
    const int ca = d.feature_index(a);
    const int cb = d.feature_index(b);
    double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const bool va = d.features.at(i, static_cast<std::size_t>(ca)) > 0.5;
        const bool vb = d.features.at(i, static_cast<std::size_t>(cb)) > 0.5;
        if (va && vb) ++n11;
        else if (va) ++n10;
        else if (vb) ++n01;
        else ++n00;
    }
    const double num = n11 * n00 - n10 * n01;
    const double den = std::sqrt((n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00));
    return num / den;
}

void write_score_tables(const std::string& dir) {
    ScoreTable income;
    income.add("Age_leq_21", 3);
    income.add("Married", 2);
    income.add("AnyCapitalGains", 2);
    income.add("JobManagerial", 1);
    income.add("HSDiploma", -1);
    income.add("NoHS", -2);
    income.save(dir + "/income.scores");

    ScoreTable mushroom;
    mushroom.add("odor_eq_foul", 5);
    mushroom.add("spore_print_color_eq_green", 5);
    mushroom.add("gill_size_eq_broad", -4);
    mushroom.add("odor_eq_almond", -5);
    mushroom.add("odor_eq_anise", -5);
    mushroom.add("odor_eq_none", -5);
    mushroom.save(dir + "/mushroom.scores");
}

} // namespace

int main(int argc, char** argv) {
    std::string tab_dir = "data/tabular";
    std::string score_dir = "data/score_tables";
    std::uint64_t seed = 7;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--tabular-dir" && i + 1 < argc) tab_dir = argv[++i];
        else if (arg == "--score-dir" && i + 1 < argc) score_dir = argv[++i];
        else if (arg == "--seed" && i + 1 < argc) seed = std::stoull(argv[++i]);
        else {
            std::cerr << "usage: make_benchmarks [--tabular-dir D] [--score-dir D] [--seed N]\n";
            return 1;
        }
    }

    Rng rng(seed);
    {
        Rng r = rng.fork(1);
        Built b = make_income(8000, r);
        report("income", b);
        save_csv(b.data, tab_dir + "/income.csv");
    }
    {
        Rng r = rng.fork(2);
        Built b = make_mushroom(r);
        report("mushroom", b);
        std::printf("  phi(population_eq_several, gill_size_eq_broad) = %.5f\n",
                    phi_counts(b.data, "population_eq_several", "gill_size_eq_broad"));
        save_csv(b.data, tab_dir + "/mushroom.csv");
    }
    {
        Rng r = rng.fork(3);
        Built b = make_bank(8000, r);
        report("bank", b);
        save_csv(b.data, tab_dir + "/bank.csv");
    }
    {
        Rng r = rng.fork(4);
        Built b = make_mammo(961, r);
        report("mammo", b);
        save_csv(b.data, tab_dir + "/mammo.csv");
    }
    write_score_tables(score_dir);
    std::printf("score tables written to %s\n", score_dir.c_str());
    return 0;
}
