#include "mononet/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mononet/baselines.hpp"
#include "mononet/errors.hpp"

namespace mononet {

namespace {

constexpr double kTestFraction = 0.2;
constexpr std::uint64_t kSplitSeed = 0; // fixed so all runs share one partition

TrainConfig tabular_config() {
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.batch_size = 32;
    cfg.learning_rate = 6e-3;
    cfg.optimizer = "adam";
    cfg.loss = "bce_with_logits";
    return cfg;
}

bool file_exists(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return static_cast<bool>(in);
}

} // namespace

std::vector<BenchSpec> benchmark_registry(const std::string& data_dir) {
    const std::string tab = data_dir + "/tabular/";
    const std::string scores = data_dir + "/score_tables/";
    std::vector<BenchSpec> specs;

    BenchSpec income;
    income.id = "income";
    income.csv = tab + "income.csv";
    income.cfg = tabular_config();
    income.score_table = scores + "income.scores";
    specs.push_back(income);

    BenchSpec breast;
    breast.id = "breast";
    breast.csv = tab + "breast.csv";
    breast.cfg = tabular_config();
    breast.scale_minmax = true; // real-valued cytology features
    specs.push_back(breast);

    BenchSpec mushroom;
    mushroom.id = "mushroom";
    mushroom.csv = tab + "mushroom.csv";
    mushroom.cfg = tabular_config();
    mushroom.score_table = scores + "mushroom.scores";
    specs.push_back(mushroom);

    BenchSpec bank;
    bank.id = "bank";
    bank.csv = tab + "bank.csv";
    bank.cfg = tabular_config();
    specs.push_back(bank);

    BenchSpec mammo;
    mammo.id = "mammo";
    mammo.csv = tab + "mammo.csv";
    mammo.cfg = tabular_config();
    mammo.cfg.epochs = 150; // small dataset; more passes for the same step count
    specs.push_back(mammo);

    return specs;
}

BenchSpec benchmark_by_id(const std::string& data_dir, const std::string& id) {
    for (const BenchSpec& s : benchmark_registry(data_dir)) {
        if (s.id == id) return s;
    }
    throw ContractError("unknown benchmark id '" + id +
                        "' (expected income|breast|mushroom|bank|mammo)");
}

SplitData load_bench_data(const BenchSpec& spec) {
    Dataset data = load_csv(spec.csv);
    data.name = spec.id;
    if (spec.scale_minmax) minmax_scale(data);
    auto parts = split(data, kTestFraction, kSplitSeed);
    SplitData out;
    out.train = std::move(parts.first);
    out.test = std::move(parts.second);
    out.train.name = spec.id;
    out.test.name = spec.id;
    return out;
}

double bench_mononet_run(const BenchSpec& spec, const SplitData& data, std::uint64_t model_seed,
                         Model* out_model) {
    Model model = Model::build(parse_spec_string(spec.spec), data.train.width(), model_seed);
    TrainConfig cfg = spec.cfg;
    cfg.seed = model_seed;
    train(model, data.train, cfg);
    model.record_interp_range(data.train.features);
    const double acc = evaluate_accuracy(model, data.test);
    if (out_model) *out_model = model;
    return acc;
}

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) throw ContractError("mean of empty vector");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

DatasetResult bench_dataset(const BenchSpec& spec, std::size_t runs) {
    if (runs == 0) throw ContractError("bench: runs must be >= 1");
    const SplitData data = load_bench_data(spec);

    DatasetResult result;
    result.id = spec.id;
    for (std::size_t seed = 0; seed < runs; ++seed) {
        result.mono_runs.push_back(bench_mononet_run(spec, data, seed));
    }
    result.mono_mean = mean_of(result.mono_runs);
    result.mono_std = sample_std(result.mono_runs);

    const DecisionTree tree = cart_fit(data.train, 6, 5);
    result.cart = cart_accuracy(tree, data.test);

    if (!spec.score_table.empty() && file_exists(spec.score_table)) {
        ScoreTable table = ScoreTable::load(spec.score_table);
        fit_offset(table, data.train);
        result.risk = risk_accuracy(table, data.test);
    }
    return result;
}

std::string render_bench_table(const std::vector<DatasetResult>& results) {
    std::ostringstream out;
    auto pct = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
        return std::string(buf);
    };
    out << "dataset    mononet (mean +- std)   cart     risk\n";
    for (const DatasetResult& r : results) {
        char row[160];
        const std::string mono = pct(r.mono_mean) + " +- " + pct(r.mono_std);
        const std::string cart = r.cart >= 0.0 ? pct(r.cart) : std::string("-");
        const std::string risk = r.risk >= 0.0 ? pct(r.risk) : std::string("-");
        std::snprintf(row, sizeof(row), "%-10s %-23s %-8s %s\n", r.id.c_str(), mono.c_str(),
                      cart.c_str(), risk.c_str());
        out << row;
    }
    return out.str();
}

HierModel mnist_model(std::uint64_t seed) {
    ConvSpec conv; // 16 filters, 9x9, stride 2, relu
    return HierModel::build(conv, 28, 28, {64, 16}, {64}, 10, seed);
}

TrainConfig mnist_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.batch_size = 64;
    cfg.learning_rate = 6e-3;
    cfg.optimizer = "adam";
    cfg.loss = "softmax_ce";
    cfg.seed = seed;
    return cfg;
}

MnistResult bench_mnist(const std::string& data_dir, bool fast, std::uint64_t seed,
                        HierModel* out_model, Dataset* out_test,
                        std::size_t epochs_override) {
    const std::string dir = data_dir + "/mnist/";
    Dataset train_set, test_set;
    if (fast) {
        const std::string images = dir + "mnist10k-images-idx3-ubyte";
        const std::string labels = dir + "mnist10k-labels-idx1-ubyte";
        Dataset all = load_idx(images, labels);
        all.name = "mnist10k";
        auto parts = split(all, kTestFraction, kSplitSeed);
        train_set = std::move(parts.first);
        test_set = std::move(parts.second);
    } else {
        const std::string tr_i = dir + "train-images-idx3-ubyte";
        const std::string tr_l = dir + "train-labels-idx1-ubyte";
        const std::string te_i = dir + "t10k-images-idx3-ubyte";
        const std::string te_l = dir + "t10k-labels-idx1-ubyte";
        if (!file_exists(tr_i) || !file_exists(tr_l) || !file_exists(te_i) ||
            !file_exists(te_l)) {
            throw DataError(
                "full-size digit files not found under " + dir +
                " (train-images-idx3-ubyte etc.); run with --fast to use the bundled "
                "10k subset");
        }
        train_set = load_idx(tr_i, tr_l);
        test_set = load_idx(te_i, te_l);
    }
    train_set.name = fast ? "mnist10k-train" : "mnist-train";
    test_set.name = fast ? "mnist10k-test" : "mnist-test";

    HierModel model = mnist_model(seed);
    TrainConfig cfg = mnist_config(seed);
    if (epochs_override > 0) cfg.epochs = epochs_override;

    MnistResult result;
    result.fast = fast;
    result.train_size = train_set.size();
    result.test_size = test_set.size();

    const TrainHistory history = train(model, train_set, cfg, &test_set);
    result.epoch_train_loss = history.train_loss;
    model.record_ranges(train_set.features);
    result.test_accuracy = evaluate_accuracy(model, test_set);

    if (out_model) *out_model = model;
    if (out_test) *out_test = std::move(test_set);
    return result;
}

} // namespace mononet
