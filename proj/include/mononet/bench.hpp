#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mononet/conv.hpp"
#include "mononet/data.hpp"
#include "mononet/model.hpp"
#include "mononet/train.hpp"

namespace mononet {

/// One tabular benchmark: dataset file, architecture, training recipe, and
/// (when available) a points table for risk-score inference.
struct BenchSpec {
    std::string id;
    std::string csv;
    std::string spec = "64,64,3,64"; // free widths, interpretable width, monotone widths
    TrainConfig cfg;
    std::string score_table; // empty when no points table ships for this dataset
    bool scale_minmax = false;
};

/// The five tabular benchmarks, with paths rooted at data_dir.
std::vector<BenchSpec> benchmark_registry(const std::string& data_dir);
/// The registry entry with the given id; unknown ids are a contract error.
BenchSpec benchmark_by_id(const std::string& data_dir, const std::string& id);

struct SplitData {
    Dataset train;
    Dataset test;
};

/// Load, optionally min-max scale, and stratified-split (20% test, split
/// seed 0 so every run sees the same partition).
SplitData load_bench_data(const BenchSpec& spec);

/// Train one model with the bench recipe at the given seed and return its
/// test accuracy. The trained model (with recorded interpretable-layer
/// ranges) is copied to out_model when non-null.
double bench_mononet_run(const BenchSpec& spec, const SplitData& data, std::uint64_t model_seed,
                         Model* out_model = nullptr);

struct DatasetResult {
    std::string id;
    std::vector<double> mono_runs; // per-seed test accuracies
    double mono_mean = 0.0;
    double mono_std = 0.0; // sample standard deviation (n-1)
    double cart = -1.0;
    double risk = -1.0; // -1 when the dataset ships no score table
};

/// MonoNet over `runs` seeds plus the CART and risk-score comparators on the
/// shared split.
DatasetResult bench_dataset(const BenchSpec& spec, std::size_t runs);

double mean_of(const std::vector<double>& xs);
double sample_std(const std::vector<double>& xs);

/// Plain-text accuracy table, one dataset per row.
std::string render_bench_table(const std::vector<DatasetResult>& results);

struct MnistResult {
    double test_accuracy = 0.0;
    bool fast = false;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    std::vector<double> epoch_train_loss;
};

/// Digit benchmark for the hierarchical model. fast=true trains on the
/// bundled 10k-sample subset (stratified 80/20); fast=false requires the
/// four standard full-size files under data_dir/mnist. The trained model
/// (with recorded stage ranges) is copied to out_model when non-null, and
/// the evaluation set to out_test.
MnistResult bench_mnist(const std::string& data_dir, bool fast, std::uint64_t seed,
                        HierModel* out_model = nullptr, Dataset* out_test = nullptr,
                        std::size_t epochs_override = 0);

/// The architecture and recipe bench_mnist uses, exposed so other entry
/// points build the identical model.
HierModel mnist_model(std::uint64_t seed);
TrainConfig mnist_config(std::uint64_t seed);

} // namespace mononet
