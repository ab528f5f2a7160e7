// Command-line entry point. Exit codes: 0 success, 1 usage error, 2
// data/format error, 3 training diverged. All outputs are deterministic
// functions of the flags and seeds (no timestamps), so identical
// invocations produce byte-identical files.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mononet/baselines.hpp"
#include "mononet/bench.hpp"
#include "mononet/conv.hpp"
#include "mononet/data.hpp"
#include "mononet/errors.hpp"
#include "mononet/interpret.hpp"
#include "mononet/model.hpp"
#include "mononet/serialize.hpp"
#include "mononet/train.hpp"
#include "mononet/verify.hpp"

using namespace mononet;

namespace {

std::vector<double> parse_deltas(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            const double v = std::stod(cell, &used);
            if (used != cell.size()) throw std::invalid_argument(cell);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ContractError("--deltas: '" + cell + "' is not a number");
        }
    }
    if (out.empty()) throw ContractError("--deltas: empty list");
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out << text;
    if (!out) throw FormatError("failed writing " + path);
}

struct TrainFlags {
    std::string data;
    std::string out_dir;
    std::string spec = "64,64,3,64";
    int interp_index = -1;
    std::string config;
    double test_fraction = 0.2;
    bool minmax = false;
    std::uint64_t split_seed = 0;
    // TrainConfig mirrors; only applied when the flag was actually given.
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> learning_rate;
    std::optional<std::string> optimizer;
    std::optional<double> weight_decay;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> loss;
};

TrainConfig assemble_config(const TrainFlags& f) {
    TrainConfig cfg;
    if (!f.config.empty()) cfg = TrainConfig::from_file(f.config);
    if (f.epochs) cfg.epochs = *f.epochs;
    if (f.batch_size) cfg.batch_size = *f.batch_size;
    if (f.learning_rate) cfg.learning_rate = *f.learning_rate;
    if (f.optimizer) cfg.optimizer = *f.optimizer;
    if (f.weight_decay) cfg.weight_decay = *f.weight_decay;
    if (f.seed) cfg.seed = *f.seed;
    if (f.loss) cfg.loss = *f.loss;
    cfg.validate();
    return cfg;
}

std::string history_csv(const TrainHistory& h) {
    std::ostringstream out;
    out << "epoch,train_loss,train_accuracy\n";
    char buf[80];
    for (std::size_t e = 0; e < h.train_loss.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", e, h.train_loss[e],
                      h.train_acc[e]);
        out << buf;
    }
    return out.str();
}

int cmd_train(const TrainFlags& f) {
    TrainConfig cfg = assemble_config(f);

    Dataset data = load_csv(f.data);
    if (f.minmax) minmax_scale(data);
    const std::size_t classes = data.num_classes();
    const bool multiclass = cfg.loss == "softmax_ce";
    if (classes > 2 && !multiclass) {
        throw DataError("dataset has " + std::to_string(classes) +
                        " classes; use --loss softmax_ce");
    }
    const std::size_t n_out = multiclass ? classes : 1;

    Dataset train_set = data;
    Dataset test_set;
    bool have_test = false;
    if (f.test_fraction > 0.0) {
        auto parts = split(data, f.test_fraction, f.split_seed);
        train_set = std::move(parts.first);
        test_set = std::move(parts.second);
        have_test = true;
    }

    std::vector<LayerSpec> specs;
    try {
        specs = parse_spec_string(f.spec, n_out, f.interp_index);
    } catch (const ParseError& e) {
        throw ContractError(e.what()); // flag value problem -> usage error
    }
    Model model = Model::build(specs, train_set.width(), cfg.seed);

    const TrainHistory history =
        train(model, train_set, cfg, have_test ? &test_set : nullptr);
    model.record_interp_range(train_set.features);

    std::filesystem::create_directories(f.out_dir);
    save_model(model, f.out_dir + "/model.mnet");
    write_text(f.out_dir + "/history.csv", history_csv(history));

    nlohmann::json j;
    j["data"] = f.data;
    j["spec"] = f.spec;
    j["train_samples"] = train_set.size();
    j["test_samples"] = have_test ? test_set.size() : 0;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["optimizer"] = cfg.optimizer;
    j["loss"] = cfg.loss;
    j["seed"] = cfg.seed;
    j["final_train_loss"] = history.train_loss.back();
    j["final_train_accuracy"] = history.train_acc.back();
    if (have_test) j["test_accuracy"] = history.test_acc;
    write_text(f.out_dir + "/summary.json", j.dump(2) + "\n");

    std::cout << "model written to " << f.out_dir << "/model.mnet\n";
    std::cout << "final train accuracy: " << history.train_acc.back() << "\n";
    if (have_test) std::cout << "test accuracy: " << history.test_acc << "\n";
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& images, const std::string& labels, bool minmax) {
    const ModelKind kind = peek_kind_file(model_path);
    double acc = 0.0;
    std::size_t n = 0;
    if (kind == ModelKind::Tabular) {
        if (data_path.empty()) throw ContractError("eval: tabular model needs --data CSV");
        Dataset data = load_csv(data_path);
        if (minmax) minmax_scale(data);
        Model model = load_tabular(model_path);
        acc = evaluate_accuracy(model, data);
        n = data.size();
    } else {
        if (images.empty() || labels.empty()) {
            throw ContractError("eval: hierarchical model needs --images and --labels");
        }
        Dataset data = load_idx(images, labels);
        HierModel model = load_hierarchical(model_path);
        acc = evaluate_accuracy(model, data);
        n = data.size();
    }
    nlohmann::json j;
    j["samples"] = n;
    j["accuracy"] = acc;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_verify(const std::string& model_path, std::size_t probes, const std::string& deltas_csv,
               std::uint64_t seed, const std::string& out_path) {
    const std::vector<double> deltas = parse_deltas(deltas_csv);
    const ModelKind kind = peek_kind_file(model_path);
    ProbeReport report;
    PositivityReport positivity;
    if (kind == ModelKind::Tabular) {
        Model model = load_tabular(model_path);
        report = probe_monotonicity(model, probes, deltas, seed);
        positivity = check_weight_positivity(model);
    } else {
        HierModel model = load_hierarchical(model_path);
        report = probe_monotonicity(model, probes, deltas, seed);
        positivity = check_weight_positivity(model);
    }
    nlohmann::json j;
    j["probe_report"] = nlohmann::json::parse(report.to_json());
    j["positivity_report"] = nlohmann::json::parse(positivity.to_json());
    const std::string text = j.dump(2) + "\n";
    if (!out_path.empty()) write_text(out_path, text);
    std::cout << text;
    if (!report.passed() || !positivity.passed()) {
        std::cerr << "verification FAILED: " << report.violation_count
                  << " monotonicity violations, " << positivity.issues.size()
                  << " positivity issues\n";
        return 2;
    }
    return 0;
}

int cmd_interpret(const std::string& model_path, const std::string& data_path, double q,
                  std::size_t top_k, const std::string& format, const std::string& out_path,
                  bool minmax) {
    Model model = load_tabular(model_path);
    Dataset data = load_csv(data_path);
    if (minmax) minmax_scale(data);
    const InterpretationReport report = build_report(model, data, q, top_k, model_path);
    const std::string text =
        format == "json" ? report.to_json() + "\n" : report.to_text();
    if (!out_path.empty()) write_text(out_path, text);
    std::cout << text;
    return 0;
}

int cmd_baseline(const std::string& data_path, const std::string& what,
                 const std::string& score_path, std::size_t max_depth, std::size_t min_leaf,
                 double test_fraction, std::uint64_t split_seed, bool minmax) {
    Dataset data = load_csv(data_path);
    if (minmax) minmax_scale(data);
    auto parts = split(data, test_fraction, split_seed);
    const Dataset& train_set = parts.first;
    const Dataset& test_set = parts.second;

    nlohmann::json j;
    j["train_samples"] = train_set.size();
    j["test_samples"] = test_set.size();
    if (what == "cart" || what == "both") {
        const DecisionTree tree = cart_fit(train_set, max_depth, min_leaf);
        j["cart"] = {{"max_depth", max_depth},
                     {"min_leaf", min_leaf},
                     {"depth", tree_depth(tree)},
                     {"train_accuracy", cart_accuracy(tree, train_set)},
                     {"test_accuracy", cart_accuracy(tree, test_set)}};
    }
    if (what == "risk" || what == "both") {
        if (score_path.empty()) {
            if (what == "risk") throw ContractError("baseline: risk needs --score-table");
        } else {
            ScoreTable table = ScoreTable::load(score_path);
            const double offset = fit_offset(table, train_set);
            j["risk"] = {{"score_table", score_path},
                         {"fitted_offset", offset},
                         {"train_accuracy", risk_accuracy(table, train_set)},
                         {"test_accuracy", risk_accuracy(table, test_set)}};
        }
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_trace(const std::string& model_path, const std::string& images,
              const std::string& labels, std::size_t sample, int target,
              const std::string& maps_dir) {
    HierModel model = load_hierarchical(model_path);
    Dataset data = load_idx(images, labels);
    if (sample >= data.size()) {
        throw ContractError("trace: sample " + std::to_string(sample) +
                            " out of range (dataset has " + std::to_string(data.size()) +
                            " samples)");
    }
    Tensor image({1, data.width()});
    for (std::size_t c = 0; c < data.width(); ++c) image.at(0, c) = data.features.at(sample, c);
    std::size_t target_class;
    if (target >= 0) {
        target_class = static_cast<std::size_t>(target);
    } else {
        const HierModel::Forward fwd = model.forward(image);
        std::size_t best = 0;
        for (std::size_t c = 1; c < fwd.logits.cols(); ++c) {
            if (fwd.logits.at(0, c) > fwd.logits.at(0, best)) best = c;
        }
        target_class = best;
    }
    const ExplanationTrace trace =
        trace_explanation(model, image, sample, data.labels[sample], target_class);
    std::cout << trace.to_text();
    if (!maps_dir.empty()) {
        std::filesystem::create_directories(maps_dir);
        for (const TraceFeature& feat : trace.features) {
            for (const TraceFilter& filt : feat.filters) {
                const std::string path = maps_dir + "/sample" + std::to_string(sample) +
                                         "_feature" + std::to_string(feat.feature) +
                                         "_filter" + std::to_string(filt.filter) + ".pgm";
                write_pgm(filt.map, path);
            }
        }
        std::cout << "activation maps written to " << maps_dir << "\n";
    }
    return 0;
}

int cmd_bench(const std::string& suite, const std::string& data_dir, std::size_t runs,
              bool fast, std::uint64_t seed, const std::string& out_dir,
              std::size_t mnist_epochs) {
    const bool do_risk = suite == "risk" || suite == "all";
    const bool do_mnist = suite == "mnist" || suite == "all";
    if (!do_risk && !do_mnist) {
        throw ContractError("bench: unknown --suite '" + suite +
                            "' (expected risk|mnist|all)");
    }
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    if (do_risk) {
        std::vector<DatasetResult> results;
        for (const BenchSpec& spec : benchmark_registry(data_dir)) {
            DatasetResult r = bench_dataset(spec, runs);
            results.push_back(r);
            if (!out_dir.empty()) {
                // Persist the seed-0 model of each dataset for later
                // verify/interpret runs.
                const SplitData data = load_bench_data(spec);
                Model model;
                bench_mononet_run(spec, data, seed, &model);
                save_model(model, out_dir + "/" + spec.id + ".mnet");
            }
            std::cerr << spec.id << " done\n";
        }
        const std::string table = render_bench_table(results);
        std::cout << table;
        if (!out_dir.empty()) write_text(out_dir + "/risk_table.txt", table);
    }

    if (do_mnist) {
        HierModel model;
        Dataset test_set;
        const MnistResult r =
            bench_mnist(data_dir, fast, seed, &model, &test_set, mnist_epochs);
        nlohmann::json j;
        j["fast"] = r.fast;
        j["train_samples"] = r.train_size;
        j["test_samples"] = r.test_size;
        j["test_accuracy"] = r.test_accuracy;
        const std::string text = j.dump(2) + "\n";
        std::cout << text;
        if (!out_dir.empty()) {
            save_model(model, out_dir + "/mnist.mnet");
            write_text(out_dir + "/mnist_report.json", text);
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"monotone-by-construction network trainer and analysis toolkit"};
    app.require_subcommand(1);

    // train ------------------------------------------------------------
    TrainFlags tf;
    CLI::App* train_cmd = app.add_subcommand("train", "train a tabular model on a CSV dataset");
    train_cmd->add_option("--data", tf.data, "training CSV (first column = {0,1} outcome)")
        ->required();
    train_cmd->add_option("--out", tf.out_dir, "output directory for model.mnet, history.csv, summary.json")
        ->required();
    train_cmd->add_option("--spec", tf.spec,
                          "comma widths: free layers, then the interpretable width, then "
                          "monotone layers (default 64,64,3,64; the final output width is "
                          "implied)");
    train_cmd->add_option("--interp-index", tf.interp_index,
                          "which width in --spec is the interpretable layer (default: "
                          "second to last)");
    train_cmd->add_option("--config", tf.config, "key=value training config file");
    train_cmd->add_option("--test-fraction", tf.test_fraction,
                          "held-out fraction, 0 trains on everything (default 0.2)");
    train_cmd->add_option("--split-seed", tf.split_seed, "seed for the train/test split (default 0)");
    train_cmd->add_flag("--minmax", tf.minmax, "min-max scale each feature column to [0,1]");
    std::size_t f_epochs = 0, f_batch = 0;
    double f_lr = 0.0, f_wd = 0.0;
    std::string f_opt, f_loss;
    std::uint64_t f_seed = 0;
    auto* o_epochs = train_cmd->add_option("--epochs", f_epochs, "training epochs");
    auto* o_batch = train_cmd->add_option("--batch-size", f_batch, "mini-batch size");
    auto* o_lr = train_cmd->add_option("--learning-rate", f_lr, "step size");
    auto* o_opt = train_cmd->add_option("--optimizer", f_opt, "adam|sgd");
    auto* o_wd = train_cmd->add_option("--weight-decay", f_wd, "L2 coefficient");
    auto* o_seed = train_cmd->add_option("--seed", f_seed, "init + shuffling seed");
    auto* o_loss = train_cmd->add_option("--loss", f_loss, "bce_with_logits|softmax_ce");

    // eval ---------------------------------------------------------------
    std::string e_model, e_data, e_images, e_labels;
    bool e_minmax = false;
    CLI::App* eval_cmd = app.add_subcommand("eval", "accuracy of a saved model on a dataset");
    eval_cmd->add_option("--model", e_model, "model file (.mnet)")->required();
    eval_cmd->add_option("--data", e_data, "CSV dataset (tabular models)");
    eval_cmd->add_option("--images", e_images, "IDX image file (hierarchical models)");
    eval_cmd->add_option("--labels", e_labels, "IDX label file (hierarchical models)");
    eval_cmd->add_flag("--minmax", e_minmax, "min-max scale CSV features");

    // verify -------------------------------------------------------------
    std::string v_model, v_deltas = "0.001,0.1,1.0", v_out;
    std::size_t v_probes = 10000;
    std::uint64_t v_seed = 0;
    CLI::App* verify_cmd = app.add_subcommand(
        "verify", "probe a saved model's monotone directions; exit 0 only when clean");
    verify_cmd->add_option("--model", v_model, "model file (.mnet)")->required();
    verify_cmd->add_option("--probes", v_probes, "random probe points (default 10000)");
    verify_cmd->add_option("--deltas", v_deltas, "comma list of step sizes (default 0.001,0.1,1.0)");
    verify_cmd->add_option("--seed", v_seed, "probe RNG seed");
    verify_cmd->add_option("--out", v_out, "also write the JSON report here");

    // interpret ------------------------------------------------------------
    std::string i_model, i_data, i_format = "text", i_out;
    double i_q = 0.1;
    std::size_t i_topk = 4;
    bool i_minmax = false;
    CLI::App* interpret_cmd =
        app.add_subcommand("interpret", "per-unit top/bottom feature-gap report");
    interpret_cmd->add_option("--model", i_model, "model file (.mnet)")->required();
    interpret_cmd->add_option("--data", i_data, "CSV dataset (training split)")->required();
    interpret_cmd->add_option("--q", i_q, "top/bottom fraction in (0, 0.5] (default 0.1)");
    interpret_cmd->add_option("--top-k", i_topk, "features reported per unit (default 4)");
    interpret_cmd->add_option("--format", i_format, "text|json (default text)");
    interpret_cmd->add_option("--out", i_out, "also write the report here");
    interpret_cmd->add_flag("--minmax", i_minmax, "min-max scale CSV features");

    // baseline -------------------------------------------------------------
    std::string b_data, b_what = "both", b_scores;
    std::size_t b_depth = 6, b_leaf = 5;
    double b_frac = 0.2;
    std::uint64_t b_seed = 0;
    bool b_minmax = false;
    CLI::App* baseline_cmd =
        app.add_subcommand("baseline", "decision-tree and risk-score comparators on a CSV");
    baseline_cmd->add_option("--data", b_data, "CSV dataset")->required();
    baseline_cmd->add_option("--what", b_what, "cart|risk|both (default both)");
    baseline_cmd->add_option("--score-table", b_scores, "points table for the risk comparator");
    baseline_cmd->add_option("--max-depth", b_depth, "tree depth cap (default 6)");
    baseline_cmd->add_option("--min-leaf", b_leaf, "minimum samples per leaf (default 5)");
    baseline_cmd->add_option("--test-fraction", b_frac, "held-out fraction (default 0.2)");
    baseline_cmd->add_option("--split-seed", b_seed, "split seed (default 0)");
    baseline_cmd->add_flag("--minmax", b_minmax, "min-max scale features");

    // trace ------------------------------------------------------------
    std::string t_model, t_images, t_labels, t_maps;
    std::size_t t_sample = 0;
    int t_target = -1;
    CLI::App* trace_cmd = app.add_subcommand(
        "trace", "explanation chain for one image under a hierarchical model");
    trace_cmd->add_option("--model", t_model, "hierarchical model file (.mnet)")->required();
    trace_cmd->add_option("--images", t_images, "IDX image file")->required();
    trace_cmd->add_option("--labels", t_labels, "IDX label file")->required();
    trace_cmd->add_option("--sample", t_sample, "sample index (default 0)");
    trace_cmd->add_option("--target", t_target,
                          "class to explain (default: the model's prediction)");
    trace_cmd->add_option("--maps-dir", t_maps, "write contributing activation maps as PGM here");

    // bench ------------------------------------------------------------
    std::string bn_suite = "risk", bn_data = "data", bn_out;
    std::size_t bn_runs = 10, bn_epochs = 0;
    bool bn_fast = false;
    std::uint64_t bn_seed = 0;
    CLI::App* bench_cmd =
        app.add_subcommand("bench", "accuracy tables across the bundled benchmarks");
    bench_cmd->add_option("--suite", bn_suite, "risk|mnist|all (default risk)");
    bench_cmd->add_option("--data-dir", bn_data, "dataset root (default data)");
    bench_cmd->add_option("--runs", bn_runs, "seeds per dataset (default 10)");
    bench_cmd->add_flag("--fast", bn_fast, "digits: train on the bundled 10k subset");
    bench_cmd->add_option("--seed", bn_seed, "seed for the persisted models (default 0)");
    bench_cmd->add_option("--out", bn_out, "directory for tables and trained models");
    bench_cmd->add_option("--mnist-epochs", bn_epochs, "override the digit recipe's epochs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (train_cmd->parsed()) {
            if (*o_epochs) tf.epochs = f_epochs;
            if (*o_batch) tf.batch_size = f_batch;
            if (*o_lr) tf.learning_rate = f_lr;
            if (*o_opt) tf.optimizer = f_opt;
            if (*o_wd) tf.weight_decay = f_wd;
            if (*o_seed) tf.seed = f_seed;
            if (*o_loss) tf.loss = f_loss;
            return cmd_train(tf);
        }
        if (eval_cmd->parsed()) return cmd_eval(e_model, e_data, e_images, e_labels, e_minmax);
        if (verify_cmd->parsed()) return cmd_verify(v_model, v_probes, v_deltas, v_seed, v_out);
        if (interpret_cmd->parsed()) {
            return cmd_interpret(i_model, i_data, i_q, i_topk, i_format, i_out, i_minmax);
        }
        if (baseline_cmd->parsed()) {
            return cmd_baseline(b_data, b_what, b_scores, b_depth, b_leaf, b_frac, b_seed,
                                b_minmax);
        }
        if (trace_cmd->parsed()) {
            return cmd_trace(t_model, t_images, t_labels, t_sample, t_target, t_maps);
        }
        if (bench_cmd->parsed()) {
            return cmd_bench(bn_suite, bn_data, bn_runs, bn_fast, bn_seed, bn_out, bn_epochs);
        }
        std::cerr << "usage error: no subcommand\n";
        return 1;
    } catch (const DivergedError& e) {
        std::cerr << "diverged: " << e.what() << "\n";
        return 3;
    } catch (const SpecError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const ContractError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
