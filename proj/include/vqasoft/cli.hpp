#pragma once

/**
 * @file cli.hpp
 * @brief The `vqasoft` command line: eval, synth, train and compare.
 *
 * Exit codes: 0 success, 2 input or validation error, 3 numerical failure.
 */

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "answers.hpp"
#include "data.hpp"
#include "error.hpp"
#include "log.hpp"
#include "metric.hpp"
#include "synth.hpp"
#include "trainer.hpp"

namespace vqasoft::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

// ------------------------------------------------------------ report output

inline std::string format_report_table(const AccuracyReport& r) {
    std::string out = "Type     Accuracy  Questions\n";
    char buf[128];
    auto row = [&](const char* name, double acc, std::size_t n) {
        std::snprintf(buf, sizeof(buf), "%-7s %9.2f %10zu\n", name, 100.0 * acc, n);
        out += buf;
    };
    row("All", r.overall, r.count_total());
    row("Y/N", r.yes_no, r.count_yes_no);
    row("Num", r.number, r.count_number);
    row("Other", r.other, r.count_other);
    return out;
}

inline nlohmann::json report_to_json(const AccuracyReport& r) {
    return {{"overall", r.overall},
            {"yes_no", r.yes_no},
            {"number", r.number},
            {"other", r.other},
            {"counts", {{"yes_no", r.count_yes_no}, {"number", r.count_number}, {"other", r.count_other}}}};
}

inline AccuracyReport report_from_json(const nlohmann::json& j) {
    try {
        AccuracyReport r;
        r.overall = j.at("overall").get<double>();
        r.yes_no = j.at("yes_no").get<double>();
        r.number = j.at("number").get<double>();
        r.other = j.at("other").get<double>();
        const auto& c = j.at("counts");
        r.count_yes_no = c.at("yes_no").get<std::size_t>();
        r.count_number = c.at("number").get<std::size_t>();
        r.count_other = c.at("other").get<std::size_t>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("accuracy report: ") + e.what());
    }
}

// ------------------------------------------------------------------ helpers

struct LoadedData {
    Vocabulary vocab;
    FeatureDataset train;
    FeatureDataset val;
};

inline void require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw InputError("missing file " + p.string());
}

inline void prepare_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory " + dir.string());
}

/// Loads a dataset directory. Without vocab.txt the vocabulary is built from
/// the training annotations.
inline LoadedData load_data_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw InputError("data directory " + dir.string() + " does not exist");
    for (Split s : {Split::Train, Split::Validation}) {
        require_file(DatasetLayout::annotations(dir, s));
        require_file(DatasetLayout::features(dir, s));
    }
    const fs::path vocab_path = DatasetLayout::vocabulary(dir);
    Vocabulary vocab = fs::is_regular_file(vocab_path)
                           ? load_vocabulary(vocab_path)
                           : build_vocabulary(load_annotations(DatasetLayout::annotations(dir, Split::Train)), 3000);
    FeatureDataset train = load_split(dir, Split::Train, vocab);
    FeatureDataset val = load_split(dir, Split::Validation, vocab);
    return {std::move(vocab), std::move(train), std::move(val)};
}

inline fs::path curve_path(const fs::path& out, LossMode mode, std::uint64_t seed) {
    return out / ("curve_" + std::string(to_string(mode)) + "_seed" + std::to_string(seed) + ".csv");
}

inline fs::path predictions_path(const fs::path& out, LossMode mode, std::uint64_t seed) {
    return out / ("predictions_" + std::string(to_string(mode)) + "_seed" + std::to_string(seed) + ".json");
}

inline std::string join_epochs(const std::vector<int>& epochs) {
    if (epochs.empty()) return "none";
    std::string s;
    for (std::size_t i = 0; i < epochs.size(); ++i) s += (i ? " " : "") + std::to_string(epochs[i]);
    return s;
}

/// Options shared by train and compare.
struct TrainingOptions {
    std::string data;
    std::string out;
    int epochs = 30;
    std::string arch = "linear";
    std::size_t hidden = 64;
    std::size_t batch_size = 64;
    double lr = 1e-3;

    void add_to(CLI::App* app) {
        app->add_option("--data", data, "Dataset directory")->required();
        app->add_option("--epochs", epochs, "Training epochs")->required()->check(CLI::NonNegativeNumber);
        app->add_option("--out", out, "Output directory")->required();
        app->add_option("--arch", arch, "Model: linear or mlp")->check(CLI::IsMember({"linear", "mlp"}));
        app->add_option("--hidden", hidden, "Hidden units for --arch mlp")->check(CLI::PositiveNumber);
        app->add_option("--batch-size", batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
        app->add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
    }

    ModelConfig model() const { return {arch == "mlp" ? Arch::MLP : Arch::Linear, hidden}; }

    TrainConfig train_config(LossMode mode, std::uint64_t seed) const {
        TrainConfig c;
        c.loss_mode = mode;
        c.epochs = epochs;
        c.seed = seed;
        c.batch_size = batch_size;
        c.learning_rate = lr;
        return c;
    }
};

// ------------------------------------------------------------- subcommands

struct EvalOptions {
    std::string annotations;
    std::string predictions;
    bool json = false;
};

inline int run_eval(const EvalOptions& o, std::ostream& out) {
    require_file(o.annotations);
    require_file(o.predictions);
    const auto sets = load_annotations(o.annotations);
    const auto preds = load_predictions(o.predictions);
    const AccuracyReport r = evaluate(preds, sets);
    if (o.json) out << report_to_json(r).dump(2) << '\n';
    else out << format_report_table(r);
    return kExitOk;
}

struct SynthOptions {
    std::string config;
    std::string out;
};

inline int run_synth(const SynthOptions& o, std::ostream& out) {
    SynthConfig cfg;
    if (!o.config.empty()) {
        require_file(o.config);
        cfg = synth_config_from_json(detail::parse_json(detail::read_file(o.config), o.config));
    }
    prepare_out_dir(o.out);
    const SynthData data = generate(cfg);
    write_dataset(o.out, data);
    out << "wrote " << data.train.size() << " train and " << data.val.size() << " validation questions ("
        << cfg.num_classes << " classes, alpha " << cfg.dirichlet_alpha << ") to " << o.out << '\n';
    return kExitOk;
}

struct TrainOptions {
    TrainingOptions common;
    std::string loss = "soft";
    std::uint64_t seed = 1;
};

inline int run_train(const TrainOptions& o, std::ostream& out) {
    const LoadedData data = load_data_dir(o.common.data);
    prepare_out_dir(o.common.out);
    const LossMode mode = o.loss == "standard" ? LossMode::Standard : LossMode::Soft;
    const TrainResult r = train(data.train, data.val, data.vocab, o.common.model(), o.common.train_config(mode, o.seed));
    if (r.curve.empty()) {
        out << "epochs=0: nothing trained\n";
        return kExitOk;
    }
    const fs::path cpath = curve_path(o.common.out, mode, o.seed);
    save_curves(cpath, r.curve);
    save_predictions(predictions_path(o.common.out, mode, o.seed), r.val_predictions);

    const CurvePoint& best = best_epoch(r.curve);
    out << "loss " << to_string(mode) << ", seed " << o.seed << ": best validation accuracy at epoch " << best.epoch
        << '\n'
        << format_report_table(best.val_accuracy);
    out << "epochs with rising validation loss and accuracy: " << join_epochs(discrepancy_epochs(load_curves(cpath)))
        << '\n';
    return kExitOk;
}

struct CompareOptions {
    TrainingOptions common;
    std::vector<std::uint64_t> seeds;
};

/// Best-epoch accuracy statistics over seeds for one loss mode.
struct ModeSummary {
    std::array<std::vector<double>, 4> best; // All, Y/N, Num, Other

    void add(const AccuracyReport& r) {
        best[0].push_back(r.overall);
        best[1].push_back(r.yes_no);
        best[2].push_back(r.number);
        best[3].push_back(r.other);
    }
    double mean(std::size_t col) const {
        double s = 0.0;
        for (double v : best[col]) s += v;
        return s / static_cast<double>(best[col].size());
    }
    double min(std::size_t col) const { return *std::min_element(best[col].begin(), best[col].end()); }
    double max(std::size_t col) const { return *std::max_element(best[col].begin(), best[col].end()); }
};

inline std::string format_compare_summary(const ModeSummary& standard, const ModeSummary& soft, std::size_t n_seeds) {
    std::string s = "Best validation accuracy (%), mean [min, max] over " + std::to_string(n_seeds) + " seed(s)\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-13s %6s%17s%6s%17s%6s%17s%6s\n", "Loss", "All", "", "Y/N", "", "Num", "",
                  "Other");
    s += buf;
    for (const auto& [name, m] : {std::pair<const char*, const ModeSummary*>{"Cross Entropy", &standard},
                                  std::pair<const char*, const ModeSummary*>{"Soft CE", &soft}}) {
        std::snprintf(buf, sizeof(buf), "%-13s", name);
        s += buf;
        for (std::size_t c = 0; c < 4; ++c) {
            std::snprintf(buf, sizeof(buf), " %6.2f [%6.2f,%6.2f]", 100.0 * m->mean(c), 100.0 * m->min(c),
                          100.0 * m->max(c));
            s += buf;
        }
        s += '\n';
    }
    std::snprintf(buf, sizeof(buf), "%-13s", "Soft - CE");
    s += buf;
    for (std::size_t c = 0; c < 4; ++c) {
        std::snprintf(buf, sizeof(buf), c < 3 ? " %+6.2f%16s" : " %+6.2f", 100.0 * (soft.mean(c) - standard.mean(c)), "");
        s += buf;
    }
    s += '\n';
    return s;
}

inline int run_compare(const CompareOptions& o, std::ostream& out) {
    if (o.seeds.empty()) throw InputError("compare: --seeds is empty");
    const LoadedData data = load_data_dir(o.common.data);
    prepare_out_dir(o.common.out);
    if (o.common.epochs == 0) throw InputError("compare: --epochs must be positive");

    ModeSummary standard;
    ModeSummary soft;
    std::string discrepancy;
    // Seeds run one after another; each run writes only its own files.
    for (std::uint64_t seed : o.seeds) {
        for (LossMode mode : {LossMode::Standard, LossMode::Soft}) {
            const TrainResult r =
                train(data.train, data.val, data.vocab, o.common.model(), o.common.train_config(mode, seed));
            const fs::path cpath = curve_path(o.common.out, mode, seed);
            save_curves(cpath, r.curve);
            (mode == LossMode::Standard ? standard : soft).add(best_epoch(r.curve).val_accuracy);
            if (mode == LossMode::Standard) {
                discrepancy += "  seed " + std::to_string(seed) + ": " +
                               join_epochs(discrepancy_epochs(load_curves(cpath))) + "\n";
            }
            log::info("finished ", to_string(mode), " seed ", seed);
        }
    }

    std::string summary = format_compare_summary(standard, soft, o.seeds.size());
    summary += "Cross entropy epochs with rising validation loss and accuracy:\n" + discrepancy;
    detail::write_file_atomic(fs::path(o.common.out) / "summary.txt", summary);
    out << summary;
    return kExitOk;
}

// --------------------------------------------------------------------- main

inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) throw InputError("--seeds: empty entry in \"" + text + "\"");
        seeds.push_back(detail::parse_uint(item, "--seeds"));
    }
    if (seeds.empty()) throw InputError("--seeds: no seeds given");
    return seeds;
}

/// Parses @p args (args[0] is the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Soft cross entropy and VQA accuracy toolkit", "vqasoft"};
    app.require_subcommand(1, 1);

    EvalOptions eval_opts;
    auto* eval = app.add_subcommand("eval", "Score predictions against annotations");
    eval->add_option("--annotations", eval_opts.annotations, "Annotation JSON")->required();
    eval->add_option("--predictions", eval_opts.predictions, "Prediction JSON")->required();
    eval->add_flag("--json", eval_opts.json, "Print the report as JSON");

    SynthOptions synth_opts;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--config", synth_opts.config, "Generator config JSON (defaults when omitted)");
    synth->add_option("--out", synth_opts.out, "Output directory")->required();

    TrainOptions train_opts;
    auto* train_cmd = app.add_subcommand("train", "Train one model and write its curve");
    train_opts.common.add_to(train_cmd);
    train_cmd->add_option("--loss", train_opts.loss, "standard or soft")
        ->required()
        ->check(CLI::IsMember({"standard", "soft"}));
    train_cmd->add_option("--seed", train_opts.seed, "Seed for initialization and shuffling")->required();

    CompareOptions compare_opts;
    std::string seeds_text;
    auto* compare = app.add_subcommand("compare", "Train both losses over several seeds");
    compare_opts.common.add_to(compare);
    compare->add_option("--seeds", seeds_text, "Comma-separated seeds, e.g. 1,2,3")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }

    try {
        if (*eval) return run_eval(eval_opts, out);
        if (*synth) return run_synth(synth_opts, out);
        if (*train_cmd) return run_train(train_opts, out);
        compare_opts.seeds = parse_seed_list(seeds_text);
        return run_compare(compare_opts, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}

} // namespace vqasoft::cli
