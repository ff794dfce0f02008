// longtail: command-line front end for the long-tailed recognition library.

#include "longtail/balancing.hpp"
#include "longtail/config.hpp"
#include "longtail/data.hpp"
#include "longtail/evaluation.hpp"
#include "longtail/experiment.hpp"
#include "longtail/head.hpp"
#include "longtail/report.hpp"
#include "longtail/training.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace longtail;

namespace {

std::ofstream open_output(const fs::path& path)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    return out;
}

ClassProfile profile_for(const std::string& train_file, const Dataset& fallback)
{
    if (train_file.empty()) {
        return class_profile(fallback);
    }
    return class_profile(load_feature_dataset(train_file));
}

// Keys: epochs batch_size lr momentum weight_decay sampler loss focal_gamma
// cb_beta ldam_max_margin seed hidden head.
struct TrainOptions {
    TrainConfig config;
    HeadKind kind = HeadKind::linear;
    std::vector<int> hidden;
};

TrainOptions train_options_from(const std::string& path)
{
    TrainOptions options;
    if (path.empty()) {
        return options;
    }
    auto kv = KeyValueConfig::load(path);
    auto& c = options.config;
    c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
    c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
    c.lr0 = kv.get_real("lr", c.lr0);
    c.momentum = kv.get_real("momentum", c.momentum);
    c.weight_decay = kv.get_real("weight_decay", c.weight_decay);
    c.sampler = SamplingStrategy::from_kind(parse_sampler(kv.get_string("sampler", "instance")),
                                            c.epochs);
    c.loss.kind = parse_loss(kv.get_string("loss", "ce"));
    c.loss.gamma = kv.get_real("focal_gamma", c.loss.gamma);
    c.loss.beta = kv.get_real("cb_beta", c.loss.beta);
    c.loss.max_margin = kv.get_real("ldam_max_margin", c.loss.max_margin);
    c.seed = kv.get_uint("seed", c.seed);
    for (const auto& w : kv.get_list("hidden", {})) {
        options.hidden.push_back(std::stoi(w));
    }
    options.kind = parse_head_kind(
        kv.get_string("head", options.hidden.empty() ? "linear" : "mlp"));
    kv.reject_unknown();
    return options;
}

void print_report(const EvalReport& report)
{
    std::cout << "n_eval " << report.n_eval() << '\n'
              << "all " << format_percent(report.top1_all()) << '\n'
              << "many " << format_percent(report.top1(Split::many)) << '\n'
              << "medium " << format_percent(report.top1(Split::medium)) << '\n'
              << "few " << format_percent(report.top1(Split::few)) << '\n'
              << "class_avg " << format_percent(report.class_average()) << '\n';
}

struct Stage2Options {
    int epochs = ExperimentConfig::default_stage_two().epochs;
    double lr = ExperimentConfig::default_stage_two().lr0;
    int batch_size = 64;
    std::uint64_t seed = 0;
    std::string metric = "cosine";
    std::optional<double> tau;
    std::string grid = "0:1:0.05";
};

void balance(const std::string& method, const std::string& head_file,
             const std::string& train_file, const std::string& val_file,
             const std::string& test_file, const fs::path& out_dir, const Stage2Options& opt)
{
    const auto base = load_head(head_file);
    const auto train = load_feature_dataset(train_file);
    const auto profile = class_profile(train);
    TrainConfig stage_two = ExperimentConfig::default_stage_two();
    stage_two.epochs = opt.epochs;
    stage_two.lr0 = opt.lr;
    stage_two.batch_size = opt.batch_size;
    stage_two.seed = opt.seed;

    ClassifierHead result;
    if (method == "crt") {
        result = crt(base, train, stage_two);
    } else if (method == "ncm") {
        Dataset represented = train;
        represented.features = base.represent(train.features);
        result = ncm_fit(represented, parse_ncm_metric(opt.metric)).to_head();
        result.hidden = base.hidden;
    } else if (method == "tau") {
        double tau = 0.0;
        if (opt.tau) {
            tau = *opt.tau;
        } else {
            const auto grid = parse_tau_grid(opt.grid);
            const auto selection =
                val_file.empty()
                    ? select_tau(base, train, grid, TauObjective::train_class_averaged)
                    : select_tau(base, load_feature_dataset(val_file, true), grid,
                                 TauObjective::val_top1);
            tau = selection.chosen;
        }
        std::cout << "tau " << format_real(tau) << '\n';
        result = tau_normalize(base, tau);
    } else if (method == "lws") {
        result = lws_fit(base, train, stage_two);
    } else if (method == "learn-tau" || method == "learn_tau") {
        LearnTauConfig learn;
        learn.seed = opt.seed;
        const double tau = learn_tau(base, train, learn);
        std::cout << "tau " << format_real(tau) << '\n';
        result = tau_normalize(base, tau);
    } else {
        throw Error("unknown balancing method '" + method + "'");
    }

    fs::create_directories(out_dir);
    save_head(result, out_dir / "head.txt");
    const auto eval = test_file.empty() ? train : load_feature_dataset(test_file, true);
    const auto report = evaluate(result, eval, profile, method);
    auto out = open_output(out_dir / "report.csv");
    write_report_csv(report, ReportContext{"", std::to_string(opt.seed)}, out);
    print_report(report);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Decoupled long-tailed classification toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", LONGTAIL_VERSION);

    std::string config_file;
    std::string output;
    auto* run = app.add_subcommand("run", "Run a full experiment from a config file");
    run->add_option("config", config_file, "Key = value config file")->required();
    run->add_option("-o,--output", output, "Override output_dir");

    std::string spec_file;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic long-tailed dataset");
    gen->add_option("spec", spec_file, "Synthetic spec file (key = value)")->required();
    gen->add_option("-o,--output", output, "Output directory")->required();

    std::string features_file;
    std::string train_config;
    auto* train = app.add_subcommand("train", "Train a classifier head on a feature file");
    train->add_option("features", features_file, "Training feature file")->required();
    train->add_option("config", train_config, "Training config file");
    train->add_option("-o,--output", output, "Output head file")->required();
    std::string history_file;
    train->add_option("--history", history_file, "Write the per-epoch history CSV here");

    std::string head_file;
    std::string train_file;
    auto* eval = app.add_subcommand("eval", "Evaluate a head on a feature file");
    eval->add_option("head", head_file)->required();
    eval->add_option("features", features_file)->required();
    eval->add_option("--train", train_file, "Training file used for the many/medium/few split");
    std::string report_file;
    eval->add_option("--report", report_file, "Write the report CSV here");

    std::string grid = "0:1:0.1";
    auto* sweep = app.add_subcommand("sweep-tau", "Accuracy of tau-normalised heads over a grid");
    sweep->add_option("head", head_file)->required();
    sweep->add_option("features", features_file)->required();
    sweep->add_option("--grid", grid, "lo:hi:step or comma list");
    sweep->add_option("--train", train_file, "Training file used for the splits");

    auto* norms = app.add_subcommand("norms", "Per-class weight norms by descending count");
    norms->add_option("head", head_file)->required();
    norms->add_option("features", features_file, "Training feature file (class counts)")
        ->required();

    std::string method;
    std::string val_file;
    std::string test_file;
    Stage2Options stage2;
    auto* bal = app.add_subcommand("balance", "Second-stage balancing of a trained head");
    bal->add_option("method", method, "crt | ncm | tau | lws | learn-tau")
        ->required()
        ->check(CLI::IsMember({"crt", "ncm", "tau", "lws", "learn-tau", "learn_tau"}));
    bal->add_option("head", head_file)->required();
    bal->add_option("train", train_file)->required();
    bal->add_option("--val", val_file, "Validation file (tau selection)");
    bal->add_option("--test", test_file, "Evaluation file for the report");
    bal->add_option("-o,--output", output, "Output directory")->required();
    bal->add_option("--epochs", stage2.epochs, "crt / lws epochs");
    bal->add_option("--lr", stage2.lr, "crt / lws initial learning rate");
    bal->add_option("--batch-size", stage2.batch_size);
    bal->add_option("--seed", stage2.seed);
    bal->add_option("--metric", stage2.metric, "NCM metric: cosine | euclidean_l2norm");
    bal->add_option("--tau", stage2.tau, "Fixed tau (skips selection)");
    bal->add_option("--grid", stage2.grid, "Tau selection grid");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto config = load_experiment_config(config_file);
            if (!output.empty()) {
                config.output_dir = output;
            }
            const auto result = run_experiment(config);
            std::size_t failed = 0;
            for (const auto& r : result.runs) {
                for (const auto& m : r.methods) {
                    failed += m.error.empty() ? 0 : 1;
                }
            }
            std::cout << "wrote " << (config.output_dir / "summary.md").string() << '\n';
            if (failed > 0) {
                std::cerr << failed << " cell(s) failed, see failures.csv\n";
                return 2;
            }
        } else if (*gen) {
            auto kv = KeyValueConfig::load(spec_file);
            const auto spec = synthetic_spec_from(kv);
            kv.reject_unknown();
            const auto data = generate_longtail(spec);
            const fs::path dir = output;
            fs::create_directories(dir);
            save_feature_dataset(data.train, dir / "train.txt");
            if (data.val.size() > 0) {
                save_feature_dataset(data.val, dir / "val.txt");
            }
            if (data.test.size() > 0) {
                save_feature_dataset(data.test, dir / "test.txt");
            }
            std::cout << "train " << data.train.size() << " val " << data.val.size() << " test "
                      << data.test.size() << '\n';
        } else if (*train) {
            const auto options = train_options_from(train_config);
            const auto data = load_feature_dataset(features_file);
            const auto result = train_head(data, options.config, options.kind, options.hidden);
            if (fs::path(output).has_parent_path()) {
                fs::create_directories(fs::path(output).parent_path());
            }
            save_head(result.head, output);
            if (!history_file.empty()) {
                auto out = open_output(history_file);
                write_history_csv(result.history, out);
            }
            if (!result.history.empty()) {
                const auto& last = result.history.back();
                std::cout << "epochs " << result.history.size() << " final_loss "
                          << format_real(last.mean_loss) << '\n';
            }
        } else if (*eval) {
            const auto head = load_head(head_file);
            const auto data = load_feature_dataset(features_file, true);
            const auto report = evaluate(head, data, profile_for(train_file, data), "eval");
            print_report(report);
            if (!report_file.empty()) {
                auto out = open_output(report_file);
                write_report_csv(report, ReportContext{}, out);
            }
        } else if (*sweep) {
            const auto head = load_head(head_file);
            const auto data = load_feature_dataset(features_file, true);
            const auto rows =
                tau_sweep(head, data, profile_for(train_file, data), parse_tau_grid(grid));
            write_sweep_csv(rows, std::cout);
        } else if (*norms) {
            const auto head = load_head(head_file);
            const auto data = load_feature_dataset(features_file);
            const auto profile = class_profile(data);
            const std::vector<std::string> names{"head"};
            const std::vector<WeightNormProfile> profiles{weight_norm_profile(head, profile)};
            write_norms_csv(profile, names, profiles, std::cout);
            std::cerr << "spearman " << format_real(profiles.front().rank_correlation) << '\n';
        } else if (*bal) {
            balance(method, head_file, train_file, val_file, test_file, output, stage2);
        }
    } catch (const std::exception& e) {
        std::cerr << "longtail: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
