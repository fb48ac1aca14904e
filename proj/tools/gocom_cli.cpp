// Command-line front end for experiment runs.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gocom/checkpoint.hpp"
#include "gocom/config.hpp"
#include "gocom/experiment.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> snr_db;
    std::optional<double> alpha;
    std::optional<std::string> channel;
    std::optional<std::string> task;
    std::optional<std::string> system;
    bool quiet = false;
};

void add_common(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config, "experiment config file")->required()->check(CLI::ExistingFile);
    app->add_option("--seed", o.seed, "base seed");
    app->add_option("--out", o.out, "output directory");
    app->add_option("--snr-db", o.snr_db, "fixed training SNR in dB (or inf)");
    app->add_option("--alpha", o.alpha, "task/communication weighting in [0,1]");
    app->add_option("--channel", o.channel, "channel model")->check(CLI::IsMember({"awgn", "rayleigh"}));
    app->add_option("--task", o.task, "task")->check(CLI::IsMember({"classify", "rl"}));
    app->add_flag("-q,--quiet", o.quiet, "do not echo the log to stderr");
    app->add_option("--system", o.system, "system")->check(CLI::IsMember({"gocom", "jscc", "upper", "random"}));
}

gocom::ExperimentConfig resolve(const Overrides& o) {
    auto cfg = gocom::load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.out) cfg.out = *o.out;
    if (o.task) {
        cfg.task = gocom::parse_task(*o.task);
        if (!o.system && cfg.task == gocom::TaskKind::classify && cfg.system == gocom::SystemKind::random) {
            cfg.system = gocom::SystemKind::gocom;
        }
    }
    if (o.system) cfg.system = gocom::parse_system(*o.system);
    if (o.snr_db) cfg.train_snr = gocom::train::SnrPolicy::at(gocom::channel::Snr::parse(*o.snr_db));
    if (o.alpha) cfg.alpha = *o.alpha;
    if (o.channel) cfg.channel = gocom::channel::parse_kind(*o.channel);
    gocom::validate(cfg);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"goal-oriented communication experiments"};
    app.require_subcommand(1);

    Overrides pre_o, train_o, eval_o, sweep_o, base_o;
    auto* pretrain = app.add_subcommand("pretrain", "pretrain the task head without a channel");
    add_common(pretrain, pre_o);
    auto* train = app.add_subcommand("train", "pretrain, train and evaluate one system");
    add_common(train, train_o);
    auto* eval = app.add_subcommand("eval", "evaluate checkpoints saved in the output directory");
    add_common(eval, eval_o);
    auto* sweep = app.add_subcommand("sweep", "one run per alpha or training SNR, merged metrics");
    add_common(sweep, sweep_o);
    std::string axis;
    std::vector<std::string> values;
    sweep->add_option("--axis", axis, "alpha or snr")->required()->check(CLI::IsMember({"alpha", "snr"}));
    sweep->add_option("--values", values, "axis values")->required()->delimiter(',');
    auto* baseline = app.add_subcommand("baseline", "run the baselines for the task");
    add_common(baseline, base_o);

    CLI11_PARSE(app, argc, argv);

    Overrides& o = pretrain->parsed() ? pre_o
                   : train->parsed()  ? train_o
                   : eval->parsed()   ? eval_o
                   : sweep->parsed()  ? sweep_o
                                      : base_o;
    gocom::ExperimentConfig cfg;
    try {
        cfg = resolve(o);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << o.config << ": " << e.what() << "\n";
        return 2;
    }
    try {
        gocom::RunLog log(cfg.out / gocom::kLogFile, !o.quiet);
        if (pretrain->parsed()) {
            std::cout << gocom::run_pretrain(cfg, log).string() << "\n";
        } else if (train->parsed()) {
            gocom::run_experiment(cfg, log);
        } else if (eval->parsed()) {
            gocom::run_eval(cfg, log);
        } else if (sweep->parsed()) {
            gocom::run_sweep(cfg, gocom::parse_axis(axis), values, log);
        } else {
            gocom::run_baselines(cfg, log);
        }
    } catch (const gocom::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
