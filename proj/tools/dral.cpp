// dral: run, sweep, plot and check distributionally robust active-learning experiments.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dral/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Distributionally robust active learning for GP regression"};
    app.require_subcommand(1);

    std::string config_path;
    std::string results_dir;
    dral::CommandOptions opts;
    std::string out_dir;
    std::string results_root = "results";

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--set", opts.overrides, "Override a config field, e.g. --set T=5 --set ambiguity.eta=0.01");
        cmd->add_option("--jobs,-j", opts.jobs, "Parallel trials (default: all cores)");
    };

    CLI::App* run = app.add_subcommand("run", "Run the trials of one configuration");
    run->add_option("config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--out,-o", out_dir, "Exact output directory (default: <results-root>/<run-id>)");
    run->add_option("--results-root", results_root, "Parent directory for run outputs");
    add_common(run);

    CLI::App* sweep = app.add_subcommand("sweep", "Run the cross product of the sweep axes in a config");
    sweep->add_option("config", config_path, "Experiment config (JSON) with a 'sweep' section")->required();
    sweep->add_option("--axis", opts.axes, "Axis to sweep: eta, strategy, kernel (repeatable; default: all listed)")
        ->check(CLI::IsMember({"eta", "strategy", "kernel"}));
    sweep->add_flag("--keep-going", opts.keep_going, "Continue after a failed cell");
    sweep->add_option("--out,-o", out_dir, "Exact output directory");
    sweep->add_option("--results-root", results_root, "Parent directory for run outputs");
    add_common(sweep);

    CLI::App* plot = app.add_subcommand("plot", "Render SVG charts from a run or sweep directory");
    plot->add_option("results_dir", results_dir, "Directory holding summary.csv or sweep.csv")->required();

    CLI::App* check = app.add_subcommand("check", "Replay the bound and diagnostic checks");
    check->add_option("target", results_dir, "Results directory or config file")->required();
    add_common(check);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : dral::kExitUsage;
    }

    opts.results_root = results_root;
    if (!out_dir.empty()) opts.out = out_dir;

    if (*run) return dral::cmd_run(config_path, opts);
    if (*sweep) return dral::cmd_sweep(config_path, opts);
    if (*plot) return dral::cmd_plot(results_dir);
    if (*check) return dral::cmd_check(results_dir, opts);
    return dral::kExitUsage;
}
