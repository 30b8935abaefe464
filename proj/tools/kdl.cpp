// Batch experiment driver: each subcommand builds maps or chains from a JSON
// config, runs one experiment, and writes a CSV of rows plus a JSON summary.
// Exit codes: 0 pass, 1 computational or flag failure, 2 usage error.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kdl/experiments.hpp"

#ifndef KDL_BUILD_ID
#define KDL_BUILD_ID "unknown"
#endif

namespace {

using kdl::experiments::njson;

struct CommonOpts {
    std::string config_path;
    std::string out_prefix;
    std::uint64_t seed = 1;
    bool seed_given = false;
    int jobs = 0;
    bool strict = false;
};

void add_common(CLI::App* sub, CommonOpts& o) {
    sub->add_option("--config", o.config_path, "experiment config JSON");
    sub->add_option("--out", o.out_prefix, "output path prefix");
    sub->add_option("--seed", o.seed, "seed override")->each([&](const std::string&) {
        o.seed_given = true;
    });
    int default_jobs = 1;
    if (const char* env = std::getenv("KDL_JOBS")) default_jobs = std::atoi(env);
    o.jobs = default_jobs;
    sub->add_option("--jobs", o.jobs, "max parallel tasks");
    sub->add_flag("--strict", o.strict, "treat empirical-trend failures as errors");
}

int run_one(const std::string& name, const CommonOpts& o) {
    njson config = njson::object();
    if (!o.config_path.empty()) config = kdl::io::read_json_file(o.config_path);
    if (!config.is_object()) throw kdl::ConfigError("config must be a JSON object");
    njson params = config.value("params", config);
    std::uint64_t seed = o.seed_given ? o.seed : config.value("seed", std::uint64_t{1});
    std::string prefix = !o.out_prefix.empty()
                             ? o.out_prefix
                             : config.value("output", name);
    kdl::experiments::ExperimentOutcome outcome =
        kdl::experiments::run_experiment(name, params, seed);
    kdl::experiments::write_outcome(outcome, prefix, config, seed, KDL_BUILD_ID, o.strict);
    if (!outcome.passed(o.strict)) {
        for (const auto& f : outcome.flags)
            if (!f.pass) std::cerr << name << ": flag failed: " << f.name << "\n";
        return 1;
    }
    return 0;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw kdl::ConfigError("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"experiment driver for the k-dilation library"};
    app.require_subcommand(1);
    app.set_version_flag("--version", KDL_BUILD_ID);

    const char* experiments[] = {"dilation_scan", "suspension_sweep", "tube_build",
                                 "deform_suite",  "perp_pair_run",    "hopf_lab",
                                 "squeeze_check", "exponent_table"};
    std::map<std::string, CommonOpts> opts;
    for (const char* name : experiments)
        add_common(app.add_subcommand(name, std::string("run the ") + name + " experiment"),
                   opts[name]);

    std::string plot_report, plot_out = "plot", plot_x, plot_y, plot_series;
    bool plot_log = false;
    CLI::App* plot = app.add_subcommand("emit_plot_data",
                                        "reshape a report CSV into {x,y,series} rows");
    plot->add_option("--report", plot_report, "input report CSV")->required();
    plot->add_option("--out", plot_out, "output path prefix");
    plot->add_option("--x", plot_x, "column for x")->required();
    plot->add_option("--y", plot_y, "column for y")->required();
    plot->add_option("--series", plot_series, "column for the series label");
    plot->add_flag("--log", plot_log, "emit log10 of x and y");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (plot->parsed()) {
            kdl::io::Csv table = kdl::experiments::emit_plot_data(
                slurp(plot_report), plot_x, plot_y, plot_series, plot_log);
            table.write(plot_out + ".csv");
            return 0;
        }
        for (const char* name : experiments)
            if (app.get_subcommand(name)->parsed()) return run_one(name, opts[name]);
    } catch (const kdl::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
