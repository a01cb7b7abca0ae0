// risdcf: command line front end for the channel model, the analytic MAC
// model and the event simulator. Output is CSV on stdout or to --output.
//
//   risdcf eta      [--config FILE] [--key value ...]
//   risdcf analytic ...
//   risdcf simulate ...
//   risdcf sweep    --scenario NAME ...
//   risdcf compare  ...
//
// Exit status: 0 ok, 1 bad configuration or failed run, 2 a comparison row
// out of tolerance.

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "risdcf/errors.hpp"
#include "risdcf/experiments.hpp"

namespace {

using risdcf::exp::ExperimentConfig;
using risdcf::exp::Table;

struct SubcommandArgs {
    std::string config_path;
    std::map<std::string, std::string> values;
};

void add_config_flags(CLI::App* sub, SubcommandArgs& args) {
    sub->add_option("--config", args.config_path, "key=value configuration file");
    for (const std::string& key : risdcf::exp::config_keys()) {
        sub->add_option("--" + key, args.values[key], "overrides '" + key + "' from the config file");
    }
}

ExperimentConfig resolve(CLI::App* sub, const SubcommandArgs& args) {
    ExperimentConfig cfg;
    if (!args.config_path.empty()) cfg = risdcf::exp::load_config_file(args.config_path, cfg);
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const std::string& key : risdcf::exp::config_keys()) {
        if (sub->count("--" + key) > 0) overrides.emplace_back(key, args.values.at(key));
    }
    cfg = risdcf::exp::apply_overrides(std::move(cfg), overrides);
    cfg.validate();
    return cfg;
}

void emit(const ExperimentConfig& cfg, const Table& table) {
    if (cfg.output.empty()) {
        risdcf::exp::write_csv(std::cout, table);
        std::cout.flush();
        return;
    }
    std::ofstream out(cfg.output, std::ios::binary);
    if (!out) throw risdcf::ConfigError("output", "cannot write " + cfg.output);
    risdcf::exp::write_csv(out, table);
}

bool all_rows_pass(const Table& table) {
    const std::size_t col = table.column("pass");
    for (const auto& row : table.rows) {
        if (risdcf::exp::format_cell(row[col]) != "true") return false;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RIS-assisted DCF: channel model, analytic throughput and simulation"};
    app.require_subcommand(1);

    SubcommandArgs eta_args, analytic_args, simulate_args, sweep_args, compare_args;
    CLI::App* eta = app.add_subcommand("eta", "RIS efficiency over transmit power and element count");
    CLI::App* analytic = app.add_subcommand("analytic", "closed-form timings, probabilities and throughput");
    CLI::App* simulate = app.add_subcommand("simulate", "one simulation run per link mode");
    CLI::App* sweep = app.add_subcommand("sweep", "run a named scenario");
    CLI::App* compare = app.add_subcommand("compare", "simulated against analytic throughput");
    add_config_flags(eta, eta_args);
    add_config_flags(analytic, analytic_args);
    add_config_flags(simulate, simulate_args);
    add_config_flags(sweep, sweep_args);
    add_config_flags(compare, compare_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (eta->parsed()) {
            const ExperimentConfig cfg = resolve(eta, eta_args);
            emit(cfg, risdcf::exp::eta_table(cfg));
        } else if (analytic->parsed()) {
            const ExperimentConfig cfg = resolve(analytic, analytic_args);
            emit(cfg, risdcf::exp::analytic_table(cfg));
        } else if (simulate->parsed()) {
            const ExperimentConfig cfg = resolve(simulate, simulate_args);
            emit(cfg, risdcf::exp::simulate_table(cfg));
        } else if (sweep->parsed()) {
            const ExperimentConfig cfg = resolve(sweep, sweep_args);
            const Table table = risdcf::exp::run_scenario(cfg);
            emit(cfg, table);
            if (cfg.scenario == risdcf::exp::Scenario::SimVsAnalytic && !all_rows_pass(table)) return 2;
        } else if (compare->parsed()) {
            const ExperimentConfig cfg = resolve(compare, compare_args);
            const risdcf::exp::Comparison cmp = risdcf::exp::compare_sim_analytic(cfg);
            emit(cfg, cmp.table);
            if (!cmp.all_pass) {
                std::cerr << "risdcf: comparison failed: at least one point exceeds tolerance "
                          << cfg.tolerance << "\n";
                return 2;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "risdcf: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
