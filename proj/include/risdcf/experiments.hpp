#pragma once

// Experiment configuration, scenario runners and CSV output for the CLI.
//
// Configuration is a flat key=value file ('#' starts a comment) plus command
// line overrides; an override always beats the file. Unset keys keep the
// defaults below. Sweep keys take either "start:stop:step" (inclusive) or a
// comma list; both must be nonempty and monotone.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "risdcf/des_engine.hpp"
#include "risdcf/mac_analytic.hpp"
#include "risdcf/phy_channel.hpp"

namespace risdcf::exp {

enum class Scenario {
    GainVsPower,
    ThroughputVsLK,
    PayloadSweep,
    WindowSweep,
    TauSweep,
    HopsSweep,
    SimVsAnalytic,
};

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& name);

enum class ModeSelection { Ris, Conventional, Both };

struct ExperimentConfig {
    Scenario scenario = Scenario::ThroughputVsLK;
    std::uint64_t seed = 1;
    std::string output;  // empty: stdout

    phy::ChannelParams channel;
    std::uint64_t samples = 20'000;  // Monte Carlo draws per eta estimate
    mac::MacTimings timings;

    double p = 0.1;
    int L = 5;
    int K = 6;
    int W = 32;
    int n = 3;
    int m = 2;
    bool backoff_exponential = false;  // simulation only; p-persistent otherwise
    std::optional<double> eta = 0.5;  // nullopt: estimate from the channel model

    std::int64_t slots = 1'000'000;
    int retry_limit = 7;
    des::InterfererMode interferers = des::InterfererMode::Pulse;
    ModeSelection mode = ModeSelection::Both;
    double tolerance = 0.05;  // relative, sim against analytic
    unsigned threads = 0;     // 0: hardware concurrency

    // Raw sweep specs keyed by parameter ("power_dbm", "L", "K", "payload_bits",
    // "W", "p", "m", "elements"). Missing keys fall back to scenario defaults.
    std::map<std::string, std::string> sweeps;

    void validate() const;
};

// Every recognised key, in CSV echo order. Sweep keys are "sweep_<param>".
const std::vector<std::string>& config_keys();

// key=value text. ConfigError names the line and key on failure.
ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base = {});
// Flag overrides as (key, value) pairs, applied in order.
ExperimentConfig apply_overrides(ExperimentConfig cfg,
                                 const std::vector<std::pair<std::string, std::string>>& overrides);
// Sets one key; ConfigError on unknown key or unparsable value.
void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string get_key(const ExperimentConfig& cfg, const std::string& key);

// Parses "a:b:s" or "x,y,z". DomainError when empty or not monotone.
std::vector<double> parse_sweep(const std::string& spec);

using Cell = std::variant<std::int64_t, double, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    std::size_t column(const std::string& name) const;  // DomainError if missing
};

std::string format_cell(const Cell& c);  // doubles with 9 significant digits
void write_csv(std::ostream& out, const Table& t);
std::string to_csv(const Table& t);

// One CSV row per sweep point, with the effective configuration echoed first.
Table run_scenario(const ExperimentConfig& cfg);

// Single evaluations behind the eta / analytic / simulate subcommands.
Table eta_table(const ExperimentConfig& cfg);
Table analytic_table(const ExperimentConfig& cfg);
Table simulate_table(const ExperimentConfig& cfg);

struct Comparison {
    Table table;  // keys, analytic, sim, rel_error, tolerance, pass
    bool all_pass = true;
};

// Joins on key_columns. JoinError when either side has a key the other lacks
// or repeats a key.
Comparison compare_report(const Table& analytic, const Table& sim, const std::vector<std::string>& key_columns,
                          const std::string& value_column, double tolerance);

// Analytic against simulated throughput over the sim_vs_analytic grid.
Comparison compare_sim_analytic(const ExperimentConfig& cfg);

}  // namespace risdcf::exp
