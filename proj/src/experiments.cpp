#include "risdcf/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

namespace risdcf::exp {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

double to_double(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
        throw ConfigError(key, "expected a number, got '" + raw + "'");
    }
    return out;
}

template <class Int>
Int to_int(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    Int out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
        throw ConfigError(key, "expected an integer, got '" + raw + "'");
    }
    return out;
}

struct KeyDef {
    std::string name;
    bool echoed;  // part of the per-row configuration echo
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <class Member>
KeyDef double_key(std::string name, Member member) {
    return KeyDef{name, true,
                  [name, member](ExperimentConfig& c, const std::string& v) { member(c) = to_double(name, v); },
                  [member](const ExperimentConfig& c) { return fmt(member(const_cast<ExperimentConfig&>(c))); }};
}

template <class Int, class Member>
KeyDef int_key(std::string name, Member member) {
    return KeyDef{name, true,
                  [name, member](ExperimentConfig& c, const std::string& v) { member(c) = to_int<Int>(name, v); },
                  [member](const ExperimentConfig& c) {
                      return std::to_string(member(const_cast<ExperimentConfig&>(c)));
                  }};
}

const std::vector<std::string> kSweepParams = {"power_dbm", "elements", "L", "K", "payload_bits", "W", "p", "m"};

const std::vector<KeyDef>& key_defs() {
    static const std::vector<KeyDef> defs = [] {
        std::vector<KeyDef> d;
        d.push_back({"scenario", true,
                     [](ExperimentConfig& c, const std::string& v) { c.scenario = parse_scenario(trim(v)); },
                     [](const ExperimentConfig& c) { return to_string(c.scenario); }});
        d.push_back(int_key<std::uint64_t>("seed", [](ExperimentConfig& c) -> std::uint64_t& { return c.seed; }));
        d.push_back(double_key("frequency_hz", [](ExperimentConfig& c) -> double& { return c.channel.frequency_hz; }));
        d.push_back(double_key("distance_m", [](ExperimentConfig& c) -> double& { return c.channel.distance_m; }));
        d.push_back(double_key("nakagami_m", [](ExperimentConfig& c) -> double& { return c.channel.nakagami_m; }));
        d.push_back(double_key("nakagami_omega", [](ExperimentConfig& c) -> double& { return c.channel.nakagami_omega; }));
        d.push_back(double_key("noise_dbm", [](ExperimentConfig& c) -> double& { return c.channel.noise_power_dbm; }));
        d.push_back(double_key("power_dbm", [](ExperimentConfig& c) -> double& { return c.channel.transmit_power_dbm; }));
        d.push_back(int_key<int>("elements", [](ExperimentConfig& c) -> int& { return c.channel.num_elements; }));
        d.push_back(int_key<std::uint64_t>("samples", [](ExperimentConfig& c) -> std::uint64_t& { return c.samples; }));
        d.push_back(int_key<std::int64_t>("rate_bps", [](ExperimentConfig& c) -> std::int64_t& { return c.timings.base_rate_bps; }));
        d.push_back(double_key("sifs_us", [](ExperimentConfig& c) -> double& { return c.timings.sifs_us; }));
        d.push_back(double_key("difs_us", [](ExperimentConfig& c) -> double& { return c.timings.difs_us; }));
        d.push_back(double_key("slot_us", [](ExperimentConfig& c) -> double& { return c.timings.slot_us; }));
        d.push_back(int_key<std::int64_t>("rrts_bits", [](ExperimentConfig& c) -> std::int64_t& { return c.timings.rrts_bits; }));
        d.push_back(int_key<std::int64_t>("rcts_bits", [](ExperimentConfig& c) -> std::int64_t& { return c.timings.rcts_bits; }));
        d.push_back(int_key<std::int64_t>("ack_bits", [](ExperimentConfig& c) -> std::int64_t& { return c.timings.ack_bits; }));
        d.push_back(int_key<std::int64_t>("phy_header_bits", [](ExperimentConfig& c) -> std::int64_t& { return c.timings.phy_header_bits; }));
        d.push_back(int_key<std::int64_t>("mac_header_bits", [](ExperimentConfig& c) -> std::int64_t& { return c.timings.mac_header_bits; }));
        d.push_back(int_key<std::int64_t>("payload_bits", [](ExperimentConfig& c) -> std::int64_t& { return c.timings.payload_bits; }));
        d.push_back(double_key("p", [](ExperimentConfig& c) -> double& { return c.p; }));
        d.push_back(int_key<int>("L", [](ExperimentConfig& c) -> int& { return c.L; }));
        d.push_back(int_key<int>("K", [](ExperimentConfig& c) -> int& { return c.K; }));
        d.push_back(int_key<int>("W", [](ExperimentConfig& c) -> int& { return c.W; }));
        d.push_back(int_key<int>("n", [](ExperimentConfig& c) -> int& { return c.n; }));
        d.push_back(int_key<int>("m", [](ExperimentConfig& c) -> int& { return c.m; }));
        d.push_back({"eta", true,
                     [](ExperimentConfig& c, const std::string& v) {
                         if (trim(v) == "auto") c.eta.reset();
                         else c.eta = to_double("eta", v);
                     },
                     [](const ExperimentConfig& c) { return c.eta ? fmt(*c.eta) : std::string("auto"); }});
        d.push_back({"backoff", true,
                     [](ExperimentConfig& c, const std::string& v) {
                         const std::string t = trim(v);
                         if (t == "p_persistent") c.backoff_exponential = false;
                         else if (t == "exponential") c.backoff_exponential = true;
                         else throw ConfigError("backoff", "expected p_persistent or exponential, got '" + v + "'");
                     },
                     [](const ExperimentConfig& c) {
                         return std::string(c.backoff_exponential ? "exponential" : "p_persistent");
                     }});
        d.push_back(int_key<std::int64_t>("slots", [](ExperimentConfig& c) -> std::int64_t& { return c.slots; }));
        d.push_back(int_key<int>("retry_limit", [](ExperimentConfig& c) -> int& { return c.retry_limit; }));
        d.push_back({"interferers", true,
                     [](ExperimentConfig& c, const std::string& v) {
                         const std::string t = trim(v);
                         if (t == "pulse") c.interferers = des::InterfererMode::Pulse;
                         else if (t == "full") c.interferers = des::InterfererMode::FullTraffic;
                         else throw ConfigError("interferers", "expected pulse or full, got '" + v + "'");
                     },
                     [](const ExperimentConfig& c) {
                         return std::string(c.interferers == des::InterfererMode::Pulse ? "pulse" : "full");
                     }});
        d.push_back({"mode", true,
                     [](ExperimentConfig& c, const std::string& v) {
                         const std::string t = trim(v);
                         if (t == "ris") c.mode = ModeSelection::Ris;
                         else if (t == "conventional") c.mode = ModeSelection::Conventional;
                         else if (t == "both") c.mode = ModeSelection::Both;
                         else throw ConfigError("mode", "expected ris, conventional or both, got '" + v + "'");
                     },
                     [](const ExperimentConfig& c) {
                         switch (c.mode) {
                             case ModeSelection::Ris: return std::string("ris");
                             case ModeSelection::Conventional: return std::string("conventional");
                             case ModeSelection::Both: break;
                         }
                         return std::string("both");
                     }});
        d.push_back(double_key("tolerance", [](ExperimentConfig& c) -> double& { return c.tolerance; }));
        d.push_back({"output", false, [](ExperimentConfig& c, const std::string& v) { c.output = trim(v); },
                     [](const ExperimentConfig& c) { return c.output; }});
        d.push_back(int_key<unsigned>("threads", [](ExperimentConfig& c) -> unsigned& { return c.threads; }));
        d.back().echoed = false;
        for (const std::string& param : kSweepParams) {
            const std::string key = "sweep_" + param;
            d.push_back({key, false,
                         [param](ExperimentConfig& c, const std::string& v) {
                             parse_sweep(v);  // reject early
                             c.sweeps[param] = trim(v);
                         },
                         [param](const ExperimentConfig& c) {
                             const auto it = c.sweeps.find(param);
                             return it == c.sweeps.end() ? std::string() : it->second;
                         }});
        }
        return d;
    }();
    return defs;
}

const KeyDef& find_key(const std::string& key) {
    for (const KeyDef& d : key_defs()) {
        if (d.name == key) return d;
    }
    throw ConfigError(key, "unknown configuration key");
}

}  // namespace

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::GainVsPower: return "gain_vs_power";
        case Scenario::ThroughputVsLK: return "throughput_vs_LK";
        case Scenario::PayloadSweep: return "payload_sweep";
        case Scenario::WindowSweep: return "window_sweep";
        case Scenario::TauSweep: return "tau_sweep";
        case Scenario::HopsSweep: return "hops_sweep";
        case Scenario::SimVsAnalytic: return "sim_vs_analytic";
    }
    return "?";
}

Scenario parse_scenario(const std::string& name) {
    for (Scenario s : {Scenario::GainVsPower, Scenario::ThroughputVsLK, Scenario::PayloadSweep,
                       Scenario::WindowSweep, Scenario::TauSweep, Scenario::HopsSweep,
                       Scenario::SimVsAnalytic}) {
        if (to_string(s) == name) return s;
    }
    throw ConfigError("scenario", "unknown scenario '" + name + "'");
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const KeyDef& d : key_defs()) k.push_back(d.name);
        return k;
    }();
    return keys;
}

void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    find_key(key).set(cfg, value);
}

std::string get_key(const ExperimentConfig& cfg, const std::string& key) { return find_key(key).get(cfg); }

std::vector<double> parse_sweep(const std::string& raw) {
    const std::string spec = trim(raw);
    if (spec.empty()) throw DomainError("empty sweep");
    std::vector<double> values;
    if (spec.find(':') != std::string::npos) {
        std::vector<double> parts;
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ':')) parts.push_back(to_double("sweep", item));
        if (parts.size() != 3) throw DomainError("range sweep must be start:stop:step");
        const double start = parts[0], stop = parts[1], step = parts[2];
        if (!(step > 0.0)) throw DomainError("sweep step must be positive");
        if (stop < start) throw DomainError("sweep range must be increasing");
        const auto count = static_cast<std::int64_t>(std::floor((stop - start) / step + 1e-9)) + 1;
        if (count > 1'000'000) throw DomainError("sweep has too many points");
        for (std::int64_t i = 0; i < count; ++i) values.push_back(start + static_cast<double>(i) * step);
    } else {
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ',')) values.push_back(to_double("sweep", item));
    }
    if (values.empty()) throw DomainError("empty sweep");
    const bool up = std::is_sorted(values.begin(), values.end());
    const bool down = std::is_sorted(values.rbegin(), values.rend());
    if (!up && !down) throw DomainError("sweep values must be monotone");
    return values;
}

ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig cfg) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("", "line " + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        try {
            set_key(cfg, key, line.substr(eq + 1));
        } catch (const ConfigError& e) {
            std::string msg = e.what();
            const std::string prefix = e.key() + ": ";
            if (!e.key().empty() && msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
            throw ConfigError(key, "line " + std::to_string(lineno) + ": " + msg);
        } catch (const std::exception& e) {
            throw ConfigError(key, "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot read " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), std::move(base));
}

ExperimentConfig apply_overrides(ExperimentConfig cfg,
                                 const std::vector<std::pair<std::string, std::string>>& overrides) {
    for (const auto& [key, value] : overrides) {
        try {
            set_key(cfg, key, value);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(key, std::string("--") + key + ": " + e.what());
        }
    }
    return cfg;
}

void ExperimentConfig::validate() const {
    auto wrap = [](const std::string& key, auto&& fn) {
        try {
            fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(key, e.what());
        }
    };
    wrap("channel", [&] { channel.validate(); });
    wrap("timings", [&] { timings.validate(); });
    if (samples < 1) throw ConfigError("samples", "must be >= 1");
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p", "must lie in [0, 1]");
    if (L < 1) throw ConfigError("L", "must be >= 1");
    if (K < 1) throw ConfigError("K", "must be >= 1");
    if (W < 1) throw ConfigError("W", "must be >= 1");
    if (n < 0 || n > 30) throw ConfigError("n", "must lie in [0, 30]");
    if (m < 1) throw ConfigError("m", "must be >= 1");
    if (eta && !(*eta > 0.0)) throw ConfigError("eta", "must be positive or 'auto'");
    if (slots < 1) throw ConfigError("slots", "must be >= 1");
    if (retry_limit < 0) throw ConfigError("retry_limit", "must be >= 0");
    if (!(tolerance > 0.0)) throw ConfigError("tolerance", "must be positive");
    for (const auto& [param, spec] : sweeps) {
        wrap("sweep_" + param, [&] { parse_sweep(spec); });
    }
}

// ---- tables ---------------------------------------------------------------

std::size_t Table::column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw DomainError("no column named " + name);
    return static_cast<std::size_t>(it - columns.begin());
}

std::string format_cell(const Cell& c) {
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&c)) return fmt(*d);
    return std::get<std::string>(c);
}

void write_csv(std::ostream& out, const Table& t) {
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
    out << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_cell(row[i]);
        out << '\n';
    }
}

std::string to_csv(const Table& t) {
    std::ostringstream out;
    write_csv(out, t);
    return out.str();
}

namespace {

std::vector<std::string> echo_columns() {
    std::vector<std::string> cols;
    for (const KeyDef& d : key_defs()) {
        if (d.echoed) cols.push_back(d.name);
    }
    return cols;
}

std::vector<Cell> echo_cells(const ExperimentConfig& c) {
    std::vector<Cell> cells;
    for (const KeyDef& d : key_defs()) {
        if (d.echoed) cells.emplace_back(d.get(c));
    }
    return cells;
}

Table make_table(const std::vector<std::string>& outputs) {
    Table t;
    t.columns = echo_columns();
    t.columns.insert(t.columns.end(), outputs.begin(), outputs.end());
    return t;
}

void add_row(Table& t, const ExperimentConfig& point, std::vector<Cell> outputs) {
    std::vector<Cell> row = echo_cells(point);
    row.insert(row.end(), std::make_move_iterator(outputs.begin()), std::make_move_iterator(outputs.end()));
    t.rows.push_back(std::move(row));
}

std::vector<double> sweep_or(const ExperimentConfig& c, const std::string& param, const std::string& fallback) {
    const auto it = c.sweeps.find(param);
    return parse_sweep(it == c.sweeps.end() ? fallback : it->second);
}

int as_int(const std::string& param, double v) {
    if (std::floor(v) != v || std::abs(v) > 1e9) {
        throw ConfigError("sweep_" + param, "expects integers, got " + fmt(v));
    }
    return static_cast<int>(v);
}

double resolve_eta(const ExperimentConfig& c) {
    if (c.eta) return *c.eta;
    return phy::ris_efficiency(c.channel, c.samples, c.seed);
}

struct AnalyticPoint {
    double t_ris_us = 0.0;
    double s_r = 0.0;
    double s_c = 0.0;
    double kappa = 0.0;
};

double safe_gain(double s_r, double s_c) {
    if (!(s_c > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return mac::throughput_gain(s_r, s_c);
}

AnalyticPoint evaluate(const ExperimentConfig& c, double p, double eta) {
    const mac::ContentionConfig cc{p, c.L, c.K, c.m};
    AnalyticPoint out;
    out.t_ris_us = phy::ris_transmission_time(c.timings.data_us(), eta);
    out.s_r = mac::multihop_throughput(cc, c.timings, mac::LinkMode::Ris, eta).throughput_bps;
    out.s_c = mac::multihop_throughput(cc, c.timings, mac::LinkMode::Conventional, eta).throughput_bps;
    out.kappa = safe_gain(out.s_r, out.s_c);
    return out;
}

// Rethrows module errors with the sweep point attached.
template <class Fn>
auto at_point(const std::string& where, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const DomainError& e) {
        throw DomainError(where + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(where + ": " + e.what());
    } catch (const SimulationError& e) {
        throw SimulationError(where + ": " + e.what());
    }
}

std::vector<mac::LinkMode> selected_modes(const ExperimentConfig& c) {
    switch (c.mode) {
        case ModeSelection::Ris: return {mac::LinkMode::Ris};
        case ModeSelection::Conventional: return {mac::LinkMode::Conventional};
        case ModeSelection::Both: break;
    }
    return {mac::LinkMode::Ris, mac::LinkMode::Conventional};
}

des::SimConfig sim_config(const ExperimentConfig& c, mac::LinkMode mode, double eta) {
    des::SimConfig s;
    s.topology = des::Topology::chain(c.m, c.L, c.K, mode, c.interferers);
    s.timings = c.timings;
    s.backoff = c.backoff_exponential ? protocol::BackoffPolicy::exponential(c.W, c.n)
                                      : protocol::BackoffPolicy::p_persistent(c.p);
    s.backoff.p = c.p;  // second-hop interferer pulses use p in either mode
    s.eta = eta;
    s.budget = des::Budget::of_slots(c.slots);
    s.seed = c.seed;
    s.retry_limit = c.retry_limit;
    return s;
}

std::string describe(const ExperimentConfig& c) {
    std::ostringstream s;
    s << to_string(c.scenario) << " point (p=" << fmt(c.p) << ", L=" << c.L << ", K=" << c.K << ", m=" << c.m
      << ", W=" << c.W << ", payload_bits=" << c.timings.payload_bits
      << ", power_dbm=" << fmt(c.channel.transmit_power_dbm) << ")";
    return s.str();
}

// ---- scenarios

Table gain_vs_power(const ExperimentConfig& c) {
    Table t = make_table({"eta_used", "rate_ris", "rate_conv", "t_ris_us", "S_R_bps", "S_C_bps", "kappa"});
    for (double power : sweep_or(c, "power_dbm", "0:100:10")) {
        ExperimentConfig pt = c;
        pt.channel.transmit_power_dbm = power;
        at_point(describe(pt), [&] {
            pt.validate();
            const phy::EfficiencyEstimate e = phy::ris_efficiency_estimate(pt.channel, pt.samples, pt.seed);
            const AnalyticPoint a = evaluate(pt, pt.p, e.eta);
            add_row(t, pt, {e.eta, e.ris.mean, e.conventional.mean, a.t_ris_us, a.s_r, a.s_c, a.kappa});
            return 0;
        });
    }
    return t;
}

Table throughput_vs_lk(const ExperimentConfig& c) {
    Table t = make_table({"eta_used", "t_ris_us", "S_R_bps", "S_C_bps", "kappa"});
    const double eta = resolve_eta(c);
    for (double l : sweep_or(c, "L", "2:30:2")) {
        for (double k : sweep_or(c, "K", "2:30:2")) {
            ExperimentConfig pt = c;
            pt.L = as_int("L", l);
            pt.K = as_int("K", k);
            at_point(describe(pt), [&] {
                pt.validate();
                const AnalyticPoint a = evaluate(pt, pt.p, eta);
                add_row(t, pt, {eta, a.t_ris_us, a.s_r, a.s_c, a.kappa});
                return 0;
            });
        }
    }
    return t;
}

Table payload_sweep(const ExperimentConfig& c) {
    Table t = make_table({"eta_used", "t_data_us", "t_ris_us", "S_R_bps", "S_C_bps", "kappa"});
    const double eta = resolve_eta(c);
    for (double bits : sweep_or(c, "payload_bits", "1000:16000:1000")) {
        ExperimentConfig pt = c;
        pt.timings.payload_bits = as_int("payload_bits", bits);
        at_point(describe(pt), [&] {
            pt.validate();
            const AnalyticPoint a = evaluate(pt, pt.p, eta);
            add_row(t, pt, {eta, pt.timings.data_us(), a.t_ris_us, a.s_r, a.s_c, a.kappa});
            return 0;
        });
    }
    return t;
}

Table window_sweep(const ExperimentConfig& c) {
    Table t = make_table({"p_mapped", "p_mapping", "bianchi_iterations", "eta_used", "S_R_bps", "S_C_bps", "kappa"});
    const double eta = resolve_eta(c);
    for (double w : sweep_or(c, "W", "8,16,32,64,128,256")) {
        ExperimentConfig pt = c;
        pt.W = as_int("W", w);
        at_point(describe(pt), [&] {
            pt.validate();
            const mac::BianchiSolution b = mac::solve_bianchi(pt.W, pt.n, pt.L);
            const AnalyticPoint a = evaluate(pt, b.tau, eta);
            add_row(t, pt,
                    {b.tau, std::string("bianchi(W;n;contenders=L)"), std::int64_t{b.iterations}, eta, a.s_r,
                     a.s_c, a.kappa});
            return 0;
        });
    }
    return t;
}

Table tau_sweep(const ExperimentConfig& c) {
    Table t = make_table({"eta_used", "S_R_bps", "S_C_bps", "kappa"});
    const double eta = resolve_eta(c);
    for (double p : sweep_or(c, "p", "0:0.5:0.02")) {
        ExperimentConfig pt = c;
        pt.p = p;
        at_point(describe(pt), [&] {
            pt.validate();
            const AnalyticPoint a = evaluate(pt, pt.p, eta);
            add_row(t, pt, {eta, a.s_r, a.s_c, a.kappa});
            return 0;
        });
    }
    return t;
}

Table hops_sweep(const ExperimentConfig& c) {
    Table t = make_table({"eta_used", "success_time_ris_us", "success_time_conv_us", "S_R_bps", "S_C_bps", "kappa"});
    const double eta = resolve_eta(c);
    for (double m : sweep_or(c, "m", "1:8:1")) {
        ExperimentConfig pt = c;
        pt.m = as_int("m", m);
        at_point(describe(pt), [&] {
            pt.validate();
            const mac::TimingSet ris = mac::timing_set_ris(pt.timings, phy::ris_transmission_time(pt.timings.data_us(), eta));
            const mac::TimingSet conv = mac::timing_set_conventional(pt.timings);
            const double ts_r = mac::multihop_success_time(pt.m, ris, conv);
            const double ts_c = pt.m * (conv.t_success_us / 2.0);
            const AnalyticPoint a = evaluate(pt, pt.p, eta);
            add_row(t, pt, {eta, ts_r, ts_c, a.s_r, a.s_c, a.kappa});
            return 0;
        });
    }
    return t;
}

struct GridPoint {
    ExperimentConfig cfg;
    mac::LinkMode mode;
};

std::vector<GridPoint> sim_grid(const ExperimentConfig& c) {
    std::vector<GridPoint> grid;
    const std::string p_default = fmt(c.p);
    for (double p : sweep_or(c, "p", p_default)) {
        for (double l : sweep_or(c, "L", std::to_string(c.L))) {
            for (double k : sweep_or(c, "K", std::to_string(c.K))) {
                ExperimentConfig pt = c;
                pt.p = p;
                pt.L = as_int("L", l);
                pt.K = as_int("K", k);
                pt.validate();
                for (mac::LinkMode mode : selected_modes(c)) grid.push_back({pt, mode});
            }
        }
    }
    return grid;
}

std::vector<des::SimMetrics> run_grid(const ExperimentConfig& c, const std::vector<GridPoint>& grid, double eta) {
    std::vector<des::SimConfig> runs;
    runs.reserve(grid.size());
    for (const GridPoint& g : grid) runs.push_back(sim_config(g.cfg, g.mode, eta));
    try {
        return des::run_batch(runs, c.threads);
    } catch (const SimulationError& e) {
        throw SimulationError(std::string("sim_vs_analytic: ") + e.what());
    }
}

double analytic_for(const ExperimentConfig& pt, mac::LinkMode mode, double eta) {
    const mac::ContentionConfig cc{pt.p, pt.L, pt.K, pt.m};
    return mac::multihop_throughput(cc, pt.timings, mode, eta).throughput_bps;
}

double relative_error(double analytic, double sim) {
    if (analytic == sim) return 0.0;
    if (analytic == 0.0) return std::numeric_limits<double>::infinity();
    return std::abs(sim - analytic) / std::abs(analytic);
}

Table sim_vs_analytic(const ExperimentConfig& c) {
    Table t = make_table({"link_mode", "eta_used", "analytic_bps", "sim_bps", "rel_error", "tolerance", "pass",
                          "slots_observed", "P_I_hat", "P_S1_hat", "P_C1_hat", "P_S2_hat"});
    const double eta = resolve_eta(c);
    const std::vector<GridPoint> grid = sim_grid(c);
    const std::vector<des::SimMetrics> metrics = run_grid(c, grid, eta);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const GridPoint& g = grid[i];
        const double a = analytic_for(g.cfg, g.mode, eta);
        const double s = metrics[i].throughput_bps();
        const double err = relative_error(a, s);
        const des::EventFractions f = des::measure_event_fractions(metrics[i]);
        add_row(t, g.cfg,
                {std::string(mac::to_string(g.mode)), eta, a, s, err, c.tolerance,
                 std::string(err <= c.tolerance ? "true" : "false"),
                 static_cast<std::int64_t>(metrics[i].hop1_slots()), f.idle, f.success1, f.collision1, f.success2});
    }
    return t;
}

}  // namespace

Table run_scenario(const ExperimentConfig& cfg) {
    cfg.validate();
    switch (cfg.scenario) {
        case Scenario::GainVsPower: return gain_vs_power(cfg);
        case Scenario::ThroughputVsLK: return throughput_vs_lk(cfg);
        case Scenario::PayloadSweep: return payload_sweep(cfg);
        case Scenario::WindowSweep: return window_sweep(cfg);
        case Scenario::TauSweep: return tau_sweep(cfg);
        case Scenario::HopsSweep: return hops_sweep(cfg);
        case Scenario::SimVsAnalytic: return sim_vs_analytic(cfg);
    }
    throw DomainError("unknown scenario");
}

Table eta_table(const ExperimentConfig& cfg) {
    cfg.validate();
    Table t = make_table({"eta", "rate_ris", "rate_ris_se", "rate_conv", "rate_conv_se"});
    for (double power : sweep_or(cfg, "power_dbm", fmt(cfg.channel.transmit_power_dbm))) {
        for (double n : sweep_or(cfg, "elements", "4,8,16,64")) {
            ExperimentConfig pt = cfg;
            pt.channel.transmit_power_dbm = power;
            pt.channel.num_elements = as_int("elements", n);
            at_point(describe(pt), [&] {
                pt.validate();
                const phy::EfficiencyEstimate e = phy::ris_efficiency_estimate(pt.channel, pt.samples, pt.seed);
                add_row(t, pt,
                        {e.eta, e.ris.mean, e.ris.std_error, e.conventional.mean, e.conventional.std_error});
                return 0;
            });
        }
    }
    return t;
}

Table analytic_table(const ExperimentConfig& cfg) {
    cfg.validate();
    const double eta = resolve_eta(cfg);
    Table t = make_table({"eta_used", "t_ris_us", "T_S_ris_us", "T_C1_ris_us", "T_C2_ris_us", "T_S_conv_us",
                          "T_C_conv_us", "P_I", "P_S1", "P_C1", "P_S2", "P_C2", "success_time_m_ris_us",
                          "S_R_bps", "S_C_bps", "kappa"});
    at_point(describe(cfg), [&] {
        const double t_ris = phy::ris_transmission_time(cfg.timings.data_us(), eta);
        const mac::TimingSet ris = mac::timing_set_ris(cfg.timings, t_ris);
        const mac::TimingSet conv = mac::timing_set_conventional(cfg.timings);
        const mac::Probabilities pr = mac::contention_probabilities({cfg.p, cfg.L, cfg.K, cfg.m});
        const AnalyticPoint a = evaluate(cfg, cfg.p, eta);
        add_row(t, cfg,
                {eta, t_ris, ris.t_success_us, ris.t_collision1_us, ris.t_collision2_us, conv.t_success_us,
                 conv.t_collision1_us, pr.idle, pr.success1, pr.collision1, pr.success2, pr.collision2,
                 mac::multihop_success_time(cfg.m, ris, conv), a.s_r, a.s_c, a.kappa});
        return 0;
    });
    return t;
}

Table simulate_table(const ExperimentConfig& cfg) {
    cfg.validate();
    const double eta = resolve_eta(cfg);
    Table t = make_table({"link_mode", "eta_used", "throughput_bps", "delivered_bits", "elapsed_us", "successes",
                          "idle_slots", "single_slots", "collisions_hop1", "stage2_attempts", "collisions_hop2",
                          "P_I_hat", "P_S1_hat", "P_C1_hat", "P_S2_hat", "aborts", "relay_tx_during_ris_data",
                          "interferer_delivered_bits"});
    std::vector<GridPoint> grid;
    for (mac::LinkMode mode : selected_modes(cfg)) grid.push_back({cfg, mode});
    const std::vector<des::SimMetrics> metrics = run_grid(cfg, grid, eta);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const des::SimMetrics& m = metrics[i];
        const des::EventFractions f = des::measure_event_fractions(m);
        auto i64 = [](std::uint64_t v) { return static_cast<std::int64_t>(v); };
        add_row(t, cfg,
                {std::string(mac::to_string(grid[i].mode)), eta, m.throughput_bps(), i64(m.delivered_payload_bits),
                 m.elapsed_us, i64(m.success_count), i64(m.idle_slots), i64(m.single_slots),
                 i64(m.collision_count_hop1), i64(m.stage2_attempts), i64(m.collision_count_hop2), f.idle,
                 f.success1, f.collision1, f.success2, i64(m.aborts), i64(m.relay_tx_during_ris_data),
                 i64(m.interferer_delivered_bits)});
    }
    return t;
}

Comparison compare_report(const Table& analytic, const Table& sim, const std::vector<std::string>& key_columns,
                          const std::string& value_column, double tolerance) {
    if (!(tolerance >= 0.0)) throw DomainError("tolerance must be nonnegative");
    auto index = [&](const Table& t, const char* side) {
        std::vector<std::size_t> key_idx;
        for (const std::string& k : key_columns) {
            try {
                key_idx.push_back(t.column(k));
            } catch (const DomainError&) {
                throw JoinError(std::string(side) + " table lacks key column " + k);
            }
        }
        std::map<std::vector<std::string>, double> out;
        const std::size_t v = t.column(value_column);
        for (const auto& row : t.rows) {
            std::vector<std::string> key;
            for (std::size_t i : key_idx) key.push_back(format_cell(row[i]));
            const Cell& cell = row[v];
            double value = std::numeric_limits<double>::quiet_NaN();
            if (const auto* d = std::get_if<double>(&cell)) value = *d;
            else if (const auto* n = std::get_if<std::int64_t>(&cell)) value = static_cast<double>(*n);
            if (!out.emplace(key, value).second) {
                throw JoinError(std::string(side) + " table repeats a key");
            }
        }
        return out;
    };
    const auto a = index(analytic, "analytic");
    const auto s = index(sim, "sim");
    auto describe_key = [&](const std::vector<std::string>& key) {
        std::string out;
        for (std::size_t i = 0; i < key.size(); ++i) out += (i ? ", " : "") + key_columns[i] + "=" + key[i];
        return out;
    };
    for (const auto& [key, value] : a) {
        if (!s.count(key)) throw JoinError("sim table has no row for " + describe_key(key));
    }
    for (const auto& [key, value] : s) {
        if (!a.count(key)) throw JoinError("analytic table has no row for " + describe_key(key));
    }

    Comparison out;
    out.table.columns = key_columns;
    for (const char* c : {"analytic", "sim", "rel_error", "tolerance", "pass"}) out.table.columns.emplace_back(c);
    // Rows follow the analytic table's order.
    const std::size_t v = analytic.column(value_column);
    (void)v;
    std::vector<std::size_t> key_idx;
    for (const std::string& k : key_columns) key_idx.push_back(analytic.column(k));
    for (const auto& row : analytic.rows) {
        std::vector<std::string> key;
        for (std::size_t i : key_idx) key.push_back(format_cell(row[i]));
        const double av = a.at(key);
        const double sv = s.at(key);
        const double err = relative_error(av, sv);
        const bool pass = err <= tolerance;
        out.all_pass = out.all_pass && pass;
        std::vector<Cell> cells;
        for (std::size_t i : key_idx) cells.push_back(row[i]);
        cells.insert(cells.end(), {av, sv, err, tolerance, std::string(pass ? "true" : "false")});
        out.table.rows.push_back(std::move(cells));
    }
    return out;
}

Comparison compare_sim_analytic(const ExperimentConfig& cfg) {
    cfg.validate();
    const double eta = resolve_eta(cfg);
    const std::vector<GridPoint> grid = sim_grid(cfg);
    const std::vector<des::SimMetrics> metrics = run_grid(cfg, grid, eta);
    const std::vector<std::string> keys = {"p", "L", "K", "m", "link_mode"};
    Table analytic;
    Table sim;
    analytic.columns = sim.columns = {"p", "L", "K", "m", "link_mode", "throughput_bps"};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const GridPoint& g = grid[i];
        const std::vector<Cell> key = {g.cfg.p, std::int64_t{g.cfg.L}, std::int64_t{g.cfg.K}, std::int64_t{g.cfg.m},
                                       std::string(mac::to_string(g.mode))};
        auto a_row = key;
        a_row.emplace_back(analytic_for(g.cfg, g.mode, eta));
        auto s_row = key;
        s_row.emplace_back(metrics[i].throughput_bps());
        analytic.rows.push_back(std::move(a_row));
        sim.rows.push_back(std::move(s_row));
    }
    return compare_report(analytic, sim, keys, "throughput_bps", cfg.tolerance);
}

}  // namespace risdcf::exp
