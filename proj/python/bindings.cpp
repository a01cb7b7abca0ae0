// Python bindings. Thin: values in, plain numbers / dicts / CSV text out.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

#include "risdcf/des_engine.hpp"
#include "risdcf/experiments.hpp"
#include "risdcf/frame.hpp"
#include "risdcf/mac_analytic.hpp"
#include "risdcf/phy_channel.hpp"
#include "risdcf/protocol.hpp"

namespace py = pybind11;
using namespace risdcf;

namespace {

mac::LinkMode link_mode(const std::string& s) {
    if (s == "ris") return mac::LinkMode::Ris;
    if (s == "conventional") return mac::LinkMode::Conventional;
    throw DomainError("mode must be 'ris' or 'conventional'");
}

py::dict timing_dict(const mac::TimingSet& t) {
    py::dict d;
    d["t_success_us"] = t.t_success_us;
    d["t_collision1_us"] = t.t_collision1_us;
    d["t_collision2_us"] = t.t_collision2_us;
    return d;
}

py::dict prob_dict(const mac::Probabilities& p) {
    py::dict d;
    d["P_I"] = p.idle;
    d["P_S1"] = p.success1;
    d["P_C1"] = p.collision1;
    d["P_S2"] = p.success2;
    d["P_C2"] = p.collision2;
    return d;
}

exp::ExperimentConfig to_config(const std::map<std::string, std::string>& kv) {
    exp::ExperimentConfig c;
    for (const auto& [k, v] : kv) exp::set_key(c, k, v);
    c.validate();
    return c;
}

py::bytes bits_to_bytes(const protocol::BitString& b) {
    std::string out((b.size() + 7) / 8, '\0');
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (b.bit(i)) out[i / 8] = static_cast<char>(out[i / 8] | (0x80 >> (i % 8)));
    }
    return py::bytes(out);
}

}  // namespace

PYBIND11_MODULE(_risdcf, m) {
    m.doc() = "RIS-assisted DCF: channel model, analytic throughput, protocol and simulator";

    static py::exception<DomainError> domain_error(m, "DomainError", PyExc_ValueError);
    static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
    static py::exception<JoinError> join_error(m, "JoinError", PyExc_ValueError);
    static py::exception<FormatError> format_error(m, "FormatError", PyExc_ValueError);
    static py::exception<CorruptionError> corruption_error(m, "CorruptionError", PyExc_ValueError);
    static py::exception<SimulationError> simulation_error(m, "SimulationError", PyExc_RuntimeError);
    static py::exception<NumericalError> numerical_error(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const DomainError& e) {
            domain_error(e.what());
        } catch (const ShapeError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const ConfigError& e) {
            config_error(e.what());
        } catch (const JoinError& e) {
            join_error(e.what());
        } catch (const FormatError& e) {
            format_error(e.what());
        } catch (const CorruptionError& e) {
            corruption_error(e.what());
        } catch (const SimulationError& e) {
            simulation_error(e.what());
        } catch (const NumericalError& e) {
            numerical_error(e.what());
        }
    });

    // ---- channel
    py::class_<phy::ChannelParams>(m, "ChannelParams")
        .def(py::init<>())
        .def_readwrite("frequency_hz", &phy::ChannelParams::frequency_hz)
        .def_readwrite("distance_m", &phy::ChannelParams::distance_m)
        .def_readwrite("nakagami_m", &phy::ChannelParams::nakagami_m)
        .def_readwrite("nakagami_omega", &phy::ChannelParams::nakagami_omega)
        .def_readwrite("noise_power_dbm", &phy::ChannelParams::noise_power_dbm)
        .def_readwrite("transmit_power_dbm", &phy::ChannelParams::transmit_power_dbm)
        .def_readwrite("num_elements", &phy::ChannelParams::num_elements)
        .def("wavelength_m", &phy::ChannelParams::wavelength_m)
        .def("validate", &phy::ChannelParams::validate);

    m.def("path_loss_amplitude", &phy::path_loss_amplitude, py::arg("wavelength_m"), py::arg("distance_m"));
    m.def("snr_conventional", &phy::snr_conventional, py::arg("params"), py::arg("direct_gain"));
    m.def(
        "ergodic_rate",
        [](const phy::ChannelParams& p, const std::string& mode, std::uint64_t samples, std::uint64_t seed) {
            phy::RateMode rm;
            if (mode == "conventional") rm = phy::RateMode::Conventional;
            else if (mode == "ris") rm = phy::RateMode::RisMatched;
            else if (mode == "ris_random_phase") rm = phy::RateMode::RisRandomPhase;
            else throw DomainError("mode must be 'conventional', 'ris' or 'ris_random_phase'");
            return phy::ergodic_rate(p, rm, samples, seed);
        },
        py::arg("params"), py::arg("mode"), py::arg("samples"), py::arg("seed"));
    m.def(
        "ris_efficiency",
        [](const phy::ChannelParams& p, std::uint64_t samples, std::uint64_t seed) {
            return phy::ris_efficiency(p, samples, seed);
        },
        py::arg("params"), py::arg("samples"), py::arg("seed"));
    m.def("ris_transmission_time", &phy::ris_transmission_time, py::arg("t_data_us"), py::arg("eta"));

    // ---- analytic model
    py::class_<mac::MacTimings>(m, "MacTimings")
        .def(py::init<>())
        .def_readwrite("rrts_bits", &mac::MacTimings::rrts_bits)
        .def_readwrite("rcts_bits", &mac::MacTimings::rcts_bits)
        .def_readwrite("ack_bits", &mac::MacTimings::ack_bits)
        .def_readwrite("phy_header_bits", &mac::MacTimings::phy_header_bits)
        .def_readwrite("mac_header_bits", &mac::MacTimings::mac_header_bits)
        .def_readwrite("payload_bits", &mac::MacTimings::payload_bits)
        .def_readwrite("base_rate_bps", &mac::MacTimings::base_rate_bps)
        .def_readwrite("sifs_us", &mac::MacTimings::sifs_us)
        .def_readwrite("difs_us", &mac::MacTimings::difs_us)
        .def_readwrite("slot_us", &mac::MacTimings::slot_us)
        .def("validate", &mac::MacTimings::validate);

    m.def(
        "timing_set_ris", [](const mac::MacTimings& t, double t_ris) { return timing_dict(mac::timing_set_ris(t, t_ris)); },
        py::arg("timings"), py::arg("t_ris_us"));
    m.def(
        "timing_set_conventional", [](const mac::MacTimings& t) { return timing_dict(mac::timing_set_conventional(t)); },
        py::arg("timings"));
    m.def(
        "contention_probabilities",
        [](double p, int L, int K) { return prob_dict(mac::contention_probabilities({p, L, K, 2})); }, py::arg("p"),
        py::arg("L"), py::arg("K"));
    m.def(
        "throughput",
        [](double p, int L, int K, int hops, const std::string& mode, double eta, const mac::MacTimings& t) {
            return mac::multihop_throughput({p, L, K, hops}, t, link_mode(mode), eta).throughput_bps;
        },
        py::arg("p"), py::arg("L"), py::arg("K"), py::arg("hops") = 2, py::arg("mode") = "ris", py::arg("eta") = 0.5,
        py::arg("timings") = mac::MacTimings{});
    m.def("throughput_gain", &mac::throughput_gain, py::arg("s_ris"), py::arg("s_conv"));
    m.def("bianchi_transmission_probability", &mac::bianchi_transmission_probability, py::arg("window"),
          py::arg("max_stage"), py::arg("contenders"));
    m.def(
        "multihop_success_time",
        [](int hops, double eta, const mac::MacTimings& t) {
            return mac::multihop_success_time(hops, mac::timing_set_ris(t, phy::ris_transmission_time(t.data_us(), eta)),
                                              mac::timing_set_conventional(t));
        },
        py::arg("hops"), py::arg("eta") = 0.5, py::arg("timings") = mac::MacTimings{});

    // ---- frames
    m.def(
        "encode_rrts",
        [](std::uint64_t ra, std::uint64_t da, std::uint64_t ta, std::uint32_t dur) {
            return bits_to_bytes(protocol::encode_frame(
                protocol::make_rrts(protocol::MacAddress{ra}, protocol::MacAddress{da}, protocol::MacAddress{ta}, dur)));
        },
        py::arg("ra"), py::arg("da"), py::arg("ta"), py::arg("duration_us"),
        "R-RTS wire image, 208 bits packed most significant bit first into 26 bytes.");
    m.def(
        "nav_duration",
        [](const std::string& kind, bool same_address) {
            const mac::MacTimings t;
            const protocol::MacAddress a{1}, b{2}, c{3};
            if (kind == "rrts") return protocol::nav_duration(protocol::make_rrts(b, same_address ? b : c, a, 0), t);
            if (kind == "data") return protocol::nav_duration(protocol::make_data(b, c, a, a, 0, 8000), t);
            throw DomainError("kind must be 'rrts' or 'data'");
        },
        py::arg("kind"), py::arg("same_address") = false);

    // ---- simulator
    m.def(
        "simulate",
        [](double p, int L, int K, const std::string& mode, double eta, std::int64_t slots, std::uint64_t seed, int hops) {
            des::SimConfig c;
            c.topology = des::Topology::chain(hops, L, K, link_mode(mode));
            c.backoff = protocol::BackoffPolicy::p_persistent(p);
            c.eta = eta;
            c.budget = des::Budget::of_slots(slots);
            c.seed = seed;
            des::SimMetrics r;
            {
                py::gil_scoped_release release;
                r = des::run_simulation(c);
            }
            py::dict d;
            d["throughput_bps"] = r.throughput_bps();
            d["delivered_payload_bits"] = r.delivered_payload_bits;
            d["elapsed_us"] = r.elapsed_us;
            d["success_count"] = r.success_count;
            d["idle_slots"] = r.idle_slots;
            d["collision_count_hop1"] = r.collision_count_hop1;
            d["collision_count_hop2"] = r.collision_count_hop2;
            d["stage2_attempts"] = r.stage2_attempts;
            d["relay_tx_during_ris_data"] = r.relay_tx_during_ris_data;
            return d;
        },
        py::arg("p"), py::arg("L"), py::arg("K"), py::arg("mode") = "ris", py::arg("eta") = 0.5,
        py::arg("slots") = 100000, py::arg("seed") = 1, py::arg("hops") = 2);

    // ---- experiments
    m.def("config_keys", &exp::config_keys);
    m.def(
        "run_scenario",
        [](const std::map<std::string, std::string>& kv) {
            const exp::ExperimentConfig c = to_config(kv);
            py::gil_scoped_release release;
            return exp::to_csv(exp::run_scenario(c));
        },
        py::arg("config"), "Runs a scenario from string key/value settings and returns the CSV text.");
    m.def(
        "compare",
        [](const std::map<std::string, std::string>& kv) {
            const exp::ExperimentConfig c = to_config(kv);
            exp::Comparison cmp;
            {
                py::gil_scoped_release release;
                cmp = exp::compare_sim_analytic(c);
            }
            return py::make_tuple(exp::to_csv(cmp.table), cmp.all_pass);
        },
        py::arg("config"));
}
