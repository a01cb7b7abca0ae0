#pragma once

// Event-driven simulation of the dual-hop access model and of m-hop chains.
//
// Medium model: a transmission is heard by the transmitter's neighbours and,
// while a RIS link is configured, by the far end of that link. Two audible
// transmissions that overlap in time at a receiver corrupt each other there.
// Nodes are half duplex and propagation delay is zero.
//
// Events at the same instant run in phase order: transmission ends, timer
// expiries, slot boundaries, transmission starts; ties inside a phase run in
// scheduling order. Every contender therefore sees the outcome of a frame that
// ends at t before it decides at a slot boundary at t, and all decisions at t
// are taken before any of them goes on air.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "risdcf/mac_analytic.hpp"
#include "risdcf/protocol.hpp"

namespace risdcf::des {

enum class NodeRole { Source, Relay, Destination, Interferer };

// How the K-1 second-hop contenders behave.
//   Pulse:       each starts an R-RTS towards the hop receiver with probability
//                p whenever a relayed R-RTS to that receiver starts (the
//                analytic "pure collision" contender).
//   FullTraffic: saturated one-hop senders running the full protocol.
enum class InterfererMode { Pulse, FullTraffic };

struct NodeSpec {
    std::string name;
    protocol::MacAddress address;
    NodeRole role = NodeRole::Source;
    bool ris_available = false;
    bool saturated = false;
    bool hop1_contender = false;  // one of the L contenders around the first relay
    int traffic_destination = -1;  // node index, saturated nodes only
    int victim = -1;                // interferers: the hop receiver they disturb
    protocol::RoutingTable routing;
};

struct Topology {
    std::vector<NodeSpec> nodes;
    std::vector<std::vector<int>> adjacency;  // symmetric, sorted
    int L = 5;
    int K = 6;
    int m_hops = 2;
    int final_destination = -1;
    bool saturation = true;
    InterfererMode interferers = InterfererMode::Pulse;

    // L sources (the first is S) around relay R; R next to D; K-1 interferers
    // next to D only. The relay reflects when mode is Ris.
    static Topology dual_hop(int L, int K, mac::LinkMode mode,
                             InterfererMode interferers = InterfererMode::Pulse);

    // L sources around N1, chain N1..Nm, K-1 interferers around each of N2..Nm.
    // In Ris mode every odd Ni with a successor reflects, so even m is all
    // paired RIS hops and odd m ends with one store-and-forward hop.
    static Topology chain(int m_hops, int L, int K, mac::LinkMode mode,
                          InterfererMode interferers = InterfererMode::Pulse);

    void validate() const;
    bool adjacent(int a, int b) const;
    int index_of(protocol::MacAddress addr) const;
};

struct Budget {
    enum class Kind { Slots, Time };
    Kind kind = Kind::Slots;
    std::int64_t slots = 1'000'000;  // first-hop contention slots observed
    double time_us = 0.0;  // ends at the first slot boundary at or past this

    static Budget of_slots(std::int64_t n);
    static Budget of_time(double us);
};

struct SimConfig {
    Topology topology = Topology::dual_hop(5, 6, mac::LinkMode::Ris);
    mac::MacTimings timings;
    protocol::BackoffPolicy backoff;
    double eta = 1.0;
    Budget budget;
    std::uint64_t seed = 1;
    int retry_limit = 7;
    std::ostream* trace = nullptr;  // tab-separated event trace when set
    // Test hook: return true to suppress delivery of a frame at a receiver
    // (the receiver sees ReceptionFailed instead).
    std::function<bool(const protocol::Frame&, int receiver)> drop_reception;
};

struct SimMetrics {
    std::uint64_t delivered_payload_bits = 0;  // at the final destination, from sources
    double elapsed_us = 0.0;  // first to last counted first-hop slot boundary
    std::uint64_t success_count = 0;  // payloads delivered end to end
    std::uint64_t idle_slots = 0;
    std::uint64_t single_slots = 0;  // exactly one first-hop contender transmitted
    std::uint64_t collision_count_hop1 = 0;
    std::uint64_t stage2_attempts = 0;  // relayed R-RTS towards a hop receiver
    std::uint64_t collision_count_hop2 = 0;
    double idle_time_us = 0.0;
    double busy_time_us = 0.0;  // time from each non-idle slot to the next slot
    std::uint64_t data_attempts = 0;  // DATA frames sent by first-hop contenders
    std::uint64_t aborts = 0;
    std::uint64_t relay_tx_during_ris_data = 0;
    std::uint64_t interferer_delivered_bits = 0;
    std::uint64_t protocol_diagnostics = 0;
    std::uint64_t events = 0;

    double throughput_bps() const;
    std::uint64_t hop1_slots() const { return idle_slots + single_slots + collision_count_hop1; }

    friend bool operator==(const SimMetrics&, const SimMetrics&) = default;
};

SimMetrics run_simulation(const SimConfig& cfg);

SimMetrics run_simulation(const Topology& topology, const mac::MacTimings& timings,
                          const protocol::BackoffPolicy& backoff, double eta, const Budget& budget,
                          std::uint64_t seed);

// Independent runs spread over up to `threads` workers; results in input order.
std::vector<SimMetrics> run_batch(const std::vector<SimConfig>& configs, unsigned threads = 0);

struct EventFractions {
    double idle = 0.0;
    double success1 = 0.0;
    double collision1 = 0.0;
    double success2 = 0.0;  // NaN when no relayed R-RTS was observed
    double collision2 = 0.0;
    std::uint64_t hop1_slots = 0;
    std::uint64_t stage2_attempts = 0;
};

EventFractions measure_event_fractions(const SimMetrics& metrics);

}  // namespace risdcf::des
