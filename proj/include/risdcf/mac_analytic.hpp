#pragma once

// Closed-form saturation throughput of the dual-hop access model and its m-hop
// extension, for RIS-assisted and conventional relaying.
//
// Times are microseconds, payloads bits, throughputs bits/second. Frame
// airtimes are integer bit counts over an integer bit rate, so at 1 Mbps every
// timing below is an exact integer number of microseconds.

#include <cstdint>
#include <string_view>
#include <vector>

#include "risdcf/errors.hpp"

namespace risdcf::mac {

enum class LinkMode { Ris, Conventional };

std::string_view to_string(LinkMode mode);

struct MacTimings {
    std::int64_t rrts_bits = 208;
    std::int64_t rcts_bits = 160;
    std::int64_t ack_bits = 240;
    std::int64_t phy_header_bits = 128;
    std::int64_t mac_header_bits = 272;
    std::int64_t payload_bits = 8000;  // E
    std::int64_t base_rate_bps = 1'000'000;
    double sifs_us = 28.0;
    double difs_us = 128.0;
    double slot_us = 50.0;  // sigma

    void validate() const;

    double rrts_us() const;
    double rcts_us() const;
    double ack_us() const;
    double header_us() const;  // H = (PHY + MAC header bits) / base rate
    double data_us() const;    // T_data = E / base rate
};

double frame_airtime(std::int64_t bits, std::int64_t rate_bps);

struct ContentionConfig {
    double p = 0.1;
    int L = 5;
    int K = 6;
    int m_hops = 2;

    void validate() const;
};

struct TimingSet {
    double t_success_us = 0.0;
    double t_collision1_us = 0.0;
    double t_collision2_us = 0.0;
    LinkMode mode = LinkMode::Ris;
};

struct Probabilities {
    double idle = 0.0;        // P_I
    double success1 = 0.0;    // P_S1
    double collision1 = 0.0;  // P_C1
    double success2 = 0.0;    // P_S2
    double collision2 = 0.0;  // P_C2
};

// Expected time per contention round, split by outcome.
struct DenominatorTerms {
    double idle_us = 0.0;        // P_I * sigma
    double collision1_us = 0.0;  // P_C1 * T_C1
    // Hops 2..m: (prod_{i<j} P_Si) * P_Cj * T_Cj. One entry for dual-hop.
    std::vector<double> later_collisions_us;
    double success_us = 0.0;  // (prod P_Si) * T_S
    double total_us = 0.0;
};

struct ThroughputResult {
    double throughput_bps = 0.0;
    Probabilities probabilities;
    DenominatorTerms denominator;
    double success_probability = 0.0;  // prod P_Si
    LinkMode mode = LinkMode::Ris;
};

// T_S^R, T_C1^R, T_C2^R for a RIS transfer whose payload airtime is t_ris_us.
TimingSet timing_set_ris(const MacTimings& t, double t_ris_us);

// T_S^C, T_C1^C, T_C2^C: two full single-hop handshakes back to back.
TimingSet timing_set_conventional(const MacTimings& t);

// One single-hop RTS/CTS/DATA/ACK cycle, T_S^C / 2.
double single_hop_success_time(const MacTimings& t);

Probabilities contention_probabilities(const ContentionConfig& cfg);

ThroughputResult dual_hop_throughput(const Probabilities& probs, const TimingSet& times,
                                     const MacTimings& t);

double throughput_gain(double s_ris, double s_conv);

struct BianchiSolution {
    double tau = 0.0;                // per-slot transmission probability
    double conditional_collision = 0.0;  // q
    int iterations = 0;
};

// Fixed point of tau = 2 / (1 + W + q W sum_{k<n} (2q)^k),
// q = 1 - (1 - tau)^(contenders - 1). The sum form equals the usual
// 2(1-2q) / ((1-2q)(W+1) + qW(1-(2q)^n)) and stays finite at q = 1/2.
BianchiSolution solve_bianchi(int window, int max_stage, int contenders);

double bianchi_transmission_probability(int window, int max_stage, int contenders);

double multihop_success_time(int m_hops, const TimingSet& ris, const TimingSet& conv);

double multihop_collision_time(int hop_index, const TimingSet& times);

// m-hop model; mode Ris uses T_RIS = T_data / eta for paired hops. eta is
// ignored in conventional mode.
ThroughputResult multihop_throughput(const ContentionConfig& cfg, const MacTimings& t, LinkMode mode,
                                     double eta);

}  // namespace risdcf::mac
