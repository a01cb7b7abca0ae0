#include "risdcf/mac_analytic.hpp"

#include <cmath>
#include <sstream>

namespace risdcf::mac {

std::string_view to_string(LinkMode mode) {
    return mode == LinkMode::Ris ? "ris" : "conventional";
}

void MacTimings::validate() const {
    if (rrts_bits <= 0 || rcts_bits <= 0 || ack_bits <= 0 || phy_header_bits <= 0 ||
        mac_header_bits <= 0 || payload_bits <= 0) {
        throw DomainError("frame lengths must be positive");
    }
    if (base_rate_bps <= 0) throw DomainError("base rate must be positive");
    if (!(sifs_us > 0.0) || !(difs_us > 0.0) || !(slot_us > 0.0)) {
        throw DomainError("interframe spaces and slot time must be positive");
    }
}

double frame_airtime(std::int64_t bits, std::int64_t rate_bps) {
    if (bits < 0 || rate_bps <= 0) throw DomainError("airtime needs bits >= 0 and rate > 0");
    // Integer division first when exact keeps microsecond values bit-stable.
    const std::int64_t scaled = bits * 1'000'000;
    if (scaled % rate_bps == 0) return static_cast<double>(scaled / rate_bps);
    return static_cast<double>(bits) * 1e6 / static_cast<double>(rate_bps);
}

double MacTimings::rrts_us() const { return frame_airtime(rrts_bits, base_rate_bps); }
double MacTimings::rcts_us() const { return frame_airtime(rcts_bits, base_rate_bps); }
double MacTimings::ack_us() const { return frame_airtime(ack_bits, base_rate_bps); }
double MacTimings::header_us() const {
    return frame_airtime(phy_header_bits + mac_header_bits, base_rate_bps);
}
double MacTimings::data_us() const { return frame_airtime(payload_bits, base_rate_bps); }

void ContentionConfig::validate() const {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p must lie in [0, 1]");
    if (L < 1) throw DomainError("L must be >= 1");
    if (K < 1) throw DomainError("K must be >= 1");
    if (m_hops < 1) throw DomainError("m_hops must be >= 1");
}

TimingSet timing_set_ris(const MacTimings& t, double t_ris_us) {
    t.validate();
    if (!(t_ris_us >= 0.0)) throw DomainError("T_RIS must be nonnegative");
    const double rrts = t.rrts_us();
    TimingSet out;
    out.mode = LinkMode::Ris;
    out.t_success_us = rrts + t.sifs_us + rrts + t.sifs_us + t.rcts_us() + t.sifs_us +
                       t.header_us() + t_ris_us + t.sifs_us + t.ack_us() + t.difs_us;
    out.t_collision1_us = rrts + t.difs_us;
    out.t_collision2_us = rrts + t.sifs_us + rrts + t.difs_us;
    return out;
}

double single_hop_success_time(const MacTimings& t) {
    t.validate();
    return t.rrts_us() + t.sifs_us + t.rcts_us() + t.sifs_us + t.header_us() + t.data_us() +
           t.sifs_us + t.ack_us() + t.difs_us;
}

TimingSet timing_set_conventional(const MacTimings& t) {
    TimingSet out;
    out.mode = LinkMode::Conventional;
    out.t_success_us = 2.0 * single_hop_success_time(t);
    out.t_collision1_us = t.rrts_us() + t.difs_us;
    out.t_collision2_us = out.t_collision1_us;
    return out;
}

Probabilities contention_probabilities(const ContentionConfig& cfg) {
    cfg.validate();
    const double q = 1.0 - cfg.p;
    Probabilities out;
    out.idle = std::pow(q, cfg.L);
    out.success1 = cfg.L * cfg.p * std::pow(q, cfg.L - 1);
    out.collision1 = 1.0 - out.success1 - out.idle;
    out.success2 = std::pow(q, cfg.K - 1);
    out.collision2 = 1.0 - out.success2;
    return out;
}

namespace {

struct HopTerms {
    double success;
    double collision;
    double collision_time_us;
};

// Shared by the dual-hop and m-hop entry points so the two agree bit for bit.
ThroughputResult saturation_throughput(const Probabilities& probs, const std::vector<HopTerms>& hops,
                                       double success_time_us, const MacTimings& t, LinkMode mode) {
    ThroughputResult out;
    out.mode = mode;
    out.probabilities = probs;

    DenominatorTerms& d = out.denominator;
    d.idle_us = probs.idle * t.slot_us;
    d.collision1_us = hops.front().collision * hops.front().collision_time_us;

    double reached = hops.front().success;
    double later = 0.0;
    for (std::size_t j = 1; j < hops.size(); ++j) {
        const double term = reached * hops[j].collision * hops[j].collision_time_us;
        d.later_collisions_us.push_back(term);
        later += term;
        reached *= hops[j].success;
    }
    d.success_us = reached * success_time_us;
    d.total_us = d.idle_us + (d.collision1_us + later + d.success_us);

    out.success_probability = reached;
    const double bits_per_us = reached * static_cast<double>(t.payload_bits) / d.total_us;
    out.throughput_bps = bits_per_us * 1e6;
    return out;
}

}  // namespace

ThroughputResult dual_hop_throughput(const Probabilities& probs, const TimingSet& times,
                                     const MacTimings& t) {
    t.validate();
    const std::vector<HopTerms> hops{
        {probs.success1, probs.collision1, times.t_collision1_us},
        {probs.success2, probs.collision2, times.t_collision2_us},
    };
    return saturation_throughput(probs, hops, times.t_success_us, t, times.mode);
}

double throughput_gain(double s_ris, double s_conv) {
    if (!(s_conv > 0.0)) throw NumericalError("throughput gain undefined for S_C = 0");
    return s_ris / s_conv;
}

BianchiSolution solve_bianchi(int window, int max_stage, int contenders) {
    if (window < 1) throw DomainError("W must be >= 1");
    if (max_stage < 0) throw DomainError("n must be >= 0");
    if (contenders < 1) throw DomainError("contenders must be >= 1");

    const double w = window;
    auto tau_of_q = [&](double q) {
        double geometric = 0.0;
        double term = 1.0;
        for (int k = 0; k < max_stage; ++k) {
            geometric += term;
            term *= 2.0 * q;
        }
        return 2.0 / (1.0 + w + q * w * geometric);
    };
    auto q_of_tau = [&](double tau) { return 1.0 - std::pow(1.0 - tau, contenders - 1); };

    constexpr double kTolerance = 1e-9;
    constexpr int kMaxIterations = 10'000;
    double tau = 2.0 / (w + 1.0);
    double damping = 0.5;
    double last_step = INFINITY;
    for (int it = 1; it <= kMaxIterations; ++it) {
        const double target = tau_of_q(q_of_tau(tau));
        const double step = damping * (target - tau);
        tau += step;
        if (std::abs(step) < kTolerance) {
            return BianchiSolution{tau, q_of_tau(tau), it};
        }
        if (std::abs(step) > std::abs(last_step)) damping *= 0.5;
        last_step = step;
    }
    std::ostringstream msg;
    msg << "bianchi fixed point did not converge (W=" << window << ", n=" << max_stage
        << ", contenders=" << contenders << ", last tau=" << tau << ", last step=" << last_step
        << ")";
    throw NumericalError(msg.str());
}

double bianchi_transmission_probability(int window, int max_stage, int contenders) {
    return solve_bianchi(window, max_stage, contenders).tau;
}

double multihop_success_time(int m_hops, const TimingSet& ris, const TimingSet& conv) {
    if (m_hops < 1) throw DomainError("m_hops must be >= 1");
    const double pairs = static_cast<double>(m_hops / 2);
    if (m_hops % 2 == 0) return pairs * ris.t_success_us;
    return pairs * ris.t_success_us + conv.t_success_us / 2.0;
}

double multihop_collision_time(int hop_index, const TimingSet& times) {
    if (hop_index < 1) throw DomainError("hop index must be >= 1");
    if (times.mode == LinkMode::Conventional) return times.t_collision1_us;
    return hop_index % 2 == 0 ? times.t_collision2_us : times.t_collision1_us;
}

ThroughputResult multihop_throughput(const ContentionConfig& cfg, const MacTimings& t, LinkMode mode,
                                     double eta) {
    cfg.validate();
    t.validate();
    if (mode == LinkMode::Ris && !(eta > 0.0)) throw DomainError("eta must be positive");
    const Probabilities probs = contention_probabilities(cfg);
    const TimingSet conv = timing_set_conventional(t);
    const TimingSet ris =
        mode == LinkMode::Ris ? timing_set_ris(t, t.data_us() / eta) : conv;
    const TimingSet& times = mode == LinkMode::Ris ? ris : conv;

    std::vector<HopTerms> hops;
    hops.reserve(static_cast<std::size_t>(cfg.m_hops));
    for (int i = 1; i <= cfg.m_hops; ++i) {
        const bool first = i == 1;
        hops.push_back({first ? probs.success1 : probs.success2,
                        first ? probs.collision1 : probs.collision2,
                        multihop_collision_time(i, times)});
    }

    const double success_time = mode == LinkMode::Ris
                                    ? multihop_success_time(cfg.m_hops, ris, conv)
                                    : cfg.m_hops * (conv.t_success_us / 2.0);
    return saturation_throughput(probs, hops, success_time, t, mode);
}

}  // namespace risdcf::mac
