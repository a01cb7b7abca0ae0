#include "risdcf/des_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace risdcf::des {

using protocol::Frame;
using protocol::FrameKind;
using protocol::MacAddress;

// ---- topologies -----------------------------------------------------------

namespace {

void link(Topology& t, int a, int b) {
    t.adjacency[static_cast<std::size_t>(a)].push_back(b);
    t.adjacency[static_cast<std::size_t>(b)].push_back(a);
}

int add_node(Topology& t, std::string name, NodeRole role) {
    NodeSpec n;
    n.name = std::move(name);
    n.role = role;
    n.address = MacAddress{0x020000000000ULL + t.nodes.size() + 1};
    t.nodes.push_back(std::move(n));
    t.adjacency.emplace_back();
    return static_cast<int>(t.nodes.size()) - 1;
}

}  // namespace

Topology Topology::chain(int m_hops, int L, int K, mac::LinkMode mode, InterfererMode interferers) {
    if (m_hops < 1) throw DomainError("m_hops must be >= 1");
    if (L < 1) throw DomainError("L must be >= 1");
    if (K < 1) throw DomainError("K must be >= 1");

    Topology t;
    t.L = L;
    t.K = K;
    t.m_hops = m_hops;
    t.interferers = interferers;

    std::vector<int> sources;
    for (int i = 0; i < L; ++i) {
        sources.push_back(add_node(t, i == 0 ? "S" : "S" + std::to_string(i + 1), NodeRole::Source));
    }
    // chain[0] is unused so chain[i] is N_i.
    std::vector<int> chain(static_cast<std::size_t>(m_hops) + 1, -1);
    for (int i = 1; i <= m_hops; ++i) {
        std::string name;
        if (m_hops == 2) name = i == 1 ? "R" : "D";
        else name = i == m_hops ? "D" : "N" + std::to_string(i);
        chain[static_cast<std::size_t>(i)] =
            add_node(t, name, i == m_hops ? NodeRole::Destination : NodeRole::Relay);
    }
    const int dest = chain[static_cast<std::size_t>(m_hops)];
    t.final_destination = dest;

    for (std::size_t a = 0; a < sources.size(); ++a) {
        for (std::size_t b = a + 1; b < sources.size(); ++b) link(t, sources[a], sources[b]);
        link(t, sources[a], chain[1]);
    }
    for (int i = 1; i < m_hops; ++i) {
        link(t, chain[static_cast<std::size_t>(i)], chain[static_cast<std::size_t>(i) + 1]);
    }

    auto reflects = [&](int i) { return mode == mac::LinkMode::Ris && i % 2 == 1 && i < m_hops; };
    auto addr = [&](int node) { return t.nodes[static_cast<std::size_t>(node)].address; };
    // Route from a node whose next hop is N_i.
    auto route_via = [&](int i) {
        const int next = chain[static_cast<std::size_t>(i)];
        const int target = reflects(i) ? chain[static_cast<std::size_t>(i) + 1] : next;
        return protocol::Route{addr(next), addr(target)};
    };

    for (int s : sources) {
        NodeSpec& n = t.nodes[static_cast<std::size_t>(s)];
        n.saturated = true;
        n.hop1_contender = true;
        n.traffic_destination = dest;
        n.routing.set(addr(dest), route_via(1));
    }
    for (int i = 1; i < m_hops; ++i) {
        NodeSpec& n = t.nodes[static_cast<std::size_t>(chain[static_cast<std::size_t>(i)])];
        n.ris_available = reflects(i);
        for (int j = i + 1; j <= m_hops; ++j) {
            n.routing.set(addr(chain[static_cast<std::size_t>(j)]),
                          reflects(i) ? protocol::Route{addr(chain[static_cast<std::size_t>(i) + 1]),
                                                        addr(chain[static_cast<std::size_t>(i) + 1])}
                                      : route_via(i + 1));
        }
    }

    for (int i = 2; i <= m_hops; ++i) {
        const int victim = chain[static_cast<std::size_t>(i)];
        for (int k = 1; k < K; ++k) {
            const std::string name = (m_hops == 2 ? "I" : "I" + std::to_string(i) + "_") + std::to_string(k);
            const int x = add_node(t, name, NodeRole::Interferer);
            NodeSpec& n = t.nodes[static_cast<std::size_t>(x)];
            n.victim = victim;
            if (interferers == InterfererMode::FullTraffic) {
                n.saturated = true;
                n.traffic_destination = victim;
                n.routing.set(addr(victim), protocol::Route{addr(victim), addr(victim)});
            }
            link(t, x, victim);
        }
    }
    for (auto& adj : t.adjacency) std::sort(adj.begin(), adj.end());
    return t;
}

Topology Topology::dual_hop(int L, int K, mac::LinkMode mode, InterfererMode interferers) {
    return chain(2, L, K, mode, interferers);
}

void Topology::validate() const {
    if (nodes.empty()) throw DomainError("topology has no nodes");
    if (adjacency.size() != nodes.size()) throw ShapeError("adjacency size differs from node count");
    if (final_destination < 0 || final_destination >= static_cast<int>(nodes.size())) {
        throw DomainError("final destination is not a node");
    }
    const int n = static_cast<int>(nodes.size());
    for (int a = 0; a < n; ++a) {
        for (int b : adjacency[static_cast<std::size_t>(a)]) {
            if (b < 0 || b >= n || b == a) throw DomainError("adjacency entry out of range");
            if (!adjacent(b, a)) throw DomainError("adjacency is not symmetric");
        }
    }
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            if (nodes[static_cast<std::size_t>(a)].address == nodes[static_cast<std::size_t>(b)].address) {
                throw DomainError("duplicate node address");
            }
        }
    }
    bool any_contender = false;
    for (const NodeSpec& s : nodes) {
        any_contender = any_contender || s.hop1_contender;
        if (s.saturated && (s.traffic_destination < 0 || s.traffic_destination >= n)) {
            throw DomainError("saturated node " + s.name + " has no traffic destination");
        }
        if (s.role == NodeRole::Interferer && (s.victim < 0 || s.victim >= n)) {
            throw DomainError("interferer " + s.name + " has no victim");
        }
    }
    if (!any_contender) throw DomainError("topology has no first-hop contenders");
}

bool Topology::adjacent(int a, int b) const {
    const auto& adj = adjacency[static_cast<std::size_t>(a)];
    return std::binary_search(adj.begin(), adj.end(), b);
}

int Topology::index_of(MacAddress addr) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].address == addr) return static_cast<int>(i);
    }
    return -1;
}

Budget Budget::of_slots(std::int64_t n) {
    if (n < 1) throw DomainError("slot budget must be >= 1");
    Budget b;
    b.kind = Kind::Slots;
    b.slots = n;
    return b;
}

Budget Budget::of_time(double us) {
    if (!(us > 0.0)) throw DomainError("time budget must be positive");
    Budget b;
    b.kind = Kind::Time;
    b.time_us = us;
    return b;
}

double SimMetrics::throughput_bps() const {
    if (!(elapsed_us > 0.0)) return 0.0;
    return static_cast<double>(delivered_payload_bits) / elapsed_us * 1e6;
}

// ---- engine ---------------------------------------------------------------

namespace {

enum class EventKind : std::uint8_t { TransmissionEnd = 0, TimerExpiry = 1, SlotBoundary = 2, TransmissionStart = 3 };

std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::TransmissionEnd: return "TX_END";
        case EventKind::TimerExpiry: return "TIMER";
        case EventKind::SlotBoundary: return "SLOT";
        case EventKind::TransmissionStart: return "TX_START";
    }
    return "?";
}

struct QueuedEvent {
    SimTime time;
    EventKind kind;
    std::uint64_t seq;
    int node;
    std::uint64_t generation;  // timer or slot generation; transmission id for TX_END
    protocol::TimerKind timer;
    Frame frame;  // TX_START only

    bool operator>(const QueuedEvent& o) const {
        if (time != o.time) return time > o.time;
        if (kind != o.kind) return kind > o.kind;
        return seq > o.seq;
    }
};

struct Reception {
    std::uint64_t tx;
    bool corrupted;
};

struct Transmission {
    int src;
    Frame frame;
    SimTime end;
    std::vector<int> listeners;
    int ris_relay = -1;  // relay whose link carries this DATA frame
    bool stage2 = false;
};

struct NodeRuntime {
    protocol::NodeState fsm;
    bool has_fsm = true;
    bool transmitting = false;
    std::vector<Reception> receptions;
    SimTime idle_since{0};
    std::uint64_t slot_generation = 0;
    bool slot_armed = false;
    SimTime slot_epoch{0};
    std::uint64_t timer_generation[2] = {0, 0};
    int ris_a = -1;  // configured RIS link endpoints, relays only
    int ris_b = -1;
    int ris_data_in_flight = 0;
};

double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

class Engine {
public:
    explicit Engine(const SimConfig& cfg) : cfg_(cfg), topo_(cfg.topology), rng_(seed_rng(cfg.seed)) {
        topo_.validate();
        pcfg_.timings = cfg.timings;
        pcfg_.eta = cfg.eta;
        pcfg_.backoff = cfg.backoff;
        pcfg_.retry_limit = cfg.retry_limit;
        pcfg_.validate();
        difs_ = pcfg_.difs();
        slot_ = pcfg_.slot();
        deadlock_window_ = slot_ * 1'000'000;
        if (cfg.budget.kind == Budget::Kind::Time) time_budget_ = from_us(cfg.budget.time_us);

        nodes_.resize(topo_.nodes.size());
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const NodeSpec& spec = topo_.nodes[i];
            NodeRuntime& rt = nodes_[i];
            rt.fsm.node_id = spec.address;
            rt.fsm.ris_available = spec.ris_available;
            rt.fsm.routing = spec.routing;
            rt.has_fsm = !(spec.role == NodeRole::Interferer && topo_.interferers == InterfererMode::Pulse);
            if (spec.role == NodeRole::Interferer) victims_.push_back(spec.victim);
        }
        is_victim_.assign(nodes_.size(), 0);
        for (int v : victims_) is_victim_[static_cast<std::size_t>(v)] = 1;
        for (std::size_t i = 0; i < topo_.nodes.size(); ++i) index_.emplace(topo_.nodes[i].address.value, static_cast<int>(i));
    }

    int idx(MacAddress a) const {
        const auto it = index_.find(a.value);
        return it == index_.end() ? -1 : it->second;
    }

    SimMetrics run() {
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const NodeSpec& spec = topo_.nodes[i];
            if (spec.saturated) request_payload(static_cast<int>(i));
        }
        while (!done_) {
            if (queue_.empty()) throw SimulationError("event queue drained before the budget was reached");
            QueuedEvent ev = queue_.top();
            queue_.pop();
            if (ev.time - progress_mark_ > deadlock_window_) {
                std::ostringstream msg;
                msg << "no first-hop contention slot for 10^6 slot times (stalled at t="
                    << to_us(ev.time) << " us)";
                throw SimulationError(msg.str());
            }
            now_ = ev.time;
            ++metrics_.events;
            handle(ev);
        }
        return metrics_;
    }

private:
    static std::mt19937_64 seed_rng(std::uint64_t seed) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          0x52495344U};
        return std::mt19937_64(seq);
    }

    void push(SimTime t, EventKind k, int node, std::uint64_t gen,
              protocol::TimerKind timer = protocol::TimerKind::Response, Frame frame = {}) {
        queue_.push(QueuedEvent{t, k, next_seq_++, node, gen, timer, std::move(frame)});
    }

    // ---- tracing

    void trace(int node, std::string_view kind, const Frame* f, std::string_view note = {}) {
        if (cfg_.trace == nullptr) return;
        std::ostream& out = *cfg_.trace;
        out << to_us(now_) << '\t' << topo_.nodes[static_cast<std::size_t>(node)].name << '\t' << kind << '\t';
        if (f != nullptr) {
            out << protocol::to_string(f->kind) << '\t' << "RA=" << name_of(f->receiver);
            if (f->kind == FrameKind::RRts || f->kind == FrameKind::Data) out << ",DA=" << name_of(f->destination);
            if (f->kind != FrameKind::RCts) out << ",TA=" << name_of(f->transmitter);
            if (f->kind == FrameKind::RCts || f->kind == FrameKind::Data) out << ",SA=" << name_of(f->sender);
            out << ",dur=" << f->duration_us;
        } else {
            out << "-\t-";
        }
        if (!note.empty()) out << '\t' << note;
        out << '\n';
    }

    std::string name_of(MacAddress a) const {
        const int i = idx(a);
        return i < 0 ? protocol::to_string(a) : topo_.nodes[static_cast<std::size_t>(i)].name;
    }

    // ---- carrier sensing and contention

    bool physically_idle(const NodeRuntime& rt) const { return !rt.transmitting && rt.receptions.empty(); }

    void rearm_contention(int node) {
        NodeRuntime& rt = nodes_[static_cast<std::size_t>(node)];
        const bool wants = rt.has_fsm && rt.fsm.role_state == protocol::FsmState::Backoff && rt.fsm.pending;
        if (!wants || !physically_idle(rt)) {
            if (rt.slot_armed) {
                ++rt.slot_generation;
                rt.slot_armed = false;
            }
            return;
        }
        const SimTime free_since = std::max(rt.idle_since, rt.fsm.nav_expiry);
        if (rt.slot_armed && rt.slot_epoch == free_since) return;
        ++rt.slot_generation;
        rt.slot_armed = true;
        rt.slot_epoch = free_since;
        SimTime next = free_since + difs_;
        if (next < now_) {
            const auto behind = (now_ - next).count();
            const auto steps = (behind + slot_.count() - 1) / slot_.count();
            next += slot_ * steps;
        }
        push(next, EventKind::SlotBoundary, node, rt.slot_generation);
    }

    // First-hop slot accounting. Contenders' boundaries at one instant form
    // one slot; its outcome is the number of them that transmitted.
    void open_tally(SimTime t) {
        if (tally_open_ && t == tally_time_) return;
        if (tally_open_) close_tally(t);
        if (!first_tally_) {
            first_tally_ = true;
            first_tally_time_ = t;
        }
        const bool budget_hit =
            cfg_.budget.kind == Budget::Kind::Slots
                ? static_cast<std::int64_t>(metrics_.hop1_slots()) >= cfg_.budget.slots
                : (t - first_tally_time_) >= time_budget_ && metrics_.hop1_slots() > 0;
        if (budget_hit) {
            metrics_.elapsed_us = to_us(t - first_tally_time_);
            done_ = true;
            return;
        }
        tally_open_ = true;
        tally_time_ = t;
        tally_tx_ = 0;
        progress_mark_ = t;
    }

    void close_tally(SimTime next) {
        const double span = to_us(next - tally_time_);
        if (tally_tx_ == 0) {
            ++metrics_.idle_slots;
            metrics_.idle_time_us += span;
        } else {
            if (tally_tx_ == 1) ++metrics_.single_slots;
            else ++metrics_.collision_count_hop1;
            metrics_.busy_time_us += span;
        }
        tally_open_ = false;
    }

    // ---- event handlers

    void handle(const QueuedEvent& ev) {
        switch (ev.kind) {
            case EventKind::SlotBoundary: on_slot(ev); break;
            case EventKind::TimerExpiry: on_timer(ev); break;
            case EventKind::TransmissionStart: start_transmission(ev.node, ev.frame); break;
            case EventKind::TransmissionEnd: end_transmission(ev.generation); break;
        }
    }

    void on_slot(const QueuedEvent& ev) {
        NodeRuntime& rt = nodes_[static_cast<std::size_t>(ev.node)];
        if (!rt.slot_armed || ev.generation != rt.slot_generation) return;
        const bool contender = topo_.nodes[static_cast<std::size_t>(ev.node)].hop1_contender;
        if (contender) {
            open_tally(now_);
            if (done_) return;
        }
        trace(ev.node, to_string(ev.kind), nullptr);
        const double u = unit_uniform(rng_);
        const bool sent = dispatch(ev.node, protocol::ContentionSlot{u});
        if (contender && sent) ++tally_tx_;
        // Still backing off in the same idle period: next boundary one slot on.
        if (rt.slot_armed && rt.slot_generation == ev.generation) {
            ++rt.slot_generation;
            push(now_ + slot_, EventKind::SlotBoundary, ev.node, rt.slot_generation);
        }
    }

    void on_timer(const QueuedEvent& ev) {
        NodeRuntime& rt = nodes_[static_cast<std::size_t>(ev.node)];
        if (ev.generation != rt.timer_generation[static_cast<int>(ev.timer)]) return;
        trace(ev.node, to_string(ev.kind), nullptr,
              ev.timer == protocol::TimerKind::RisLink ? "ris_link" : "response");
        dispatch(ev.node, protocol::TimerExpired{ev.timer});
    }

    SimTime airtime(int src, const Frame& f, int& ris_relay) const {
        ris_relay = -1;
        switch (f.kind) {
            case FrameKind::RRts: return pcfg_.rrts();
            case FrameKind::RCts: return pcfg_.rcts();
            case FrameKind::Ack: return pcfg_.ack();
            case FrameKind::Data: break;
        }
        const int dst = idx(f.receiver);
        if (dst >= 0 && !topo_.adjacent(src, dst)) ris_relay = relay_linking(src, dst);
        const double payload = mac::frame_airtime(f.payload_bits, cfg_.timings.base_rate_bps);
        return from_us(cfg_.timings.header_us() + (ris_relay >= 0 ? payload / cfg_.eta : payload));
    }

    int relay_linking(int a, int b) const {
        for (std::size_t r = 0; r < nodes_.size(); ++r) {
            const NodeRuntime& rt = nodes_[r];
            if ((rt.ris_a == a && rt.ris_b == b) || (rt.ris_a == b && rt.ris_b == a)) return static_cast<int>(r);
        }
        return -1;
    }

    std::vector<int> audience(int src) const {
        std::vector<int> out = topo_.adjacency[static_cast<std::size_t>(src)];
        for (const NodeRuntime& rt : nodes_) {
            if (rt.ris_a < 0) continue;
            int other = -1;
            if (rt.ris_a == src) other = rt.ris_b;
            else if (rt.ris_b == src) other = rt.ris_a;
            if (other >= 0 && !std::binary_search(out.begin(), out.end(), other)) {
                out.insert(std::lower_bound(out.begin(), out.end(), other), other);
            }
        }
        return out;
    }

    void start_transmission(int src, const Frame& frame) {
        NodeRuntime& s = nodes_[static_cast<std::size_t>(src)];
        if (s.transmitting) {
            ++metrics_.protocol_diagnostics;
            trace(src, "TX_DROPPED", &frame, "already transmitting");
            return;
        }
        if (s.ris_data_in_flight > 0) ++metrics_.relay_tx_during_ris_data;

        Transmission tx;
        tx.src = src;
        tx.frame = frame;
        const SimTime duration = airtime(src, frame, tx.ris_relay);
        tx.end = now_ + duration;
        const NodeSpec& spec = topo_.nodes[static_cast<std::size_t>(src)];
        tx.stage2 = frame.kind == FrameKind::RRts && spec.role != NodeRole::Interferer &&
                    victim_index(idx(frame.receiver));
        if (frame.kind == FrameKind::Data && spec.hop1_contender) ++metrics_.data_attempts;
        if (tx.stage2) ++metrics_.stage2_attempts;
        if (tx.ris_relay >= 0) ++nodes_[static_cast<std::size_t>(tx.ris_relay)].ris_data_in_flight;

        // Half duplex: whatever this node was receiving is lost.
        s.transmitting = true;
        s.receptions.clear();

        const std::uint64_t id = next_tx_++;
        trace(src, "TX_START", &frame);
        tx.listeners = audience(src);
        std::vector<int> notify;
        for (int l : tx.listeners) {
            NodeRuntime& rt = nodes_[static_cast<std::size_t>(l)];
            if (rt.transmitting) continue;
            const bool overlap = !rt.receptions.empty();
            for (Reception& r : rt.receptions) r.corrupted = true;
            rt.receptions.push_back(Reception{id, overlap});
            notify.push_back(l);
        }
        txs_.emplace(id, std::move(tx));
        push(now_ + duration, EventKind::TransmissionEnd, src, id);

        rearm_contention(src);
        for (int l : notify) {
            if (nodes_[static_cast<std::size_t>(l)].has_fsm) dispatch(l, protocol::ReceptionStarted{});
            rearm_contention(l);
        }

        if (frame.kind == FrameKind::RRts && topo_.interferers == InterfererMode::Pulse &&
            spec.role != NodeRole::Interferer) {
            pulse_interferers(idx(frame.receiver));
        }
    }

    bool victim_index(int i) const { return i >= 0 && is_victim_[static_cast<std::size_t>(i)] != 0; }

    void pulse_interferers(int victim) {
        if (victim < 0) return;
        for (std::size_t i = 0; i < topo_.nodes.size(); ++i) {
            const NodeSpec& n = topo_.nodes[i];
            if (n.role != NodeRole::Interferer || n.victim != victim) continue;
            if (nodes_[i].transmitting) continue;
            if (!(unit_uniform(rng_) < cfg_.backoff.p)) continue;
            const MacAddress v = topo_.nodes[static_cast<std::size_t>(victim)].address;
            const std::uint32_t dur = protocol::nav_duration(protocol::make_rrts(v, v, n.address, 0), cfg_.timings);
            start_transmission(static_cast<int>(i), protocol::make_rrts(v, v, n.address, dur));
        }
    }

    void end_transmission(std::uint64_t id) {
        auto it = txs_.find(id);
        Transmission tx = std::move(it->second);
        txs_.erase(it);

        NodeRuntime& s = nodes_[static_cast<std::size_t>(tx.src)];
        s.transmitting = false;
        if (s.receptions.empty()) s.idle_since = now_;
        if (tx.ris_relay >= 0) --nodes_[static_cast<std::size_t>(tx.ris_relay)].ris_data_in_flight;
        trace(tx.src, "TX_END", &tx.frame);
        if (s.has_fsm) dispatch(tx.src, protocol::TransmissionComplete{tx.frame});
        rearm_contention(tx.src);

        const MacAddress src_addr = topo_.nodes[static_cast<std::size_t>(tx.src)].address;
        for (int l : tx.listeners) {
            NodeRuntime& rt = nodes_[static_cast<std::size_t>(l)];
            auto r = std::find_if(rt.receptions.begin(), rt.receptions.end(),
                                  [&](const Reception& x) { return x.tx == id; });
            if (r == rt.receptions.end()) continue;  // listener was transmitting
            bool ok = !r->corrupted;
            rt.receptions.erase(r);
            if (rt.receptions.empty() && !rt.transmitting) rt.idle_since = now_;
            if (ok && cfg_.drop_reception && cfg_.drop_reception(tx.frame, l)) ok = false;

            if (tx.stage2 && idx(tx.frame.receiver) == l && !ok) ++metrics_.collision_count_hop2;
            if (!rt.has_fsm) continue;
            if (ok) {
                trace(l, "RX", &tx.frame);
                dispatch(l, protocol::FrameReceived{tx.frame, src_addr});
            } else {
                trace(l, "RX_FAIL", &tx.frame);
                dispatch(l, protocol::ReceptionFailed{});
            }
            rearm_contention(l);
        }
    }

    // ---- FSM glue

    void request_payload(int node) {
        const NodeSpec& spec = topo_.nodes[static_cast<std::size_t>(node)];
        const MacAddress dst = topo_.nodes[static_cast<std::size_t>(spec.traffic_destination)].address;
        dispatch(node, protocol::SendRequest{dst, static_cast<std::uint32_t>(cfg_.timings.payload_bits)});
    }

    // Runs one FSM step and carries out its actions. Returns true when the
    // step put a frame on air immediately.
    bool dispatch(int node, const protocol::Event& ev) {
        NodeRuntime& rt = nodes_[static_cast<std::size_t>(node)];
        protocol::StepResult res = protocol::node_step(pcfg_, rt.fsm, now_, ev);
        rt.fsm = std::move(res.state);
        for (const std::string& d : res.diagnostics) {
            ++metrics_.protocol_diagnostics;
            trace(node, "DIAG", nullptr, d);
        }
        bool sent_now = false;
        bool refill = false;
        for (const protocol::Action& a : res.actions) {
            std::visit(
                [&](const auto& act) {
                    using T = std::decay_t<decltype(act)>;
                    if constexpr (std::is_same_v<T, protocol::TransmitFrame>) {
                        if (act.start_offset.count() == 0) sent_now = true;
                        push(now_ + act.start_offset, EventKind::TransmissionStart, node, 0,
                             protocol::TimerKind::Response, act.frame);
                    } else if constexpr (std::is_same_v<T, protocol::SetTimer>) {
                        const std::uint64_t g = ++rt.timer_generation[static_cast<int>(act.kind)];
                        push(act.expiry, EventKind::TimerExpiry, node, g, act.kind);
                    } else if constexpr (std::is_same_v<T, protocol::CancelTimer>) {
                        ++rt.timer_generation[static_cast<int>(act.kind)];
                    } else if constexpr (std::is_same_v<T, protocol::AdjustRisPhase>) {
                        rt.ris_a = idx(act.source);
                        rt.ris_b = idx(act.target);
                        trace(node, "RIS_ON", nullptr);
                    } else if constexpr (std::is_same_v<T, protocol::ReleaseRisLink>) {
                        rt.ris_a = rt.ris_b = -1;
                        trace(node, "RIS_OFF", nullptr);
                    } else if constexpr (std::is_same_v<T, protocol::DeliverPayload>) {
                        deliver(node, act);
                    } else if constexpr (std::is_same_v<T, protocol::TransferSucceeded>) {
                        refill = true;
                    } else if constexpr (std::is_same_v<T, protocol::AbortTransfer>) {
                        ++metrics_.aborts;
                        trace(node, "ABORT", nullptr);
                        refill = true;
                    }
                },
                a);
        }
        if (refill && topo_.nodes[static_cast<std::size_t>(node)].saturated && !rt.fsm.pending) {
            request_payload(node);
        }
        rearm_contention(node);
        return sent_now;
    }

    void deliver(int node, const protocol::DeliverPayload& d) {
        const int origin = idx(d.origin);
        if (origin < 0) return;
        const NodeSpec& o = topo_.nodes[static_cast<std::size_t>(origin)];
        if (o.role == NodeRole::Interferer) {
            metrics_.interferer_delivered_bits += d.payload_bits;
            return;
        }
        if (node != topo_.final_destination || !o.hop1_contender) return;
        if (done_) return;
        metrics_.delivered_payload_bits += d.payload_bits;
        ++metrics_.success_count;
        trace(node, "DELIVER", nullptr);
    }

    const SimConfig& cfg_;
    Topology topo_;
    protocol::ProtocolConfig pcfg_;
    std::mt19937_64 rng_;
    SimTime difs_{0};
    SimTime slot_{0};
    SimTime deadlock_window_{0};
    SimTime time_budget_{0};

    std::vector<NodeRuntime> nodes_;
    std::vector<int> victims_;
    std::vector<char> is_victim_;
    std::unordered_map<std::uint64_t, int> index_;
    std::unordered_map<std::uint64_t, Transmission> txs_;
    std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, std::greater<>> queue_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t next_tx_ = 0;
    SimTime now_{0};
    bool done_ = false;

    bool tally_open_ = false;
    SimTime tally_time_{0};
    int tally_tx_ = 0;
    bool first_tally_ = false;
    SimTime first_tally_time_{0};
    SimTime progress_mark_{0};

    SimMetrics metrics_;
};

}  // namespace

SimMetrics run_simulation(const SimConfig& cfg) {
    Engine engine(cfg);
    return engine.run();
}

SimMetrics run_simulation(const Topology& topology, const mac::MacTimings& timings,
                          const protocol::BackoffPolicy& backoff, double eta, const Budget& budget,
                          std::uint64_t seed) {
    SimConfig cfg;
    cfg.topology = topology;
    cfg.timings = timings;
    cfg.backoff = backoff;
    cfg.eta = eta;
    cfg.budget = budget;
    cfg.seed = seed;
    return run_simulation(cfg);
}

std::vector<SimMetrics> run_batch(const std::vector<SimConfig>& configs, unsigned threads) {
    std::vector<SimMetrics> out(configs.size());
    if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(configs.size(), 1)));
    std::vector<std::exception_ptr> errors(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            try {
                out[i] = run_simulation(configs[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

EventFractions measure_event_fractions(const SimMetrics& m) {
    const std::uint64_t slots = m.hop1_slots();
    if (slots == 0) throw DomainError("no first-hop slots observed");
    EventFractions f;
    f.hop1_slots = slots;
    f.stage2_attempts = m.stage2_attempts;
    const double n = static_cast<double>(slots);
    f.idle = static_cast<double>(m.idle_slots) / n;
    f.success1 = static_cast<double>(m.single_slots) / n;
    f.collision1 = static_cast<double>(m.collision_count_hop1) / n;
    if (m.stage2_attempts > 0) {
        const double a = static_cast<double>(m.stage2_attempts);
        f.collision2 = static_cast<double>(m.collision_count_hop2) / a;
        f.success2 = 1.0 - f.collision2;
    } else {
        f.success2 = f.collision2 = std::numeric_limits<double>::quiet_NaN();
    }
    return f;
}

}  // namespace risdcf::des
