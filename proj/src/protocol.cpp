#include "risdcf/protocol.hpp"

#include <algorithm>
#include <cmath>

namespace risdcf::protocol {

BackoffPolicy BackoffPolicy::p_persistent(double p) {
    BackoffPolicy b;
    b.kind = BackoffKind::PPersistent;
    b.p = p;
    return b;
}

BackoffPolicy BackoffPolicy::exponential(int window, int max_stage) {
    BackoffPolicy b;
    b.kind = BackoffKind::Exponential;
    b.window = window;
    b.max_stage = max_stage;
    return b;
}

void BackoffPolicy::validate() const {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p must lie in [0, 1]");
    if (window < 1) throw DomainError("W must be >= 1");
    if (max_stage < 0 || max_stage > 30) throw DomainError("n must lie in [0, 30]");
}

std::int64_t BackoffPolicy::contention_window(int stage) const {
    const int s = std::clamp(stage, 0, max_stage);
    return std::int64_t{window} << s;
}

void ProtocolConfig::validate() const {
    timings.validate();
    backoff.validate();
    if (!(eta > 0.0) || !std::isfinite(eta)) throw DomainError("eta must be positive");
    if (retry_limit < 0) throw DomainError("retry limit must be >= 0");
}

SimTime ProtocolConfig::sifs() const { return from_us(timings.sifs_us); }
SimTime ProtocolConfig::difs() const { return from_us(timings.difs_us); }
SimTime ProtocolConfig::slot() const { return from_us(timings.slot_us); }
SimTime ProtocolConfig::rrts() const { return from_us(timings.rrts_us()); }
SimTime ProtocolConfig::rcts() const { return from_us(timings.rcts_us()); }
SimTime ProtocolConfig::ack() const { return from_us(timings.ack_us()); }
SimTime ProtocolConfig::data_airtime(bool via_ris) const {
    const double payload = via_ris ? timings.data_us() / eta : timings.data_us();
    return from_us(timings.header_us() + payload);
}

RoutingTable::RoutingTable(std::map<MacAddress, Route> routes)
    : routes_(std::make_shared<const std::map<MacAddress, Route>>(std::move(routes))) {}

const Route* RoutingTable::find(MacAddress destination) const {
    if (!routes_) return nullptr;
    const auto it = routes_->find(destination);
    return it == routes_->end() ? nullptr : &it->second;
}

void RoutingTable::set(MacAddress destination, Route route) {
    auto next = routes_ ? std::map<MacAddress, Route>(*routes_) : std::map<MacAddress, Route>{};
    next[destination] = route;
    routes_ = std::make_shared<const std::map<MacAddress, Route>>(std::move(next));
}

bool operator==(const RoutingTable& a, const RoutingTable& b) {
    if (a.routes_ == b.routes_) return true;
    if (a.size() != b.size()) return false;
    if (a.size() == 0) return true;
    return *a.routes_ == *b.routes_;
}

std::string_view to_string(FsmState s) {
    switch (s) {
        case FsmState::Idle: return "Idle";
        case FsmState::Backoff: return "Backoff";
        case FsmState::AwaitRCts: return "AwaitRCts";
        case FsmState::TxData: return "TxData";
        case FsmState::AwaitAck: return "AwaitAck";
        case FsmState::AwaitData: return "AwaitData";
        case FsmState::RelayAwaitRCts: return "RelayAwaitRCts";
        case FsmState::RelayRisActive: return "RelayRisActive";
        case FsmState::RelayStoreForward: return "RelayStoreForward";
    }
    return "?";
}

bool is_sender_state(FsmState s) {
    return s == FsmState::Backoff || s == FsmState::AwaitRCts || s == FsmState::TxData ||
           s == FsmState::AwaitAck;
}

bool is_receiver_state(FsmState s) {
    return s == FsmState::AwaitData || s == FsmState::RelayAwaitRCts ||
           s == FsmState::RelayRisActive || s == FsmState::RelayStoreForward;
}

namespace {

std::uint32_t whole_us(SimTime t) {
    const auto ns = t.count();
    return static_cast<std::uint32_t>((ns + 999) / 1000);
}

std::uint32_t rrts_nav_us(const mac::MacTimings& t, bool same_address) {
    const double us = same_address ? t.rrts_us() + t.sifs_us
                                   : t.rrts_us() + t.rcts_us() + 2.0 * t.sifs_us;
    return static_cast<std::uint32_t>(std::ceil(us));
}

std::uint32_t data_nav_us(const mac::MacTimings& t) {
    return static_cast<std::uint32_t>(std::ceil(t.ack_us() + t.sifs_us));
}

// The 16-bit field cannot hold more than 65535 us.
std::uint32_t clamp_duration(std::uint32_t us, StepResult& r) {
    if (us <= 0xFFFF) return us;
    r.diagnostics.push_back("duration " + std::to_string(us) + " us clamped to 65535");
    return 0xFFFF;
}

StepResult unchanged(const NodeState& s, std::string why) {
    StepResult r{s, {}, {}};
    r.diagnostics.push_back(std::move(why) + " in state " + std::string(to_string(s.role_state)));
    return r;
}

void clear_exchange(NodeState& s) {
    s.peer = {};
    s.target = {};
    s.data_receiver = {};
}

void settle(NodeState& s) {
    clear_exchange(s);
    s.role_state = s.pending ? FsmState::Backoff : FsmState::Idle;
}

bool awaiting_response(FsmState s) {
    return s == FsmState::AwaitRCts || s == FsmState::AwaitAck || s == FsmState::AwaitData ||
           s == FsmState::RelayAwaitRCts || s == FsmState::RelayStoreForward;
}

// ---- sending side -------------------------------------------------------

void rcts_failed(const ProtocolConfig& cfg, StepResult& r) {
    NodeState& s = r.state;
    r.actions.emplace_back(CancelTimer{TimerKind::Response});
    s.backoff_stage = std::min(s.backoff_stage + 1, cfg.backoff.max_stage);
    s.backoff_counter = -1;
    clear_exchange(s);
    s.role_state = FsmState::Backoff;
}

void ack_failed(const ProtocolConfig& cfg, StepResult& r) {
    NodeState& s = r.state;
    r.actions.emplace_back(CancelTimer{TimerKind::Response});
    if (s.retry_counter >= cfg.retry_limit) {
        r.actions.emplace_back(AbortTransfer{s.retry_counter + 1});
        s.pending.reset();
        s.retry_counter = 0;
        s.backoff_stage = 0;
        s.backoff_counter = -1;
        settle(s);
        return;
    }
    ++s.retry_counter;
    s.backoff_stage = std::min(s.backoff_stage + 1, cfg.backoff.max_stage);
    s.backoff_counter = -1;
    clear_exchange(s);
    s.role_state = FsmState::Backoff;
}

bool backoff_fires(const ProtocolConfig& cfg, NodeState& s, double u) {
    if (s.pending && s.pending->forwarding) return true;
    if (cfg.backoff.kind == BackoffKind::PPersistent) return u < cfg.backoff.p;
    if (s.backoff_counter < 0) {
        const auto cw = cfg.backoff.contention_window(s.backoff_stage);
        const auto draw = static_cast<std::int64_t>(std::floor(u * static_cast<double>(cw)));
        s.backoff_counter = static_cast<int>(std::clamp<std::int64_t>(draw, 0, cw - 1));
    }
    if (s.backoff_counter == 0) {
        s.backoff_counter = -1;
        return true;
    }
    --s.backoff_counter;
    return false;
}

void failure_of_wait(const ProtocolConfig& cfg, StepResult& r) {
    if (r.state.role_state == FsmState::AwaitRCts) {
        rcts_failed(cfg, r);
    } else {
        ack_failed(cfg, r);
    }
}

}  // namespace

std::uint32_t nav_duration(const Frame& f, const mac::MacTimings& t) {
    switch (f.kind) {
        case FrameKind::RRts: return rrts_nav_us(t, f.destination == f.receiver);
        case FrameKind::Data: return data_nav_us(t);
        case FrameKind::RCts:
        case FrameKind::Ack: return f.duration_us;
    }
    return 0;
}

NodeState apply_nav_min_rule(NodeState s, SimTime now, SimTime advertised) {
    s.nav_expiry = std::min(s.nav_expiry, now + advertised);
    return s;
}

NodeState update_nav(NodeState s, SimTime now, const Frame& f, MacAddress from) {
    const SimTime advertised = from_us(static_cast<double>(f.duration_us));
    if (f.receiver != s.node_id) {
        if (f.kind == FrameKind::Data && s.nav_from_rcts && s.nav_expiry > now) {
            return apply_nav_min_rule(std::move(s), now, advertised);
        }
        if (now + advertised > s.nav_expiry) {
            s.nav_expiry = now + advertised;
            s.nav_from_rcts = f.kind == FrameKind::RCts;
            s.nav_owner = from;
        }
        return s;
    }
    if (f.kind == FrameKind::Ack && f.duration_us > 0 && now + advertised > s.nav_expiry) {
        s.nav_expiry = now + advertised;
        s.nav_from_rcts = false;
        s.nav_owner = from;
    }
    return s;
}

namespace {

StepResult sender_impl(const ProtocolConfig& cfg, NodeState&& moved, SimTime now, const Event& ev) {
    StepResult r{std::move(moved), {}, {}};
    const NodeState& state = r.state;
    NodeState& s = r.state;
    const MacAddress self = s.node_id;

    if (const auto* req = std::get_if<SendRequest>(&ev)) {
        if (s.pending) return unchanged(state, "send request while a payload is queued");
        if (req->payload_bits == 0) return unchanged(state, "empty send request");
        s.pending = Transfer{req->destination, self, req->payload_bits, false};
        if (s.role_state == FsmState::Idle) s.role_state = FsmState::Backoff;
        return r;
    }

    if (const auto* slot = std::get_if<ContentionSlot>(&ev)) {
        if (s.role_state != FsmState::Backoff || !s.pending) {
            return unchanged(state, "contention slot without a queued payload");
        }
        if (now < s.nav_expiry) return unchanged(state, "contention slot under NAV");
        if (!backoff_fires(cfg, s, slot->uniform)) return r;
        const Route* route = s.routing.find(s.pending->destination);
        if (route == nullptr) {
            r.diagnostics.push_back("no route to " + to_string(s.pending->destination) +
                                    "; transfer dropped");
            r.actions.emplace_back(AbortTransfer{0});
            s.pending.reset();
            settle(s);
            return r;
        }
        const Route& hop = *route;
        const bool same = hop.segment_target == hop.next_hop;
        const Frame rrts = make_rrts(hop.next_hop, hop.segment_target, self,
                                     clamp_duration(rrts_nav_us(cfg.timings, same), r));
        s.peer = hop.next_hop;
        s.target = hop.segment_target;
        s.role_state = FsmState::AwaitRCts;
        r.actions.emplace_back(TransmitFrame{rrts, SimTime{0}});
        return r;
    }

    if (const auto* done = std::get_if<TransmissionComplete>(&ev)) {
        const FrameKind k = done->frame.kind;
        if (k == FrameKind::Ack) return r;  // a relay's ACK ends after it re-entered Backoff
        if ((s.role_state == FsmState::AwaitRCts && k == FrameKind::RRts) ||
            (s.role_state == FsmState::TxData && k == FrameKind::Data)) {
            if (k == FrameKind::Data) s.role_state = FsmState::AwaitAck;
            r.actions.emplace_back(SetTimer{TimerKind::Response, now + cfg.response_timeout()});
            return r;
        }
        return unchanged(state, "unexpected end of own " + std::string(to_string(k)));
    }

    const bool waiting = s.role_state == FsmState::AwaitRCts || s.role_state == FsmState::AwaitAck;

    if (std::holds_alternative<ReceptionStarted>(ev)) {
        if (waiting) r.actions.emplace_back(CancelTimer{TimerKind::Response});
        return r;
    }

    if (std::holds_alternative<ReceptionFailed>(ev) || std::holds_alternative<CollisionIndication>(ev)) {
        if (waiting) failure_of_wait(cfg, r);
        return r;
    }

    if (const auto* t = std::get_if<TimerExpired>(&ev)) {
        if (waiting && t->kind == TimerKind::Response) {
            failure_of_wait(cfg, r);
            return r;
        }
        return unchanged(state, "stale timer");
    }

    if (const auto* rx = std::get_if<FrameReceived>(&ev)) {
        const Frame& f = rx->frame;
        if (s.role_state == FsmState::AwaitRCts) {
            if (f.kind == FrameKind::RCts && f.receiver == self) {
                // DATA goes straight to the R-CTS sender when the R-RTS was
                // reflected past the next hop, and to the next hop otherwise.
                s.data_receiver = s.target != s.peer ? f.sender : s.peer;
                const Frame data = make_data(s.data_receiver, s.pending->destination, self,
                                             s.pending->origin, data_nav_us(cfg.timings),
                                             s.pending->payload_bits);
                s.role_state = FsmState::TxData;
                r.actions.emplace_back(CancelTimer{TimerKind::Response});
                r.actions.emplace_back(TransmitFrame{data, cfg.sifs()});
                return r;
            }
            if (f.kind == FrameKind::RRts && f.transmitter == self && f.receiver != self) {
                // Our R-RTS forwarded by the relay: keep waiting for the R-CTS.
                r.actions.emplace_back(SetTimer{TimerKind::Response, now + cfg.response_timeout()});
                return r;
            }
            rcts_failed(cfg, r);
            return r;
        }
        if (s.role_state == FsmState::AwaitAck) {
            if (f.kind == FrameKind::Ack && f.receiver == self) {
                r.actions.emplace_back(CancelTimer{TimerKind::Response});
                r.actions.emplace_back(TransferSucceeded{s.pending->payload_bits});
                s.pending.reset();
                s.retry_counter = 0;
                s.backoff_stage = 0;
                s.backoff_counter = -1;
                settle(s);
                return r;
            }
            ack_failed(cfg, r);
            return r;
        }
        return r;  // overheard while idle or backing off; NAV is handled by node_step
    }

    return r;
}

StepResult receiver_impl(const ProtocolConfig& cfg, NodeState&& moved, SimTime now, const Event& ev) {
    StepResult r{std::move(moved), {}, {}};
    const NodeState& state = r.state;
    NodeState& s = r.state;
    const MacAddress self = s.node_id;

    if (const auto* rx = std::get_if<FrameReceived>(&ev)) {
        const Frame& f = rx->frame;

        if (s.role_state == FsmState::Idle || s.role_state == FsmState::Backoff) {
            if (f.kind != FrameKind::RRts || f.receiver != self) return r;
            // Virtual carrier busy: stay silent, unless the reservation is the
            // requester's own (as for a relay's forward announcement).
            if (now < s.nav_expiry && s.nav_owner != rx->from) return r;
            const bool via_relay = rx->from != f.transmitter;

            if (f.destination == self) {
                // Only one payload fits: a relay still holding a forward does
                // not take the next one until it has passed it on.
                if (s.pending) return r;
                const auto dur = whole_us(cfg.data_airtime(via_relay) + 2 * cfg.sifs());
                const Frame rcts = make_rcts(f.transmitter, self, clamp_duration(dur, r));
                s.peer = f.transmitter;
                s.target = self;
                s.role_state = FsmState::AwaitData;
                r.actions.emplace_back(TransmitFrame{rcts, cfg.sifs()});
                return r;
            }

            if (s.ris_available) {
                const Route* route = s.routing.find(f.destination);
                if (route == nullptr) {
                    return unchanged(state, "no route to R-RTS destination " + to_string(f.destination));
                }
                const MacAddress next = route->next_hop;
                const Frame fwd = make_rrts(next, f.destination, f.transmitter,
                                            clamp_duration(rrts_nav_us(cfg.timings, next == f.destination), r));
                s.peer = f.transmitter;
                s.target = f.destination;
                s.role_state = FsmState::RelayAwaitRCts;
                r.actions.emplace_back(AdjustRisPhase{f.transmitter, f.destination});
                r.actions.emplace_back(TransmitFrame{fwd, cfg.sifs()});
                return r;
            }

            if (s.pending) return r;  // single buffer already holds a payload
            const auto dur = whole_us(cfg.data_airtime(false) + 2 * cfg.sifs());
            const Frame rcts = make_rcts(f.transmitter, self, clamp_duration(dur, r));
            s.peer = f.transmitter;
            s.target = f.destination;
            s.role_state = FsmState::RelayStoreForward;
            r.actions.emplace_back(TransmitFrame{rcts, cfg.sifs()});
            return r;
        }

        if (s.role_state == FsmState::AwaitData || s.role_state == FsmState::RelayStoreForward) {
            r.actions.emplace_back(CancelTimer{TimerKind::Response});
            if (f.kind != FrameKind::Data || f.receiver != self) {
                settle(s);
                return r;
            }
            if (f.destination == self) {
                r.actions.emplace_back(DeliverPayload{f.sender, f.payload_bits});
                r.actions.emplace_back(TransmitFrame{make_ack(f.transmitter, self, 0), cfg.sifs()});
                settle(s);
                return r;
            }
            if (s.pending) {
                r.diagnostics.push_back("relay buffer occupied; forwarded payload dropped");
                r.actions.emplace_back(TransmitFrame{make_ack(f.transmitter, self, 0), cfg.sifs()});
                settle(s);
                return r;
            }
            // Store and forward. The ACK announces the forward R-RTS so the
            // previous hop's neighbourhood leaves the first slot to us.
            const auto announce = static_cast<std::uint32_t>(
                std::ceil(cfg.timings.difs_us + cfg.timings.rrts_us() + cfg.timings.sifs_us));
            r.actions.emplace_back(
                TransmitFrame{make_ack(f.transmitter, self, clamp_duration(announce, r)), cfg.sifs()});
            s.pending = Transfer{f.destination, f.sender, f.payload_bits, true};
            s.retry_counter = 0;
            s.backoff_stage = 0;
            s.backoff_counter = -1;
            settle(s);
            return r;
        }

        if (s.role_state == FsmState::RelayAwaitRCts) {
            r.actions.emplace_back(CancelTimer{TimerKind::Response});
            if (f.kind == FrameKind::RCts && f.receiver == s.peer && f.sender == s.target) {
                const SimTime expiry =
                    now + from_us(static_cast<double>(f.duration_us)) + cfg.sifs() + cfg.ack();
                s.ris_link_timer_expiry = expiry;
                s.role_state = FsmState::RelayRisActive;
                r.actions.emplace_back(SetTimer{TimerKind::RisLink, expiry});
                return r;
            }
            r.actions.emplace_back(ReleaseRisLink{});
            settle(s);
            return r;
        }

        return r;  // RelayRisActive listens passively
    }

    if (const auto* done = std::get_if<TransmissionComplete>(&ev)) {
        const FrameKind k = done->frame.kind;
        if (k == FrameKind::Ack) return r;
        if ((s.role_state == FsmState::AwaitData && k == FrameKind::RCts) ||
            (s.role_state == FsmState::RelayStoreForward && k == FrameKind::RCts) ||
            (s.role_state == FsmState::RelayAwaitRCts && k == FrameKind::RRts)) {
            r.actions.emplace_back(SetTimer{TimerKind::Response, now + cfg.response_timeout()});
            return r;
        }
        return unchanged(state, "unexpected end of own " + std::string(to_string(k)));
    }

    const bool waiting = awaiting_response(s.role_state) && !is_sender_state(s.role_state);

    if (std::holds_alternative<ReceptionStarted>(ev)) {
        if (waiting) r.actions.emplace_back(CancelTimer{TimerKind::Response});
        return r;
    }

    auto give_up = [&] {
        r.actions.emplace_back(CancelTimer{TimerKind::Response});
        if (s.role_state == FsmState::RelayAwaitRCts) r.actions.emplace_back(ReleaseRisLink{});
        settle(s);
    };

    if (std::holds_alternative<ReceptionFailed>(ev) || std::holds_alternative<CollisionIndication>(ev)) {
        if (waiting) give_up();
        return r;
    }

    if (const auto* t = std::get_if<TimerExpired>(&ev)) {
        if (t->kind == TimerKind::RisLink && s.role_state == FsmState::RelayRisActive) {
            s.ris_link_timer_expiry.reset();
            r.actions.emplace_back(ReleaseRisLink{});
            settle(s);
            return r;
        }
        if (t->kind == TimerKind::Response && waiting) {
            give_up();
            return r;
        }
        return unchanged(state, "stale timer");
    }

    return unchanged(state, "event not handled by the receiving side");
}

}  // namespace

StepResult sender_step(const ProtocolConfig& cfg, const NodeState& state, SimTime now, const Event& ev) {
    return sender_impl(cfg, NodeState(state), now, ev);
}

StepResult receiver_step(const ProtocolConfig& cfg, const NodeState& state, SimTime now,
                         const Event& ev) {
    return receiver_impl(cfg, NodeState(state), now, ev);
}

StepResult node_step(const ProtocolConfig& cfg, const NodeState& state, SimTime now, const Event& ev) {
    NodeState s = state;
    if (const auto* rx = std::get_if<FrameReceived>(&ev)) s = update_nav(std::move(s), now, rx->frame, rx->from);

    const FsmState st = s.role_state;
    const bool to_receiver = [&] {
        if (is_receiver_state(st)) return true;
        if (is_sender_state(st) && st != FsmState::Backoff) return false;
        // Idle or Backoff: an R-RTS addressed to us starts the receiving side.
        if (const auto* rx = std::get_if<FrameReceived>(&ev)) {
            return rx->frame.kind == FrameKind::RRts && rx->frame.receiver == s.node_id;
        }
        return false;
    }();

    if (st == FsmState::Idle && !to_receiver && !std::holds_alternative<SendRequest>(ev)) {
        if (std::holds_alternative<ContentionSlot>(ev) || std::holds_alternative<TimerExpired>(ev)) {
            return unchanged(s, "event has no meaning while idle");
        }
        return StepResult{std::move(s), {}, {}};  // receptions and other traffic: nothing to do
    }
    if (to_receiver && !std::holds_alternative<SendRequest>(ev)) {
        return receiver_impl(cfg, std::move(s), now, ev);
    }
    return sender_impl(cfg, std::move(s), now, ev);
}

}  // namespace risdcf::protocol
