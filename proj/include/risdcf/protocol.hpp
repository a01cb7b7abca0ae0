#pragma once

// Sender and receiver state machines of RIS-DCF, plus NAV bookkeeping.
//
// The machines are pure: a step takes the current state, the time and one
// event and returns the next state together with the actions the node wants
// performed. Timing (interframe spaces, carrier sensing, slot boundaries) is
// the caller's job; a ContentionSlot event stands for "the medium has been
// idle for DIFS plus a whole number of slots and the NAV has expired".

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "risdcf/frame.hpp"
#include "risdcf/mac_analytic.hpp"
#include "risdcf/sim_time.hpp"

namespace risdcf::protocol {

enum class BackoffKind { PPersistent, Exponential };

struct BackoffPolicy {
    BackoffKind kind = BackoffKind::PPersistent;
    double p = 0.1;
    int window = 32;    // W
    int max_stage = 3;  // n

    static BackoffPolicy p_persistent(double p);
    static BackoffPolicy exponential(int window, int max_stage);

    void validate() const;
    // min(2^stage W, 2^n W)
    std::int64_t contention_window(int stage) const;
};

struct ProtocolConfig {
    mac::MacTimings timings;
    double eta = 1.0;  // payload airtime over a RIS link is T_data / eta
    BackoffPolicy backoff;
    int retry_limit = 7;

    void validate() const;

    SimTime sifs() const;
    SimTime difs() const;
    SimTime slot() const;
    SimTime rrts() const;
    SimTime rcts() const;
    SimTime ack() const;
    // Header plus payload; the header always goes at the base rate.
    SimTime data_airtime(bool via_ris) const;
    // Deadline for the start of a response, measured from the end of our frame.
    SimTime response_timeout() const { return sifs() + slot(); }
};

enum class FsmState {
    Idle,
    Backoff,
    AwaitRCts,
    TxData,
    AwaitAck,
    AwaitData,
    RelayAwaitRCts,
    RelayRisActive,
    RelayStoreForward,
};

std::string_view to_string(FsmState s);

enum class TimerKind { Response, RisLink };

// next_hop is the RA of our R-RTS; segment_target its DA. They differ when
// next_hop is a RIS relay that reflects towards segment_target.
struct Route {
    MacAddress next_hop;
    MacAddress segment_target;

    friend bool operator==(const Route&, const Route&) = default;
};

// Static destination -> route map. Copies share one immutable table, so
// stepping a node state does not copy its routes.
class RoutingTable {
public:
    RoutingTable() = default;
    explicit RoutingTable(std::map<MacAddress, Route> routes);

    const Route* find(MacAddress destination) const;
    void set(MacAddress destination, Route route);
    std::size_t size() const { return routes_ ? routes_->size() : 0; }

    friend bool operator==(const RoutingTable& a, const RoutingTable& b);

private:
    std::shared_ptr<const std::map<MacAddress, Route>> routes_;
};

struct Transfer {
    MacAddress destination;  // final destination
    MacAddress origin;
    std::uint32_t payload_bits = 0;
    bool forwarding = false;  // relayed payload; sent at the first contention slot

    friend bool operator==(const Transfer&, const Transfer&) = default;
};

struct NodeState {
    MacAddress node_id;
    FsmState role_state = FsmState::Idle;
    SimTime nav_expiry{0};
    bool nav_from_rcts = false;
    MacAddress nav_owner;  // radio whose frame last extended the NAV
    int backoff_counter = -1;  // -1: no counter drawn yet
    int backoff_stage = 0;
    int retry_counter = 0;
    std::optional<SimTime> ris_link_timer_expiry;
    bool ris_available = false;
    RoutingTable routing;
    std::optional<Transfer> pending;

    // Exchange in progress. Sender: peer = RA of our R-RTS, target = its DA,
    // data_receiver = RA of our DATA. Receiver: peer = TA of the R-RTS,
    // target = its DA.
    MacAddress peer;
    MacAddress target;
    MacAddress data_receiver;

    std::uint32_t pending_payload_bits() const { return pending ? pending->payload_bits : 0; }

    friend bool operator==(const NodeState&, const NodeState&) = default;
};

// Events.
struct SendRequest {
    MacAddress destination;
    std::uint32_t payload_bits = 0;
};
struct ContentionSlot {
    double uniform = 0.0;  // one U[0,1) draw, consumed by the backoff policy
};
struct TransmissionComplete {
    Frame frame;
};
struct ReceptionStarted {};
struct FrameReceived {
    Frame frame;
    MacAddress from;  // radio that emitted it; differs from TA on a forwarded R-RTS
};
struct ReceptionFailed {};
struct TimerExpired {
    TimerKind kind = TimerKind::Response;
};
struct CollisionIndication {};

using Event = std::variant<SendRequest, ContentionSlot, TransmissionComplete, ReceptionStarted,
                           FrameReceived, ReceptionFailed, TimerExpired, CollisionIndication>;

// Actions.
struct TransmitFrame {
    Frame frame;
    SimTime start_offset{0};
};
struct SetTimer {
    TimerKind kind = TimerKind::Response;
    SimTime expiry{0};
};
struct CancelTimer {
    TimerKind kind = TimerKind::Response;
};
struct AdjustRisPhase {
    MacAddress source;
    MacAddress target;
};
struct ReleaseRisLink {};
struct DeliverPayload {
    MacAddress origin;
    std::uint32_t payload_bits = 0;
};
struct TransferSucceeded {
    std::uint32_t payload_bits = 0;
};
struct AbortTransfer {
    int failed_attempts = 0;
};

using Action = std::variant<TransmitFrame, SetTimer, CancelTimer, AdjustRisPhase, ReleaseRisLink,
                            DeliverPayload, TransferSucceeded, AbortTransfer>;

struct StepResult {
    NodeState state;
    std::vector<Action> actions;
    std::vector<std::string> diagnostics;  // protocol violations, clamped durations
};

// NAV per observed frame kind, in microseconds. For R-CTS and ACK the
// advertised field already holds it, so it is returned as carried.
std::uint32_t nav_duration(const Frame& observed, const mac::MacTimings& timings);

// NAV := min(NAV, now + advertised); never extends it.
NodeState apply_nav_min_rule(NodeState state, SimTime now, SimTime advertised);

// NAV update for a correctly received frame. Frames addressed elsewhere set
// the NAV (max rule, or the min rule for DATA under an R-CTS reservation);
// an ACK also sets it at its addressee when it announces a forward.
NodeState update_nav(NodeState state, SimTime now, const Frame& frame, MacAddress from);

// Sending-side and receiving-side state machines. Events that
// belong to the other machine or to no state yield a diagnostic and leave the
// state untouched.
StepResult sender_step(const ProtocolConfig& cfg, const NodeState& state, SimTime now, const Event& ev);
StepResult receiver_step(const ProtocolConfig& cfg, const NodeState& state, SimTime now,
                         const Event& ev);

// Full node: NAV update, then whichever machine owns the event.
StepResult node_step(const ProtocolConfig& cfg, const NodeState& state, SimTime now, const Event& ev);

bool is_sender_state(FsmState s);
bool is_receiver_state(FsmState s);

}  // namespace risdcf::protocol
