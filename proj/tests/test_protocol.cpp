#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>

#include "risdcf/protocol.hpp"

using namespace risdcf;
using namespace risdcf::protocol;

namespace {

const MacAddress S{0x0200000000A1}, R{0x0200000000B2}, D{0x0200000000C3}, X{0x0200000000D4};

ProtocolConfig config(double p = 0.1, double eta = 0.5) {
    ProtocolConfig c;
    c.eta = eta;
    c.backoff = BackoffPolicy::p_persistent(p);
    return c;
}

NodeState node(MacAddress id, bool ris = false) {
    NodeState s;
    s.node_id = id;
    s.ris_available = ris;
    std::map<MacAddress, Route> routes;
    if (id == S) routes[D] = Route{R, D};
    if (id == R) routes[D] = Route{D, D};
    s.routing = RoutingTable(routes);
    return s;
}

SimTime us(double v) { return from_us(v); }

template <class A>
std::vector<A> actions_of(const StepResult& r) {
    std::vector<A> out;
    for (const Action& a : r.actions) {
        if (const auto* x = std::get_if<A>(&a)) out.push_back(*x);
    }
    return out;
}

std::vector<Frame> sent(const StepResult& r) {
    std::vector<Frame> out;
    for (const auto& t : actions_of<TransmitFrame>(r)) out.push_back(t.frame);
    return out;
}

// Bit-serial reflected CRC-32, independent of the library.
std::uint32_t ref_crc(const BitString& b, std::size_t n) {
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t in = b.bit(i) ? 1u : 0u;
        const std::uint32_t top = (c ^ in) & 1u;
        c >>= 1;
        if (top) c ^= 0xEDB88320u;
    }
    return ~c;
}

Frame random_frame(std::mt19937_64& rng) {
    auto addr = [&] { return MacAddress{rng() & MacAddress::kMax}; };
    const auto dur = static_cast<std::uint32_t>(rng() % 0x10000);
    switch (rng() % 4) {
        case 0: return make_rrts(addr(), addr(), addr(), dur);
        case 1: return make_rcts(addr(), addr(), dur);
        case 2: return make_ack(addr(), addr(), dur);
        default: return make_data(addr(), addr(), addr(), addr(), dur, 1 + static_cast<std::uint32_t>(rng() % 4000));
    }
}

}  // namespace

// ---- frames

TEST_CASE("crc-32 check value") {
    BitString b;
    for (char ch : std::string("123456789")) {
        for (int i = 0; i < 8; ++i) b.append((static_cast<unsigned char>(ch) >> i) & 1u, 1);
    }
    CHECK(crc32_bits(b, b.size()) == 0xCBF43926u);
    CHECK(ref_crc(b, b.size()) == 0xCBF43926u);
}

TEST_CASE("encoded lengths") {
    CHECK(encode_frame(make_rrts(R, D, S, 424)).size() == 208);
    CHECK(encode_frame(make_rcts(S, D, 8456)).size() == 160);
    CHECK(encode_frame(make_ack(S, R, 0)).size() == 240);
    CHECK(encode_frame(make_data(R, D, S, S, 268, 8000)).size() == 128 + 272 + 8000);
    CHECK(encoded_length(make_data(R, D, S, S, 268, 8000)) == 8400);
}

TEST_CASE("r-rts fixture vector") {
    const Frame f = make_rrts(MacAddress{0x0A0B0C0D0E0F}, MacAddress{0x112233445566}, MacAddress{0xAABBCCDDEEFF}, 424);
    const BitString b = encode_frame(f);
    CHECK(b.read(0, 16) == 0xB480);
    CHECK(b.read(16, 16) == 424);
    CHECK(b.read(32, 48) == 0x0A0B0C0D0E0F);
    CHECK(b.read(80, 48) == 0x112233445566);
    CHECK(b.read(128, 48) == 0xAABBCCDDEEFF);
    CHECK(b.read(176, 32) == ref_crc(b, 176));
    CHECK(b.read(176, 32) == 0xBA19B3EBu);
    const Frame back = decode_frame(b);
    CHECK(back == f);
    CHECK(back.receiver.value == 0x0A0B0C0D0E0F);
    CHECK(back.destination.value == 0x112233445566);
    CHECK(back.transmitter.value == 0xAABBCCDDEEFF);
}

TEST_CASE("control word and layout of the other variants") {
    const BitString c = encode_frame(make_rcts(S, D, 8456));
    CHECK(c.read(0, 16) == 0xC480);
    CHECK(c.read(32, 48) == S.value);
    CHECK(c.read(80, 48) == D.value);
    const BitString a = encode_frame(make_ack(S, R, 364));
    CHECK(a.read(0, 16) == 0xD480);
    CHECK(a.read(16, 16) == 364);
    CHECK(a.read(128, 64) == 0);
    const BitString d = encode_frame(make_data(R, D, S, X, 268, 64));
    CHECK(d.read(0, 64) == 0xAAAAAAAAAAAAAAAAull);
    CHECK(d.read(64, 32) == 64);
    CHECK(d.read(128, 16) == 0x0880);
    CHECK(d.read(304, 48) == X.value);
}

TEST_CASE("round trip of random frames") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 10000; ++i) {
        const Frame f = random_frame(rng);
        const BitString b = encode_frame(f);
        REQUIRE(b.size() == encoded_length(f));
        REQUIRE(decode_frame(b) == f);
    }
}

TEST_CASE("any single bit flip is detected") {
    const BitString good = encode_frame(make_rrts(R, D, S, 424));
    for (std::size_t i = 0; i < good.size(); ++i) {
        BitString bad = good;
        bad.flip(i);
        CHECK_THROWS_AS(decode_frame(bad), CorruptionError);
    }
    std::mt19937_64 rng(4);
    const BitString data = encode_frame(make_data(R, D, S, S, 268, 2000));
    for (int k = 0; k < 200; ++k) {
        BitString bad = data;
        bad.flip(rng() % bad.size());
        CHECK_THROWS_AS(decode_frame(bad), CorruptionError);
    }
}

TEST_CASE("truncation") {
    const BitString rrts = encode_frame(make_rrts(R, D, S, 424));
    CHECK_THROWS_AS(decode_frame(rrts.prefix(207)), FormatError);
    CHECK_THROWS_AS(decode_frame(rrts.prefix(100)), FormatError);
    CHECK_THROWS_AS(decode_frame(BitString{}), FormatError);
    const BitString data = encode_frame(make_data(R, D, S, S, 268, 2000));
    CHECK_THROWS_AS(decode_frame(data.prefix(399)), FormatError);
    // a DATA-sized prefix fails the FCS before the length field is read
    CHECK_THROWS_AS(decode_frame(data.prefix(2000)), CorruptionError);
}

TEST_CASE("encoding errors") {
    CHECK_THROWS_AS(encode_frame(make_rrts(R, D, S, 0x10000)), EncodingError);
    CHECK_THROWS_AS(encode_frame(make_rcts(MacAddress{MacAddress::kMax + 1}, D, 0)), EncodingError);
    CHECK_NOTHROW(encode_frame(make_rcts(MacAddress{MacAddress::kMax}, D, 0xFFFF)));
}

TEST_CASE("printing") {
    CHECK(to_string(MacAddress{0x0A0B0C0D0E0F}) == "0a:0b:0c:0d:0e:0f");
    CHECK(to_string(FrameKind::RRts) == "RRTS");
    CHECK(to_string(FsmState::RelayRisActive) == "RelayRisActive");
}

// ---- NAV

TEST_CASE("nav durations") {
    const mac::MacTimings t;
    CHECK(nav_duration(make_rrts(D, D, R, 0), t) == 236);
    CHECK(nav_duration(make_rrts(R, D, S, 0), t) == 424);
    CHECK(nav_duration(make_data(R, D, S, S, 0, 8000), t) == 268);
    CHECK(nav_duration(make_rcts(S, D, 16456), t) == 16456);
    CHECK(nav_duration(make_ack(S, R, 364), t) == 364);
}

TEST_CASE("nav min rule") {
    NodeState s = node(X);
    s.nav_expiry = us(9000);
    CHECK(apply_nav_min_rule(s, SimTime{0}, us(8456)).nav_expiry == us(8456));
    s.nav_expiry = us(100);
    CHECK(apply_nav_min_rule(s, SimTime{0}, us(8456)).nav_expiry == us(100));
    s.nav_expiry = us(8456);
    CHECK(apply_nav_min_rule(s, SimTime{0}, us(8456)) == s);

    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) {
        s.nav_expiry = SimTime{static_cast<std::int64_t>(rng() % 100000000)};
        const SimTime now{static_cast<std::int64_t>(rng() % 50000000)};
        const SimTime adv{static_cast<std::int64_t>(rng() % 70000000)};
        CHECK(apply_nav_min_rule(s, now, adv).nav_expiry <= s.nav_expiry);
    }
}

TEST_CASE("overheard frames set the nav") {
    NodeState x = node(X);
    x = update_nav(x, us(1000), make_rrts(R, D, S, 424), S);
    CHECK(x.nav_expiry == us(1424));
    CHECK(x.nav_owner == S);
    // R-CTS reservation, then the DATA header shortens it
    x = update_nav(x, us(2000), make_rcts(S, D, 16456), D);
    CHECK(x.nav_expiry == us(18456));
    CHECK(x.nav_from_rcts);
    x = update_nav(x, us(2100), make_data(D, D, S, S, 268, 8000), S);
    CHECK(x.nav_expiry == us(2368));
    // frames to us do not touch the nav, except an ACK announcing a forward
    NodeState s = node(S);
    s = update_nav(s, us(10), make_rcts(S, D, 8456), D);
    CHECK(s.nav_expiry == SimTime{0});
    NodeState src = node(S);
    src = update_nav(src, us(10), make_ack(S, R, 364), R);
    CHECK(src.nav_expiry == us(374));
    CHECK(src.nav_owner == R);
}

// ---- backoff

TEST_CASE("contention window doubles then saturates") {
    const BackoffPolicy b = BackoffPolicy::exponential(32, 3);
    CHECK(b.contention_window(0) == 32);
    CHECK(b.contention_window(1) == 64);
    CHECK(b.contention_window(2) == 128);
    CHECK(b.contention_window(3) == 256);
    CHECK(b.contention_window(7) == 256);
    CHECK_THROWS_AS(BackoffPolicy::exponential(0, 3).validate(), DomainError);
    CHECK_THROWS_AS(BackoffPolicy::p_persistent(1.5).validate(), DomainError);
}

TEST_CASE("exponential counter counts idle slots only") {
    ProtocolConfig c = config();
    c.backoff = BackoffPolicy::exponential(32, 3);
    NodeState s = node(S);
    s = node_step(c, s, SimTime{0}, SendRequest{D, 8000}).state;
    // u = 3.5 / 32 draws counter 3: three silent slots, then the R-RTS
    StepResult r = node_step(c, s, us(128), ContentionSlot{3.5 / 32});
    CHECK(r.state.backoff_counter == 2);
    CHECK(sent(r).empty());
    r = node_step(c, r.state, us(178), ContentionSlot{0.9});
    CHECK(r.state.backoff_counter == 1);
    // a slot under NAV changes nothing
    NodeState navved = r.state;
    navved.nav_expiry = us(10000);
    const StepResult frozen = node_step(c, navved, us(228), ContentionSlot{0.9});
    CHECK(frozen.state == navved);
    CHECK_FALSE(frozen.diagnostics.empty());
    r = node_step(c, r.state, us(228), ContentionSlot{0.9});
    CHECK(r.state.backoff_counter == 0);
    r = node_step(c, r.state, us(278), ContentionSlot{0.9});
    REQUIRE(sent(r).size() == 1);
    CHECK(sent(r)[0].kind == FrameKind::RRts);
}

// ---- sending side

TEST_CASE("idle with nothing to do stays idle") {
    const NodeState s = node(S);
    const StepResult r = sender_step(config(), s, SimTime{0}, ReceptionStarted{});
    CHECK(r.state == s);
    CHECK(r.actions.empty());
    const StepResult n = node_step(config(), s, SimTime{0}, ReceptionStarted{});
    CHECK(n.state == s);
    CHECK(n.actions.empty());
}

TEST_CASE("malformed events leave the state unchanged with a diagnostic") {
    const NodeState s = node(S);
    const StepResult r = sender_step(config(), s, SimTime{0}, TimerExpired{TimerKind::Response});
    CHECK(r.state == s);
    CHECK(r.actions.empty());
    CHECK_FALSE(r.diagnostics.empty());
    const StepResult slot = sender_step(config(), s, SimTime{0}, ContentionSlot{0.0});
    CHECK(slot.state == s);
    CHECK_FALSE(slot.diagnostics.empty());
}

TEST_CASE("sender reaches the destination through the ris relay") {
    const ProtocolConfig c = config();
    StepResult r = sender_step(c, node(S), SimTime{0}, SendRequest{D, 8000});
    CHECK(r.state.role_state == FsmState::Backoff);

    // u >= p: no transmission
    StepResult quiet = sender_step(c, r.state, us(128), ContentionSlot{0.5});
    CHECK(quiet.actions.empty());
    CHECK(quiet.state.role_state == FsmState::Backoff);

    r = sender_step(c, r.state, us(128), ContentionSlot{0.05});
    REQUIRE(sent(r).size() == 1);
    const Frame rrts = sent(r)[0];
    CHECK(rrts.kind == FrameKind::RRts);
    CHECK(rrts.receiver == R);
    CHECK(rrts.destination == D);
    CHECK(rrts.transmitter == S);
    CHECK(rrts.duration_us == 424);
    CHECK(r.state.role_state == FsmState::AwaitRCts);

    r = sender_step(c, r.state, us(336), TransmissionComplete{rrts});
    REQUIRE(actions_of<SetTimer>(r).size() == 1);
    CHECK(actions_of<SetTimer>(r)[0].expiry == us(336 + 28 + 50));

    // the relay forwards our R-RTS: keep waiting
    r = sender_step(c, r.state, us(572), FrameReceived{make_rrts(D, D, S, 236), R});
    CHECK(r.state.role_state == FsmState::AwaitRCts);
    CHECK(actions_of<SetTimer>(r).size() == 1);

    // R-CTS comes from D over the RIS: DATA goes to D, not to R
    r = sender_step(c, r.state, us(760), FrameReceived{make_rcts(S, D, 16456), D});
    CHECK(r.state.role_state == FsmState::TxData);
    REQUIRE(actions_of<TransmitFrame>(r).size() == 1);
    const TransmitFrame data = actions_of<TransmitFrame>(r)[0];
    CHECK(data.start_offset == us(28));
    CHECK(data.frame.kind == FrameKind::Data);
    CHECK(data.frame.receiver == D);
    CHECK(data.frame.destination == D);
    CHECK(data.frame.sender == S);
    CHECK(data.frame.duration_us == 268);

    r = sender_step(c, r.state, us(17000), TransmissionComplete{data.frame});
    CHECK(r.state.role_state == FsmState::AwaitAck);
    r = sender_step(c, r.state, us(17268), FrameReceived{make_ack(S, D, 0), D});
    REQUIRE(actions_of<TransferSucceeded>(r).size() == 1);
    CHECK(actions_of<TransferSucceeded>(r)[0].payload_bits == 8000);
    CHECK(r.state.role_state == FsmState::Idle);
    CHECK_FALSE(r.state.pending.has_value());
}

TEST_CASE("r-cts from the next hop sends DATA to the next hop") {
    const ProtocolConfig c = config();
    NodeState s = node(S);
    s.routing = RoutingTable({{D, Route{R, R}}});
    StepResult r = sender_step(c, s, SimTime{0}, SendRequest{D, 8000});
    r = sender_step(c, r.state, us(128), ContentionSlot{0.0});
    CHECK(sent(r)[0].duration_us == 236);
    r = sender_step(c, r.state, us(400), FrameReceived{make_rcts(S, R, 8456), R});
    CHECK(sent(r)[0].receiver == R);
    CHECK(sent(r)[0].destination == D);
}

TEST_CASE("missing r-cts backs off with a larger window") {
    const ProtocolConfig c = config();
    StepResult r = sender_step(c, node(S), SimTime{0}, SendRequest{D, 8000});
    r = sender_step(c, r.state, us(128), ContentionSlot{0.0});
    r = sender_step(c, r.state, us(500), TimerExpired{TimerKind::Response});
    CHECK(r.state.role_state == FsmState::Backoff);
    CHECK(r.state.backoff_stage == 1);
    CHECK(r.state.retry_counter == 0);
    CHECK(r.state.pending.has_value());
}

TEST_CASE("abort after the retry limit") {
    const ProtocolConfig c = config();
    NodeState s = node(S);
    s = sender_step(c, s, SimTime{0}, SendRequest{D, 8000}).state;
    int data_attempts = 0;
    int aborts = 0;
    int failed_attempts = -1;
    for (int round = 0; round < 20 && aborts == 0; ++round) {
        StepResult r = sender_step(c, s, us(1000.0 * round), ContentionSlot{0.0});
        r = sender_step(c, r.state, us(1000.0 * round + 500), FrameReceived{make_rcts(S, D, 16456), D});
        ++data_attempts;
        CHECK(r.state.retry_counter <= c.retry_limit);
        CHECK(r.state.backoff_stage <= c.backoff.max_stage);
        r.state.role_state = FsmState::AwaitAck;  // skip the DATA airtime
        const bool at_limit = r.state.retry_counter == c.retry_limit;
        r = sender_step(c, r.state, us(1000.0 * round + 900), TimerExpired{TimerKind::Response});
        const auto ab = actions_of<AbortTransfer>(r);
        CHECK(ab.empty() != at_limit);
        if (!ab.empty()) {
            ++aborts;
            failed_attempts = ab[0].failed_attempts;
            CHECK(r.state.role_state == FsmState::Idle);
            CHECK_FALSE(r.state.pending.has_value());
            CHECK(r.state.retry_counter == 0);
        }
        s = r.state;
    }
    CHECK(aborts == 1);
    CHECK(data_attempts == c.retry_limit + 1);
    CHECK(failed_attempts == c.retry_limit + 1);
}

TEST_CASE("stray frame while awaiting the r-cts counts as a failure") {
    const ProtocolConfig c = config();
    StepResult r = sender_step(c, node(S), SimTime{0}, SendRequest{D, 8000});
    r = sender_step(c, r.state, us(128), ContentionSlot{0.0});
    r = sender_step(c, r.state, us(600), FrameReceived{make_rcts(X, D, 100), D});
    CHECK(r.state.role_state == FsmState::Backoff);
    CHECK(r.state.backoff_stage == 1);
}

TEST_CASE("no route aborts with a diagnostic") {
    const ProtocolConfig c = config();
    StepResult r = sender_step(c, node(S), SimTime{0}, SendRequest{X, 8000});
    r = sender_step(c, r.state, us(128), ContentionSlot{0.0});
    CHECK(actions_of<AbortTransfer>(r).size() == 1);
    CHECK_FALSE(r.diagnostics.empty());
}

// ---- receiving side

TEST_CASE("destination answers an r-rts addressed to it") {
    const ProtocolConfig c = config();
    const StepResult direct = receiver_step(c, node(D), us(208), FrameReceived{make_rrts(D, D, S, 236), S});
    REQUIRE(actions_of<TransmitFrame>(direct).size() == 1);
    const TransmitFrame rcts = actions_of<TransmitFrame>(direct)[0];
    CHECK(rcts.start_offset == us(28));
    CHECK(rcts.frame.kind == FrameKind::RCts);
    CHECK(rcts.frame.receiver == S);
    CHECK(rcts.frame.sender == D);
    CHECK(rcts.frame.duration_us == 400 + 8000 + 56);
    CHECK(direct.state.role_state == FsmState::AwaitData);

    // forwarded over the RIS: the DATA will take T_data / eta
    const StepResult via = receiver_step(c, node(D), us(444), FrameReceived{make_rrts(D, D, S, 236), R});
    CHECK(sent(via)[0].duration_us == 400 + 16000 + 56);

    StepResult r = receiver_step(c, via.state, us(17000), FrameReceived{make_data(D, D, S, S, 268, 8000), S});
    REQUIRE(actions_of<DeliverPayload>(r).size() == 1);
    CHECK(actions_of<DeliverPayload>(r)[0].origin == S);
    CHECK(actions_of<DeliverPayload>(r)[0].payload_bits == 8000);
    const Frame ack = sent(r).at(0);
    CHECK(ack.kind == FrameKind::Ack);
    CHECK(ack.receiver == S);
    CHECK(ack.duration_us == 0);
    CHECK(r.state.role_state == FsmState::Idle);
}

TEST_CASE("ris relay lifecycle") {
    const ProtocolConfig c = config();
    StepResult r = receiver_step(c, node(R, true), us(208), FrameReceived{make_rrts(R, D, S, 424), S});
    REQUIRE(actions_of<AdjustRisPhase>(r).size() == 1);
    CHECK(actions_of<AdjustRisPhase>(r)[0].source == S);
    CHECK(actions_of<AdjustRisPhase>(r)[0].target == D);
    const TransmitFrame fwd = actions_of<TransmitFrame>(r).at(0);
    CHECK(fwd.start_offset == us(28));
    CHECK(fwd.frame.receiver == D);
    CHECK(fwd.frame.destination == D);
    CHECK(fwd.frame.transmitter == S);
    CHECK(fwd.frame.duration_us == 236);
    CHECK(r.state.role_state == FsmState::RelayAwaitRCts);

    r = receiver_step(c, r.state, us(472), TransmissionComplete{fwd.frame});
    r = receiver_step(c, r.state, us(660), FrameReceived{make_rcts(S, D, 16456), D});
    CHECK(r.state.role_state == FsmState::RelayRisActive);
    REQUIRE(r.state.ris_link_timer_expiry.has_value());
    CHECK(*r.state.ris_link_timer_expiry == us(660 + 16456 + 28 + 240));
    CHECK(actions_of<SetTimer>(r).at(0).kind == TimerKind::RisLink);

    // passive while the link is up
    const StepResult overheard = receiver_step(c, r.state, us(17000), FrameReceived{make_data(D, D, S, S, 268, 8000), S});
    CHECK(sent(overheard).empty());

    r = receiver_step(c, r.state, us(17384), TimerExpired{TimerKind::RisLink});
    CHECK(actions_of<ReleaseRisLink>(r).size() == 1);
    CHECK(r.state.role_state == FsmState::Idle);
    CHECK_FALSE(r.state.ris_link_timer_expiry.has_value());
}

TEST_CASE("ris relay releases the link when the second hop fails") {
    const ProtocolConfig c = config();
    StepResult r = receiver_step(c, node(R, true), us(208), FrameReceived{make_rrts(R, D, S, 424), S});
    r = receiver_step(c, r.state, us(472), TransmissionComplete{sent(r)[0]});
    r = receiver_step(c, r.state, us(550), TimerExpired{TimerKind::Response});
    CHECK(actions_of<ReleaseRisLink>(r).size() == 1);
    CHECK(r.state.role_state == FsmState::Idle);
}

TEST_CASE("store and forward relay") {
    const ProtocolConfig c = config(0.1);
    StepResult r = node_step(c, node(R, false), us(208), FrameReceived{make_rrts(R, D, S, 424), S});
    const Frame rcts = sent(r).at(0);
    CHECK(rcts.kind == FrameKind::RCts);
    CHECK(rcts.receiver == S);
    CHECK(rcts.duration_us == 8456);
    CHECK(r.state.role_state == FsmState::RelayStoreForward);

    r = node_step(c, r.state, us(600), FrameReceived{make_data(R, D, S, S, 268, 8000), S});
    CHECK(actions_of<DeliverPayload>(r).empty());
    const Frame ack = sent(r).at(0);
    CHECK(ack.kind == FrameKind::Ack);
    CHECK(ack.receiver == S);
    CHECK(ack.duration_us == 128 + 208 + 28);
    CHECK(r.state.role_state == FsmState::Backoff);
    REQUIRE(r.state.pending.has_value());
    CHECK(r.state.pending->forwarding);
    CHECK(r.state.pending->origin == S);

    // the forward goes at the first slot regardless of p
    r = node_step(c, r.state, us(9000), ContentionSlot{0.99});
    const Frame fwd = sent(r).at(0);
    CHECK(fwd.kind == FrameKind::RRts);
    CHECK(fwd.receiver == D);
    CHECK(fwd.transmitter == R);
    r = node_step(c, r.state, us(9300), FrameReceived{make_rcts(R, D, 8456), D});
    CHECK(sent(r).at(0).sender == S);  // SA keeps the originating source
}

TEST_CASE("a node under someone else's nav stays silent") {
    const ProtocolConfig c = config();
    NodeState d = node(D);
    d.nav_expiry = us(5000);
    d.nav_owner = X;
    const StepResult r = node_step(c, d, us(1000), FrameReceived{make_rrts(D, D, S, 236), S});
    CHECK(r.actions.empty());
    // the reservation holder itself may still address us
    d.nav_owner = S;
    CHECK(sent(node_step(c, d, us(1000), FrameReceived{make_rrts(D, D, S, 236), S})).size() == 1);
}

TEST_CASE("oversized durations are clamped with a diagnostic") {
    const ProtocolConfig c = config(0.1, 0.1);  // T_data / eta = 80000 us
    const StepResult r = receiver_step(c, node(D), us(444), FrameReceived{make_rrts(D, D, S, 236), R});
    CHECK(sent(r)[0].duration_us == 0xFFFF);
    CHECK_FALSE(r.diagnostics.empty());
}

// ---- properties over random event traces

TEST_CASE("random traces: determinism, timer and passivity invariants") {
    const ProtocolConfig c = config(0.3);
    std::mt19937_64 rng(77);
    const std::vector<MacAddress> who = {S, R, D, X};
    auto pick = [&] { return who[rng() % who.size()]; };
    auto random_event = [&]() -> Event {
        switch (rng() % 9) {
            case 0: return SendRequest{D, 8000};
            case 1: return ContentionSlot{std::uniform_real_distribution<double>(0, 1)(rng)};
            case 2: return ReceptionStarted{};
            case 3: return ReceptionFailed{};
            case 4: return TimerExpired{rng() % 2 ? TimerKind::Response : TimerKind::RisLink};
            case 5: return CollisionIndication{};
            case 6: return FrameReceived{make_rrts(R, rng() % 2 ? D : R, pick(), 424), pick()};
            case 7: return FrameReceived{make_rcts(pick(), pick(), 16456), pick()};
            default: {
                if (rng() % 2) return FrameReceived{make_data(pick(), pick(), pick(), S, 268, 8000), pick()};
                return FrameReceived{make_ack(pick(), pick(), rng() % 2 ? 0 : 364), pick()};
            }
        }
    };
    int ris_active_steps = 0;
    for (int trace = 0; trace < 200; ++trace) {
        NodeState s = node(R, true);
        SimTime now{0};
        for (int step = 0; step < 300; ++step) {
            now += us(static_cast<double>(rng() % 500));
            const Event ev = random_event();
            const StepResult a = node_step(c, s, now, ev);
            const StepResult b = node_step(c, s, now, ev);
            REQUIRE(a.state == b.state);
            REQUIRE(a.actions.size() == b.actions.size());
            if (s.role_state == FsmState::RelayRisActive) {
                ++ris_active_steps;
                for (const Frame& f : sent(a)) {
                    REQUIRE(f.kind != FrameKind::Data);
                    REQUIRE(f.kind != FrameKind::Ack);
                }
            }
            REQUIRE(a.state.ris_link_timer_expiry.has_value() == (a.state.role_state == FsmState::RelayRisActive));
            REQUIRE(a.state.retry_counter <= c.retry_limit);
            REQUIRE(a.state.backoff_stage <= c.backoff.max_stage);
            REQUIRE(a.state.backoff_stage >= 0);
            s = a.state;
        }
    }
    CHECK(ris_active_steps > 0);
}
