// Drives the message fabric and hop protection in isolation: strict FIFO
// delivery, transcript bookkeeping, the adversary action grammar and each
// action's effect, per-direction counters with replay flagging, and the
// nonce-reuse tripwire.

#include "doctest.h"
#include "transtrust/channels.hpp"
#include "transtrust/rng.hpp"

using namespace transtrust;

namespace {

Envelope make_envelope(const std::string& from, const std::string& to, MsgKind kind,
                       Bytes payload) {
    Envelope env;
    env.from = from;
    env.to = to;
    env.kind = kind;
    env.payload = std::move(payload);
    return env;
}

Session make_session(SeededRng& rng) {
    Session s;
    s.id = 1;
    s.initiator = "a";
    s.responder = "b";
    s.transport.bytes = rng.next_seed();
    return s;
}

}  // namespace

TEST_CASE("fabric delivers strictly in send order and stamps phases") {
    Fabric fabric;
    fabric.set_phase("setup");
    std::uint64_t s1 = fabric.send(make_envelope("a", "b", MsgKind::ChannelHello, {0x01}));
    fabric.set_phase("flow");
    std::uint64_t s2 = fabric.send(make_envelope("b", "a", MsgKind::ChannelAttest, {0x02}));
    std::uint64_t s3 = fabric.send(make_envelope("a", "b", MsgKind::ChannelAccept, {0x03}));
    CHECK(s1 < s2);
    CHECK(s2 < s3);

    for (std::uint64_t expected : {s1, s2, s3}) {
        FabricStep step = fabric.deliver_next();
        REQUIRE(step.kind == StepKind::Delivered);
        CHECK(step.env.seq == expected);
        fabric.settle(expected, true);
    }
    CHECK(fabric.idle());
    CHECK(fabric.deliver_next().kind == StepKind::Idle);

    const auto& entries = fabric.transcript().entries;
    REQUIRE(entries.size() == 3);
    CHECK(entries[0].phase == "setup");
    CHECK(entries[1].phase == "flow");
    CHECK(entries[0].delivered_at < entries[1].delivered_at);
    CHECK(entries[1].delivered_at < entries[2].delivered_at);
    CHECK(entries[0].accepted);
    CHECK_THROWS_AS(fabric.settle(999, true), std::runtime_error);
}

TEST_CASE("adversary action grammar round-trips and rejects malformed text") {
    auto tamper = AdversaryAction::parse("tamper:WrappedTau:3");
    REQUIRE(tamper.has_value());
    CHECK(tamper->kind == AdversaryAction::Kind::Tamper);
    CHECK(tamper->match_kind == MsgKind::WrappedTau);
    CHECK(tamper->byte_index == 3);
    CHECK(tamper->describe() == "tamper:WrappedTau:3");

    auto by_seq = AdversaryAction::parse("drop:17");
    REQUIRE(by_seq.has_value());
    CHECK(by_seq->match_seq == 17);
    CHECK(by_seq->describe() == "drop:17");

    CHECK(AdversaryAction::parse("duplicate:QuoteL2").has_value());
    auto clone = AdversaryAction::parse("clone_credential:phone-a");
    REQUIRE(clone.has_value());
    CHECK(clone->agent == "phone-a");
    CHECK(clone->describe() == "clone_credential:phone-a");

    for (const char* bad :
         {"", "smash:1", "tamper", "tamper:WrappedTau", "tamper:WrappedTau:x",
          "tamper:WrappedTau:3:junk", "drop:", "drop:NoSuchKind", "duplicate",
          "clone_credential:", "clone_credential:a:b"}) {
        CAPTURE(bad);
        CHECK_FALSE(AdversaryAction::parse(bad).has_value());
    }
}

TEST_CASE("tamper flips exactly the scripted payload byte") {
    Fabric fabric;
    fabric.install({*AdversaryAction::parse("tamper:TauPresent:1")});
    fabric.send(make_envelope("a", "b", MsgKind::TauPresent, {0x10, 0x20, 0x30}));
    fabric.send(make_envelope("a", "b", MsgKind::QuoteL1, {0x40}));

    FabricStep hit = fabric.deliver_next();
    CHECK(hit.env.payload == Bytes{0x10, 0x21, 0x30});
    // The transcript keeps the payload as it actually crossed the wire.
    CHECK(fabric.transcript().entries[0].env.payload == Bytes{0x10, 0x21, 0x30});
    CHECK(fabric.transcript().entries[0].adversary_note == "tamper:TauPresent:1");

    FabricStep miss = fabric.deliver_next();
    CHECK(miss.env.payload == Bytes{0x40});
}

TEST_CASE("dropped envelopes never reach the recipient and settle as rejected") {
    Fabric fabric;
    fabric.install({*AdversaryAction::parse("drop:QuoteL2")});
    fabric.send(make_envelope("a", "b", MsgKind::QuoteL2, {0x01}));

    FabricStep step = fabric.deliver_next();
    CHECK(step.kind == StepKind::Dropped);
    const TranscriptEntry& entry = fabric.transcript().entries[0];
    CHECK(entry.settled);
    CHECK_FALSE(entry.accepted);
    CHECK(entry.reject_reason == "dropped");
    CHECK(entry.delivered_at == -1);
}

TEST_CASE("duplicate re-enqueues one copy and the copy is not re-duplicated") {
    Fabric fabric;
    fabric.install({*AdversaryAction::parse("duplicate:GammaAuth")});
    std::uint64_t original = fabric.send(make_envelope("a", "b", MsgKind::GammaAuth, {0x05}));

    FabricStep first = fabric.deliver_next();
    CHECK(first.kind == StepKind::Delivered);
    CHECK_FALSE(fabric.idle());

    FabricStep copy = fabric.deliver_next();
    CHECK(copy.kind == StepKind::Delivered);
    CHECK(copy.env.seq > original);
    CHECK(copy.env.payload == first.env.payload);
    CHECK(fabric.idle());

    REQUIRE(fabric.transcript().entries.size() == 2);
    CHECK(fabric.transcript().entries[1].adversary_note ==
          "duplicate:GammaAuth of " + std::to_string(original));
    // Inserting the copy grows the transcript mid-delivery; the original's
    // delivery tick must land on the real entry, not a stale slot.
    CHECK(fabric.transcript().entries[0].delivered_at == 0);
    CHECK(fabric.transcript().entries[1].delivered_at == 1);
}

TEST_CASE("hop protection opens in order, flags replays and rejects mutation") {
    SeededRng rng(5);
    NonceGuard guard;
    Session session = make_session(rng);

    Envelope env = make_envelope("a", "b", MsgKind::TauPresent, {});
    env.session_id = session.id;
    env.payload = session_seal(session, guard, "a", "b", MsgKind::TauPresent,
                               env.counter, bytes_of("hello"));

    OpenResult opened = session_open(session, env);
    CHECK(opened.status == OpenStatus::Ok);
    CHECK(opened.plaintext == bytes_of("hello"));
    // A second delivery of the same counter is a replay, not a failure.
    CHECK(session_open(session, env).status == OpenStatus::Replay);

    Envelope next = make_envelope("a", "b", MsgKind::TauPresent, {});
    next.payload = session_seal(session, guard, "a", "b", MsgKind::TauPresent,
                                next.counter, bytes_of("again"));
    Envelope mutated = next;
    mutated.payload[0] ^= 0x01;
    CHECK(session_open(session, mutated).status == OpenStatus::AuthenticationFailure);

    // A different claimed kind changes the bound context and fails too.
    Envelope relabeled = next;
    relabeled.kind = MsgKind::QuoteL1;
    CHECK(session_open(session, relabeled).status == OpenStatus::AuthenticationFailure);
    CHECK(session_open(session, next).status == OpenStatus::Ok);
}

TEST_CASE("directions hold independent counters") {
    SeededRng rng(6);
    NonceGuard guard;
    Session session = make_session(rng);
    CHECK(session.direction_of("a") != session.direction_of("b"));

    Envelope forward = make_envelope("a", "b", MsgKind::AuthRequest, {});
    forward.payload = session_seal(session, guard, "a", "b", MsgKind::AuthRequest,
                                   forward.counter, bytes_of("ping"));
    Envelope back = make_envelope("b", "a", MsgKind::AuthAck, {});
    back.payload = session_seal(session, guard, "b", "a", MsgKind::AuthAck,
                                back.counter, bytes_of("pong"));
    CHECK(forward.counter == 0);
    CHECK(back.counter == 0);
    CHECK(session_open(session, back).status == OpenStatus::Ok);
    CHECK(session_open(session, forward).status == OpenStatus::Ok);
}

TEST_CASE("nonce guard trips on key and nonce reuse") {
    NonceGuard guard;
    SharedSecret key;
    key.bytes.fill(0x11);
    Nonce nonce{};
    guard.check(key, nonce);
    CHECK_THROWS_AS(guard.check(key, nonce), NonceReuseError);

    Nonce other = nonce;
    other[0] = 0x01;
    guard.check(key, other);  // fresh nonce, same key: fine

    SharedSecret second_key;
    second_key.bytes.fill(0x22);
    guard.check(second_key, nonce);  // same nonce, different key: fine
}

TEST_CASE("session evidence only ratchets upward") {
    SeededRng rng(7);
    Session session = make_session(rng);
    CHECK(session.evidence_of("a") == 0);
    session.raise_evidence("a", 2);
    CHECK(session.evidence_of("a") == 2);
    session.raise_evidence("a", 1);
    CHECK(session.evidence_of("a") == 2);
    CHECK(session.evidence_of("b") == 0);
}
