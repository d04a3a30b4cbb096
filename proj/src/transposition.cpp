#include "transtrust/operations.hpp"

#include <algorithm>
#include <map>

// Transposition of trust: a buyer device a settles with a merchant till b
// while each side's trust is rooted at its own principal. The till's
// credential is checked by its owner B (step A); the buyer pledges its
// trust credential through the chain to B without revealing it to the
// relaying home operator A (step B).
//
// Relay layout (one hop session each): b <-> a <-> A <-> B. The A<->B
// session is provisioned out of band between the principals.
//
//   setup   ChannelHello/Attest + mutual quotes + Accept   b <-> a
//   setup   ChannelHello/Attest + gamma + quotes + Accept  a <-> A
//   step A  TauPresent   b -> a -> A -> B    till credential, pseudonymous
//           AuthRequest  B -> A -> a -> b    gamma challenge
//           GammaAuth    b -> a -> A -> B    response MAC, no serial
//           AuthAck      B -> A -> a         till accepted
//   step B  TauPresent   a -> b              full pledge, hop-sealed only
//           AuthRequest  b -> a -> A -> B    signed key share for X and Y
//           AuthAck      B -> A -> a -> b    signed reply share
//           WrappedTau   b -> a -> A -> B    X(tau_a): opaque to the relays
//           TauPresent   B -> A              redemption by key id
//           AuthAck      A -> B              identity acknowledged
//           WrappedAck   B -> A -> a -> b    Y(ack) with binding digest
//
// X and Y are subkeys of one signed key agreement between b and B; the
// relays never hold them, which is what the privacy checks measure.

namespace transtrust {

namespace {

// TauPresent payload forms.
constexpr std::uint8_t kTauPseudonymous = 0;
constexpr std::uint8_t kTauFull = 1;
constexpr std::uint8_t kTauRedemption = 2;

// AuthRequest / AuthAck purposes.
constexpr std::uint8_t kGammaChallenge = 0;
constexpr std::uint8_t kXdhShare = 1;
constexpr std::uint8_t kStepAAck = 0;
constexpr std::uint8_t kXdhReply = 1;
constexpr std::uint8_t kIdentityAck = 2;

Bytes encode_tau_pseudonymous(const TrustCredential& tau) {
    ByteWriter w;
    w.u8(kTauPseudonymous);
    w.lp(tau.tpm_key_id.view());
    w.lp(tau.issuer_key_id.view());
    w.lp(tau.issuer_cert);
    return w.take();
}

Bytes encode_tau_full(const TrustCredential& tau) {
    ByteWriter w;
    w.u8(kTauFull);
    w.lp(tau.full_bytes());
    return w.take();
}

Bytes encode_tau_redemption(const Digest& key_id) {
    ByteWriter w;
    w.u8(kTauRedemption);
    w.lp(key_id.view());
    return w.take();
}

Bytes sign_context(ByteView share, ByteView peer_share, std::string_view label) {
    ByteWriter w;
    w.lp(share);
    w.lp(peer_share);
    w.lp(bytes_of(label));
    return w.take();
}

const char kWrapAad[] = "wrapped-tau";
const char kAckAad[] = "wrapped-ack";

Bytes wrap_under(const SharedSecret& key, PrivacyMode mode, ByteView body,
                 std::string_view aad, NonceGuard& guard) {
    ByteWriter w;
    w.u8(mode == PrivacyMode::Encrypted ? 0 : 1);
    if (mode == PrivacyMode::Encrypted) {
        Nonce nonce{};  // one message per derived key and direction
        guard.check(key, nonce);
        w.lp(aead_seal(key, nonce, bytes_of(aad), body));
    } else {
        w.lp(body);
        auto tag = mac(key, body);
        w.lp(ByteView(tag.data(), tag.size()));
    }
    return w.take();
}

std::optional<Bytes> unwrap_under(const SharedSecret& key, ByteView payload,
                                  std::string_view aad) {
    try {
        ByteReader r(payload);
        std::uint8_t mode = r.u8();
        if (mode == 0) {
            Bytes ciphertext = r.lp();
            r.expect_end();
            Nonce nonce{};
            return aead_open(key, nonce, bytes_of(aad), ciphertext);
        }
        Bytes body = r.lp();
        Bytes tag = r.lp();
        r.expect_end();
        if (!mac_verify(key, body, tag)) {
            return std::nullopt;
        }
        return body;
    } catch (const WireError&) {
        return std::nullopt;
    }
}

struct Relays {
    World& world;
    Session& ba;
    Session& aA;
    Session& AB;
    const TranspositionRequest& req;

    // Forwards an opened payload one hop along the chain, in either
    // direction; the relays stay blind to the content.
    void toward_merchant_principal(const std::string& at, MsgKind kind,
                                   ByteView payload) {
        if (at == req.buyer) {
            send_sealed(world, aA, req.buyer, req.home_principal, kind, payload);
        } else if (at == req.home_principal) {
            send_sealed(world, AB, req.home_principal, req.merchant_principal, kind,
                        payload);
        } else {
            throw std::runtime_error("transposition: bad relay hop");
        }
    }
    void toward_merchant(const std::string& at, MsgKind kind, ByteView payload) {
        if (at == req.home_principal) {
            send_sealed(world, aA, req.home_principal, req.buyer, kind, payload);
        } else if (at == req.buyer) {
            send_sealed(world, ba, req.buyer, req.merchant, kind, payload);
        } else {
            throw std::runtime_error("transposition: bad relay hop");
        }
    }
};

}  // namespace

TranspositionOutcome run_transposition(World& world,
                                       const TranspositionRequest& request,
                                       StepBudget& budget) {
    AgentState& buyer = world.agent(request.buyer);
    AgentState& merchant = world.agent(request.merchant);
    PrincipalState& home = world.principal(request.home_principal);
    PrincipalState& owner = world.principal(request.merchant_principal);

    TranspositionOutcome out;
    out.step_a = {StepStatus::Failed, StepFailure::Timeout};
    out.step_b = {StepStatus::Failed, StepFailure::Timeout};

    auto finish = [&]() -> TranspositionOutcome& {
        // Structural privacy measure: which agent names actually appeared
        // in the plaintext the home operator read during the steps.
        std::map<std::uint64_t, std::string> phase_of;
        for (const TranscriptEntry& entry : world.fabric.transcript().entries) {
            phase_of[entry.env.seq] = entry.phase;
        }
        for (const auto& [seq, plaintext] : home.obs.entries) {
            auto phase = phase_of.find(seq);
            if (phase == phase_of.end() ||
                (phase->second != "step_a" && phase->second != "step_b")) {
                continue;
            }
            for (const auto& [name, agent] : world.agents) {
                Bytes needle = bytes_of(name);
                if (std::search(plaintext.begin(), plaintext.end(), needle.begin(),
                                needle.end()) != plaintext.end()) {
                    out.a_view_identities.insert(name);
                }
            }
        }
        out.completed = out.step_a.status == StepStatus::Accepted &&
                        out.step_b.status == StepStatus::Accepted;
        return out;
    };

    // Channels: the till opens toward the buyer, both sides attest; the
    // buyer logs on at home with its own attestation.
    ChannelResult ba = run_channel_setup(
        world, {request.merchant, request.buyer, AttestPolicy::Mutual, false}, budget);
    if (!ba.ok) return finish();
    ChannelResult aA = run_channel_setup(
        world,
        {request.buyer, request.home_principal, AttestPolicy::InitiatorOnly, true},
        budget);
    if (!aA.ok) return finish();

    Session* provisioned =
        world.find_session(request.home_principal, request.merchant_principal);
    if (!provisioned) {
        SharedSecret transport;
        transport.bytes = world.rng.next_seed();
        provisioned = &world.make_session(request.home_principal,
                                          request.merchant_principal, transport);
    }
    Relays relays{world, world.session(ba.session_id), world.session(aA.session_id),
                  *provisioned, request};
    Session& s_ba = relays.ba;
    Session& s_aA = relays.aA;
    Session& s_AB = relays.AB;

    // ---------------- step A: the till's credential, checked by its owner.
    auto step_a = [&] {
        world.fabric.set_phase("step_a");
        send_sealed(world, s_ba, request.merchant, request.buyer, MsgKind::TauPresent,
                    encode_tau_pseudonymous(*merchant.tau));

        Nonce gamma_challenge{};
        std::optional<std::uint32_t> expected_serial;
        bool done = false;
        while (!done) {
            if (!budget.spend()) return;
            FabricStep step = world.fabric.deliver_next();
            if (step.kind == StepKind::Idle) return;
            if (step.kind == StepKind::Dropped) continue;
            const Envelope& env = step.env;
            Session& session = *env.session_id == s_ba.id   ? s_ba
                               : *env.session_id == s_aA.id ? s_aA
                                                            : s_AB;
            OpenResult opened = receive_sealed(world, session, env);
            if (opened.status == OpenStatus::Replay) continue;
            if (opened.status == OpenStatus::AuthenticationFailure) {
                out.step_a = {StepStatus::Failed, StepFailure::AuthenticationFailure};
                return;
            }
            const Bytes& plain = opened.plaintext;

            switch (env.kind) {
                case MsgKind::TauPresent: {
                    if (env.to != request.merchant_principal) {
                        relays.toward_merchant_principal(env.to, env.kind, plain);
                        break;
                    }
                    bool ok = false;
                    try {
                        ByteReader r(plain);
                        if (r.u8() == kTauPseudonymous) {
                            Bytes key_bytes = r.lp();
                            Bytes issuer_bytes = r.lp();
                            Bytes cert = r.lp();
                            r.expect_end();
                            Digest key_id;
                            std::copy(key_bytes.begin(), key_bytes.end(),
                                      key_id.bytes.begin());
                            const TrustCredential* record =
                                owner.registry.find_tau(key_id);
                            if (record && record->issuer_cert == cert) {
                                expected_serial = owner.registry.associate(key_id);
                                ok = expected_serial.has_value();
                            }
                        }
                    } catch (const WireError&) {
                        ok = false;
                    }
                    if (!ok) {
                        ByteWriter w;
                        w.u8(kStepAAck);
                        w.u8(0);
                        send_sealed(world, s_AB, request.merchant_principal,
                                    request.home_principal, MsgKind::AuthAck, w.take());
                        break;
                    }
                    gamma_challenge = world.rng.next_nonce();
                    ByteWriter w;
                    w.u8(kGammaChallenge);
                    w.raw(ByteView(gamma_challenge.data(), gamma_challenge.size()));
                    send_sealed(world, s_AB, request.merchant_principal,
                                request.home_principal, MsgKind::AuthRequest, w.take());
                    break;
                }
                case MsgKind::AuthRequest: {
                    if (env.to != request.merchant) {
                        relays.toward_merchant(env.to, env.kind, plain);
                        break;
                    }
                    try {
                        ByteReader r(plain);
                        if (r.u8() != kGammaChallenge) throw WireError("purpose");
                        Bytes nonce_bytes = r.raw(12);
                        r.expect_end();
                        Nonce challenge{};
                        std::copy(nonce_bytes.begin(), nonce_bytes.end(),
                                  challenge.begin());
                        // Response carries the MAC alone: the till's serial
                        // never crosses the buyer's channel.
                        auto tag = credential_mac(*merchant.gamma, challenge);
                        ByteWriter w;
                        w.lp(ByteView(tag.data(), tag.size()));
                        send_sealed(world, s_ba, request.merchant, request.buyer,
                                    MsgKind::GammaAuth, w.take());
                    } catch (const WireError&) {
                        out.step_a = {StepStatus::Failed,
                                      StepFailure::AuthenticationFailure};
                        return;
                    }
                    break;
                }
                case MsgKind::GammaAuth: {
                    if (env.to != request.merchant_principal) {
                        relays.toward_merchant_principal(env.to, env.kind, plain);
                        break;
                    }
                    bool ok = false;
                    try {
                        ByteReader r(plain);
                        Bytes tag = r.lp();
                        r.expect_end();
                        ok = expected_serial &&
                             owner.registry.verify_gamma_response(
                                 *expected_serial, gamma_challenge, tag);
                    } catch (const WireError&) {
                        ok = false;
                    }
                    ByteWriter w;
                    w.u8(kStepAAck);
                    w.u8(ok ? 1 : 0);
                    send_sealed(world, s_AB, request.merchant_principal,
                                request.home_principal, MsgKind::AuthAck, w.take());
                    break;
                }
                case MsgKind::AuthAck: {
                    if (env.to == request.home_principal) {
                        relays.toward_merchant(env.to, env.kind, plain);
                        break;
                    }
                    if (env.to != request.buyer) {
                        throw std::runtime_error("transposition: stray step-A ack");
                    }
                    try {
                        ByteReader r(plain);
                        if (r.u8() != kStepAAck) throw WireError("purpose");
                        bool ok = r.u8() == 1;
                        r.expect_end();
                        out.step_a = ok ? StepResult{StepStatus::Accepted,
                                                     StepFailure::None}
                                        : StepResult{StepStatus::Failed,
                                                     StepFailure::Refused};
                    } catch (const WireError&) {
                        out.step_a = {StepStatus::Failed,
                                      StepFailure::AuthenticationFailure};
                    }
                    done = true;
                    break;
                }
                default:
                    throw std::runtime_error("transposition: unexpected step-A kind");
            }
        }
    };

    // ---------------- step B: the buyer's pledge, redeemed at its home.
    auto step_b = [&] {
        world.fabric.set_phase("step_b");
        send_sealed(world, s_ba, request.buyer, request.merchant, MsgKind::TauPresent,
                    encode_tau_full(*buyer.tau));

        Bytes pledge;                       // tau_a as received by the till
        DhKeypair merchant_share;
        SharedSecret x_key, y_key;          // till side
        SharedSecret owner_x, owner_y;      // owner side
        Digest binding;                     // digest of the wrapped pledge
        Digest owner_binding;               // same digest as seen by the owner
        Nonce fresh_challenge{};            // secondary gamma challenge, if any
        std::string pending_subject;        // identity held back until it lands
        bool done = false;

        auto send_identity_ack = [&](bool ok, const std::string& subject_name) {
            ByteWriter w;
            w.u8(kIdentityAck);
            w.u8(ok ? 1 : 0);
            w.lp(bytes_of(subject_name));
            send_sealed(world, s_AB, request.home_principal,
                        request.merchant_principal, MsgKind::AuthAck, w.take());
        };
        while (!done) {
            if (!budget.spend()) return;
            FabricStep step = world.fabric.deliver_next();
            if (step.kind == StepKind::Idle) return;
            if (step.kind == StepKind::Dropped) continue;
            const Envelope& env = step.env;
            Session& session = *env.session_id == s_ba.id   ? s_ba
                               : *env.session_id == s_aA.id ? s_aA
                                                            : s_AB;
            OpenResult opened = receive_sealed(world, session, env);
            if (opened.status == OpenStatus::Replay) continue;
            if (opened.status == OpenStatus::AuthenticationFailure) {
                out.step_b = {StepStatus::Failed, StepFailure::AuthenticationFailure};
                return;
            }
            const Bytes& plain = opened.plaintext;

            switch (env.kind) {
                case MsgKind::TauPresent: {
                    if (env.to == request.merchant) {
                        try {
                            ByteReader r(plain);
                            if (r.u8() != kTauFull) throw WireError("form");
                            pledge = r.lp();
                            r.expect_end();
                        } catch (const WireError&) {
                            out.step_b = {StepStatus::Failed,
                                          StepFailure::AuthenticationFailure};
                            return;
                        }
                        merchant_share = dh_keygen(world.rng.next_seed());
                        ByteView share(merchant_share.public_key.data(),
                                       merchant_share.public_key.size());
                        Bytes sig =
                            sign(merchant.tpm.attestation_keys.at(merchant.tau->tpm_key_id)
                                     .secret,
                                 sign_context(share, {}, "till-share"));
                        ByteWriter w;
                        w.u8(kXdhShare);
                        w.lp(share);
                        w.lp(merchant.tau->tpm_key_id.view());
                        w.lp(sig);
                        send_sealed(world, s_ba, request.merchant, request.buyer,
                                    MsgKind::AuthRequest, w.take());
                        break;
                    }
                    if (env.to == request.home_principal && env.from == request.merchant_principal) {
                        // Redemption: the owner asks who this key belongs to.
                        bool ok = false;
                        std::string subject_name;
                        try {
                            ByteReader r(plain);
                            if (r.u8() != kTauRedemption) throw WireError("form");
                            Bytes key_bytes = r.lp();
                            r.expect_end();
                            Digest key_id;
                            std::copy(key_bytes.begin(), key_bytes.end(),
                                      key_id.bytes.begin());
                            const TrustCredential* record =
                                home.registry.find_tau(key_id);
                            auto linked = home.registry.associate(key_id);
                            // The pledged credential must belong to the agent
                            // logged on over this very relay session.
                            ok = record && linked && s_aA.gamma_serial &&
                                 *linked == *s_aA.gamma_serial;
                            if (record) subject_name = record->subject.name;
                        } catch (const WireError&) {
                            ok = false;
                        }
                        if (ok && request.fresh_secondary_auth) {
                            // Hold the ack until the buyer answers a fresh
                            // domain-credential challenge.
                            pending_subject = subject_name;
                            fresh_challenge = world.rng.next_nonce();
                            ByteWriter w;
                            w.u8(kGammaChallenge);
                            w.raw(ByteView(fresh_challenge.data(),
                                           fresh_challenge.size()));
                            send_sealed(world, s_aA, request.home_principal,
                                        request.buyer, MsgKind::AuthRequest,
                                        w.take());
                            break;
                        }
                        send_identity_ack(ok, subject_name);
                        break;
                    }
                    throw std::runtime_error("transposition: stray TauPresent");
                }
                case MsgKind::AuthRequest: {
                    if (env.to == request.buyer &&
                        env.from == request.home_principal) {
                        // Fresh secondary challenge: answered directly, this
                        // is the buyer's own principal asking.
                        try {
                            ByteReader r(plain);
                            if (r.u8() != kGammaChallenge) throw WireError("purpose");
                            Bytes nonce_bytes = r.raw(12);
                            r.expect_end();
                            Nonce challenge{};
                            std::copy(nonce_bytes.begin(), nonce_bytes.end(),
                                      challenge.begin());
                            auto tag = credential_mac(*buyer.gamma, challenge);
                            ByteWriter w;
                            w.u32(buyer.gamma->serial);
                            w.lp(ByteView(tag.data(), tag.size()));
                            send_sealed(world, s_aA, request.buyer,
                                        request.home_principal, MsgKind::GammaAuth,
                                        w.take());
                        } catch (const WireError&) {
                            out.step_b = {StepStatus::Failed,
                                          StepFailure::AuthenticationFailure};
                            return;
                        }
                        break;
                    }
                    if (env.to != request.merchant_principal) {
                        relays.toward_merchant_principal(env.to, env.kind, plain);
                        break;
                    }
                    bool ok = false;
                    Bytes reply;
                    try {
                        ByteReader r(plain);
                        if (r.u8() != kXdhShare) throw WireError("purpose");
                        Bytes share = r.lp();
                        Bytes key_bytes = r.lp();
                        Bytes sig = r.lp();
                        r.expect_end();
                        Digest signer;
                        std::copy(key_bytes.begin(), key_bytes.end(),
                                  signer.bytes.begin());
                        auto signer_public = world.resolve_public(signer);
                        ok = owner.registry.find_tau(signer) && signer_public &&
                             !world.is_revoked(signer) &&
                             verify(*signer_public, sign_context(share, {}, "till-share"),
                                    sig);
                        if (ok) {
                            DhKeypair owner_share = dh_keygen(world.rng.next_seed());
                            auto base = dh_derive(owner_share, share);
                            ok = base.has_value();
                            if (ok) {
                                owner_x = derive_subkey(*base, SecretRole::X);
                                owner_y = derive_subkey(*base, SecretRole::Y);
                                ByteView mine(owner_share.public_key.data(),
                                              owner_share.public_key.size());
                                Bytes reply_sig =
                                    sign(owner.registry.authority().secret,
                                         sign_context(mine, share, "owner-share"));
                                ByteWriter w;
                                w.u8(kXdhReply);
                                w.lp(mine);
                                w.lp(reply_sig);
                                reply = w.take();
                            }
                        }
                    } catch (const WireError&) {
                        ok = false;
                    }
                    if (!ok) {
                        out.step_b = {StepStatus::Failed,
                                      StepFailure::AuthenticationFailure};
                        return;
                    }
                    send_sealed(world, s_AB, request.merchant_principal,
                                request.home_principal, MsgKind::AuthAck, reply);
                    break;
                }
                case MsgKind::AuthAck: {
                    if (env.to == request.merchant_principal) {
                        // The buyer's home answered the redemption; the owner
                        // closes the loop toward the till.
                        std::uint8_t verdict = 0;
                        try {
                            ByteReader r(plain);
                            if (r.u8() != kIdentityAck) throw WireError("purpose");
                            verdict = r.u8() == 1 ? 1 : 0;
                            (void)r.lp();  // subject name: acknowledged, not stored
                            r.expect_end();
                        } catch (const WireError&) {
                            verdict = 0;
                        }
                        ByteWriter body;
                        body.u8(verdict);
                        body.lp(owner_binding.view());
                        Bytes wrapped = wrap_under(owner_y, request.privacy,
                                                   body.take(), kAckAad,
                                                   world.nonce_guard);
                        send_sealed(world, s_AB, request.merchant_principal,
                                    request.home_principal, MsgKind::WrappedAck,
                                    wrapped);
                        break;
                    }
                    if (env.to != request.merchant) {
                        relays.toward_merchant(env.to, env.kind, plain);
                        break;
                    }
                    try {
                        ByteReader r(plain);
                        if (r.u8() != kXdhReply) throw WireError("purpose");
                        Bytes share = r.lp();
                        Bytes sig = r.lp();
                        r.expect_end();
                        ByteView mine(merchant_share.public_key.data(),
                                      merchant_share.public_key.size());
                        if (!verify(merchant.owner_authority_public,
                                    sign_context(share, mine, "owner-share"), sig)) {
                            throw WireError("reply signature");
                        }
                        auto base = dh_derive(merchant_share, share);
                        if (!base) throw WireError("degenerate share");
                        x_key = derive_subkey(*base, SecretRole::X);
                        y_key = derive_subkey(*base, SecretRole::Y);
                    } catch (const WireError&) {
                        out.step_b = {StepStatus::Failed,
                                      StepFailure::AuthenticationFailure};
                        return;
                    }
                    Bytes wrapped = wrap_under(x_key, request.privacy, pledge, kWrapAad,
                                               world.nonce_guard);
                    binding = hash(wrapped);
                    send_sealed(world, s_ba, request.merchant, request.buyer,
                                MsgKind::WrappedTau, wrapped);
                    break;
                }
                case MsgKind::WrappedTau: {
                    if (env.to != request.merchant_principal) {
                        relays.toward_merchant_principal(env.to, env.kind, plain);
                        break;
                    }
                    std::optional<Digest> pledged_key;
                    auto tau_bytes = unwrap_under(owner_x, plain, kWrapAad);
                    if (tau_bytes) {
                        auto tau = TrustCredential::parse_full(*tau_bytes);
                        if (tau) {
                            pledged_key = tau->tpm_key_id;
                        }
                    }
                    owner_binding = hash(plain);
                    if (!pledged_key) {
                        // Unusable pledge: close out with a failure ack.
                        ByteWriter body;
                        body.u8(0);
                        body.lp(owner_binding.view());
                        Bytes wrapped = wrap_under(owner_y, request.privacy,
                                                   body.take(), kAckAad,
                                                   world.nonce_guard);
                        send_sealed(world, s_AB, request.merchant_principal,
                                    request.home_principal, MsgKind::WrappedAck,
                                    wrapped);
                        break;
                    }
                    // Hold only the key id for redemption; the pledge bytes
                    // are dropped on the floor here.
                    send_sealed(world, s_AB, request.merchant_principal,
                                request.home_principal, MsgKind::TauPresent,
                                encode_tau_redemption(*pledged_key));
                    break;
                }
                case MsgKind::GammaAuth: {
                    if (env.to != request.home_principal) {
                        throw std::runtime_error("transposition: stray GammaAuth");
                    }
                    bool ok = false;
                    try {
                        ByteReader r(plain);
                        std::uint32_t serial = r.u32();
                        Bytes tag = r.lp();
                        r.expect_end();
                        ok = s_aA.gamma_serial && serial == *s_aA.gamma_serial &&
                             home.registry.verify_gamma_response(serial,
                                                                 fresh_challenge, tag);
                    } catch (const WireError&) {
                        ok = false;
                    }
                    send_identity_ack(ok, pending_subject);
                    break;
                }
                case MsgKind::WrappedAck: {
                    if (env.to != request.merchant) {
                        relays.toward_merchant(env.to, env.kind, plain);
                        break;
                    }
                    auto body = unwrap_under(y_key, plain, kAckAad);
                    bool ok = false;
                    if (body) {
                        try {
                            ByteReader r(*body);
                            bool verdict_ok = r.u8() == 1;
                            Bytes binding_bytes = r.lp();
                            r.expect_end();
                            Digest echoed;
                            std::copy(binding_bytes.begin(), binding_bytes.end(),
                                      echoed.bytes.begin());
                            ok = verdict_ok && echoed == binding;
                        } catch (const WireError&) {
                            ok = false;
                        }
                    }
                    out.step_b = ok ? StepResult{StepStatus::Accepted, StepFailure::None}
                                    : StepResult{StepStatus::Failed,
                                                 StepFailure::Refused};
                    done = true;
                    break;
                }
                default:
                    throw std::runtime_error("transposition: unexpected step-B kind");
            }
        }
    };

    if (request.order == StepOrder::AThenB) {
        step_a();
        if (out.step_a.status == StepStatus::Accepted) step_b();
    } else {
        step_b();
        if (out.step_b.status == StepStatus::Accepted) step_a();
    }
    return finish();
}

}  // namespace transtrust
