#include "transtrust/operations.hpp"

// Domain restriction: an agent presents its domain credential first; the
// trust-credential path on top of it unlocks the privileged service class.
//
//   ChannelHello   agent -> A     (key agreement)
//   ChannelAttest  A -> agent     (key agreement + challenges)
//   GammaAuth      agent -> A     (serial + response MAC)
//   TauPresent     agent -> A     (key id + issuer cert; group MAC variant)
//   QuoteL1        agent -> A
//   QuoteL2        agent -> A
//   QuoteL3        agent -> A     (prepaid claim only)
//   ServiceRequest agent -> A
//   ServiceGrant | ServiceDeny    A -> agent

namespace transtrust {

namespace {

DenyReason reason_from_quote(QuoteStatus status) {
    switch (status) {
        case QuoteStatus::IntegrityMismatch: return DenyReason::IntegrityMismatch;
        case QuoteStatus::KeyRevoked: return DenyReason::Revoked;
        default: return DenyReason::Policy;
    }
}

struct TauPresentation {
    Digest key_id;
    Digest issuer_key_id;
    Bytes issuer_cert;
    EnrolmentMode mode = EnrolmentMode::PrincipalControlled;
    Bytes group_mac;
};

Bytes encode_tau_presentation(const TrustCredential& tau, ByteView group_mac) {
    ByteWriter w;
    w.lp(tau.tpm_key_id.view());
    w.lp(tau.issuer_key_id.view());
    w.lp(tau.issuer_cert);
    w.u8(tau.mode == EnrolmentMode::PrincipalControlled ? 0 : 1);
    w.lp(group_mac);
    return w.take();
}

std::optional<TauPresentation> decode_tau_presentation(ByteView payload) {
    try {
        ByteReader r(payload);
        TauPresentation p;
        Bytes key_id = r.lp();
        Bytes issuer_id = r.lp();
        p.issuer_cert = r.lp();
        p.mode = r.u8() == 0 ? EnrolmentMode::PrincipalControlled
                             : EnrolmentMode::Independent;
        p.group_mac = r.lp();
        r.expect_end();
        if (key_id.size() != 32 || issuer_id.size() != 32) {
            return std::nullopt;
        }
        std::copy(key_id.begin(), key_id.end(), p.key_id.bytes.begin());
        std::copy(issuer_id.begin(), issuer_id.end(), p.issuer_key_id.bytes.begin());
        return p;
    } catch (const WireError&) {
        return std::nullopt;
    }
}

// Prepaid sufficiency claim attested at level 3.
Bytes encode_claim(bool sufficient, std::uint32_t units) {
    ByteWriter w;
    w.u8(sufficient ? 1 : 0);
    w.u32(units);
    return w.take();
}

}  // namespace

AccessDecision run_restriction(World& world, const RestrictionRequest& request,
                               StepBudget& budget) {
    AgentState& agent = world.agent(request.agent);
    PrincipalState& home = world.principal(request.principal);
    const ActorId subject = agent.id;

    if (request.tau &&
        !agent.tpm.attestation_keys.contains(request.tau->tpm_key_id)) {
        throw std::runtime_error(
            "restriction: presented trust credential not rooted in the agent's module");
    }

    ChannelSpec spec{request.agent, request.principal, AttestPolicy::None, false};
    ChannelResult channel = run_channel_setup(world, spec, budget);
    if (!channel.ok) {
        return AccessDecision::deny(subject, DenyReason::Policy);
    }
    Session& session = world.session(channel.session_id);
    const SetupChallenges& ch = channel.challenges;
    world.fabric.set_phase("flow");

    // The agent's whole presentation goes out in order; the domain
    // credential always leads, everything after it rides on that identity.
    {
        ByteWriter w;
        w.u32(request.gamma.serial);
        auto tag = credential_mac(request.gamma, ch.gamma);
        w.lp(ByteView(tag.data(), tag.size()));
        send_sealed(world, session, request.agent, request.principal,
                    MsgKind::GammaAuth, w.take());
    }
    if (request.tau) {
        Bytes group_mac;
        if (request.variant == RestrictionVariant::SharedSecret && agent.group_secret) {
            auto tag = mac(*agent.group_secret, ByteView(ch.group.data(), ch.group.size()));
            group_mac.assign(tag.begin(), tag.end());
        }
        send_sealed(world, session, request.agent, request.principal,
                    MsgKind::TauPresent,
                    encode_tau_presentation(*request.tau, group_mac));
        send_sealed(world, session, request.agent, request.principal,
                    MsgKind::QuoteL1, build_l1_payload(agent.tpm, ch.init_l1));
        send_sealed(world, session, request.agent, request.principal,
                    MsgKind::QuoteL2, build_l2_payload(agent, ch.init_l2));
        if (request.prepaid_units) {
            UnsealResult stored = unseal(agent.tpm, 0);
            std::uint64_t total = 0;
            if (stored.status == UnsealStatus::Ok) {
                ByteReader r(stored.payload);
                total = r.u64();
            }
            bool sufficient =
                stored.status == UnsealStatus::Ok && total >= *request.prepaid_units;
            Bytes claim = encode_claim(sufficient, *request.prepaid_units);
            AttestationQuote quote =
                attest_credential(agent.tpm, claim, ch.extra,
                                  request.tau->tpm_key_id, /*l2 sent=*/true);
            send_sealed(world, session, request.agent, request.principal,
                        MsgKind::QuoteL3, build_l3_payload(quote, claim));
        }
    }
    {
        ByteWriter w;
        w.lp(bytes_of(request.service));
        w.u8(request.prepaid_units ? 1 : 0);
        w.u32(request.prepaid_units.value_or(0));
        send_sealed(world, session, request.agent, request.principal,
                    MsgKind::ServiceRequest, w.take());
    }

    // A's view while it works through the queue.
    bool gamma_ok = false;
    bool tau_ok = false;
    std::uint32_t presented_serial = 0;
    std::optional<DenyReason> pending;
    std::optional<AccessDecision> decision;
    auto note = [&](DenyReason reason) {
        if (!pending) pending = reason;
    };

    while (!decision) {
        if (!budget.spend()) break;
        FabricStep step = world.fabric.deliver_next();
        if (step.kind == StepKind::Idle) break;
        if (step.kind == StepKind::Dropped) continue;
        const Envelope& env = step.env;

        if (env.to == request.principal) {
            OpenResult opened = receive_sealed(world, session, env);
            if (opened.status == OpenStatus::Replay) continue;
            if (opened.status == OpenStatus::AuthenticationFailure) {
                return AccessDecision::deny(subject, DenyReason::Policy);
            }

            switch (env.kind) {
                case MsgKind::GammaAuth: {
                    try {
                        ByteReader r(opened.plaintext);
                        presented_serial = r.u32();
                        Bytes tag = r.lp();
                        r.expect_end();
                        gamma_ok = home.registry.verify_gamma_response(
                            presented_serial, ch.gamma, tag);
                    } catch (const WireError&) {
                        gamma_ok = false;
                    }
                    if (gamma_ok) {
                        session.gamma_serial = presented_serial;
                    } else {
                        note(DenyReason::Policy);
                    }
                    break;
                }
                case MsgKind::TauPresent: {
                    if (!gamma_ok) {
                        note(DenyReason::Policy);
                        break;
                    }
                    auto presented = decode_tau_presentation(opened.plaintext);
                    if (!presented) {
                        note(DenyReason::Policy);
                        break;
                    }
                    const TrustCredential* record =
                        home.registry.find_tau(presented->key_id);
                    if (!record || record->issuer_cert != presented->issuer_cert) {
                        note(DenyReason::Policy);
                        break;
                    }
                    if (presented->mode == EnrolmentMode::PrincipalControlled) {
                        auto linked = home.registry.associate(presented->key_id);
                        if (!linked) {
                            note(DenyReason::NoAssociation);
                        } else if (*linked != presented_serial) {
                            note(DenyReason::CloneDetected);
                        }
                    } else {
                        if (!home.registry.claim_serial(presented_serial,
                                                        presented->key_id)) {
                            note(DenyReason::CloneDetected);
                        }
                    }
                    if (request.variant == RestrictionVariant::Acl) {
                        if (!home.registry.acl_contains(presented->key_id)) {
                            note(DenyReason::Policy);
                        }
                    } else {
                        const auto& group = home.registry.group_secret();
                        if (!group ||
                            !mac_verify(*group, ByteView(ch.group.data(), ch.group.size()),
                                        presented->group_mac)) {
                            note(DenyReason::Policy);
                        }
                    }
                    if (!pending) tau_ok = true;
                    break;
                }
                case MsgKind::QuoteL1: {
                    QuoteStatus status =
                        check_l1_payload(world, home.verifier, opened.plaintext,
                                         ch.init_l1, session, request.agent);
                    if (status != QuoteStatus::Accepted) note(reason_from_quote(status));
                    break;
                }
                case MsgKind::QuoteL2: {
                    QuoteStatus status =
                        check_l2_payload(world, home.verifier, opened.plaintext,
                                         ch.init_l2, session, request.agent);
                    if (status != QuoteStatus::Accepted) note(reason_from_quote(status));
                    break;
                }
                case MsgKind::QuoteL3: {
                    Bytes claim;
                    QuoteStatus status = check_l3_payload(
                        world, home.verifier, opened.plaintext, ch.extra, session,
                        request.agent, std::nullopt, &claim);
                    if (status != QuoteStatus::Accepted) {
                        note(reason_from_quote(status));
                        break;
                    }
                    try {
                        ByteReader r(claim);
                        bool sufficient = r.u8() == 1;
                        std::uint32_t units = r.u32();
                        r.expect_end();
                        if (!sufficient || !request.prepaid_units ||
                            units != *request.prepaid_units) {
                            note(DenyReason::Policy);
                        }
                    } catch (const WireError&) {
                        note(DenyReason::Policy);
                    }
                    break;
                }
                case MsgKind::ServiceRequest: {
                    if (!gamma_ok) note(DenyReason::Policy);
                    if (request.prepaid_units && !session.evidence_of(request.agent)) {
                        note(DenyReason::Policy);
                    }
                    if (pending) {
                        decision = AccessDecision::deny(subject, *pending);
                        ByteWriter w;
                        w.u8(static_cast<std::uint8_t>(decision->reason));
                        send_sealed(world, session, request.principal, request.agent,
                                    MsgKind::ServiceDeny, w.take());
                    } else {
                        Privilege privilege =
                            tau_ok ? Privilege::Privileged : Privilege::Base;
                        decision = AccessDecision::grant(subject, privilege);
                        ByteWriter w;
                        w.u8(privilege == Privilege::Privileged ? 1 : 0);
                        send_sealed(world, session, request.principal, request.agent,
                                    MsgKind::ServiceGrant, w.take());
                    }
                    break;
                }
                default:
                    throw std::runtime_error("restriction: unexpected envelope at principal");
            }
            continue;
        }

        if (env.to == request.agent) {
            receive_sealed(world, session, env);
            continue;
        }

        throw std::runtime_error("restriction: envelope for an unknown actor");
    }

    // The decision envelope still sits in the queue; let it land so the
    // transcript settles and the agent can apply a prepaid decrement.
    while (!world.fabric.idle() && budget.spend()) {
        FabricStep step = world.fabric.deliver_next();
        if (step.kind != StepKind::Delivered || step.env.to != request.agent) continue;
        OpenResult opened = receive_sealed(world, session, step.env);
        if (opened.status == OpenStatus::Ok && step.env.kind == MsgKind::ServiceGrant &&
            request.prepaid_units) {
            // Unseal, decrement, reseal in the same turn the grant lands.
            UnsealResult stored = unseal(agent.tpm, 0);
            if (stored.status == UnsealStatus::Ok) {
                ByteReader r(stored.payload);
                std::uint64_t total = r.u64();
                if (total >= *request.prepaid_units) {
                    total -= *request.prepaid_units;
                    ByteWriter w;
                    w.u64(total);
                    update_sealed_payload(agent.tpm, 0, w.take());
                }
            }
        }
    }

    if (!decision) {
        return AccessDecision::deny(subject, DenyReason::Policy);
    }
    return *decision;
}

}  // namespace transtrust
