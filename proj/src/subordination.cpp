#include "transtrust/operations.hpp"

// Subordination: a dominator agent mediates a service for a subordinate
// device. The subordinate proves its standing with a subordination
// credential; a dedicated-gamma backing is additionally pinned to the
// platform by a level-3 quote over the sealed credential.
//
//   ChannelHello    a  -> A    (key agreement + gamma log-on)
//   ChannelAttest   A  -> a
//   GammaAuth       a  -> A
//   SigmaPresent    a  -> A    (dominator credential)
//   AuthAck         A  -> a    (dominator registered?)
//   ChannelHello    a' -> a    (mutually attested channel)
//   ChannelAttest   a  -> a'
//   QuoteL1/L2      a  -> a'
//   QuoteL1/L2      a' -> a
//   ChannelAccept   a  -> a'
//   SigmaPresent    a' -> a
//   QuoteL3         a' -> a    (dedicated backing only)
//   ServiceRequest  a' -> a
//   AuthRequest     a  -> A    (forward variant: decision escalated)
//   AuthAck         A  -> a
//   ServiceGrant | ServiceDeny   a -> a'

namespace transtrust {

namespace {

DenyReason reason_from_channel(ChannelFailure failure) {
    switch (failure) {
        case ChannelFailure::KeyRevoked: return DenyReason::Revoked;
        case ChannelFailure::IntegrityMismatch: return DenyReason::IntegrityMismatch;
        default: return DenyReason::Policy;
    }
}

bool sigma_cert_valid(const SubordinationCredential& sigma, ByteView issuer_public) {
    return verify(issuer_public, sigma.certified_bytes(), sigma.issuer_cert);
}

}  // namespace

AccessDecision run_subordination(World& world, const SubordinationRequest& request,
                                 StepBudget& budget) {
    AgentState& dominator = world.agent(request.dominator);
    AgentState& subordinate = world.agent(request.subordinate);
    PrincipalState& home = world.principal(request.principal);
    const ActorId subject = subordinate.id;

    if (!dominator.sigma || !subordinate.sigma) {
        throw std::runtime_error("subordination: both parties need their credentials");
    }

    // Dominator logs on to its principal and registers as such.
    ChannelSpec uplink_spec{request.dominator, request.principal, AttestPolicy::None,
                            true};
    ChannelResult uplink = run_channel_setup(world, uplink_spec, budget);
    if (!uplink.ok) {
        return AccessDecision::deny(subject, reason_from_channel(uplink.failure));
    }
    Session& uplink_session = world.session(uplink.session_id);
    world.fabric.set_phase("dominator");

    send_sealed(world, uplink_session, request.dominator, request.principal,
                MsgKind::SigmaPresent, dominator.sigma->full_bytes());

    bool dominator_ok = false;
    bool dominator_acked = false;
    while (!dominator_acked) {
        if (!budget.spend()) return AccessDecision::deny(subject, DenyReason::Policy);
        FabricStep step = world.fabric.deliver_next();
        if (step.kind == StepKind::Idle) {
            return AccessDecision::deny(subject, DenyReason::Policy);
        }
        if (step.kind == StepKind::Dropped) continue;
        const Envelope& env = step.env;
        OpenResult opened = receive_sealed(world, uplink_session, env);
        if (opened.status == OpenStatus::Replay) continue;
        if (opened.status == OpenStatus::AuthenticationFailure) {
            return AccessDecision::deny(subject, DenyReason::Policy);
        }

        if (env.kind == MsgKind::SigmaPresent && env.to == request.principal) {
            bool ok = false;
            auto sigma = SubordinationCredential::parse_full(opened.plaintext);
            if (sigma && sigma->scope == SigmaScope::Dominator &&
                sigma->issuer.name == home.id.name &&
                sigma_cert_valid(*sigma, home.registry.authority().public_key) &&
                uplink_session.gamma_serial) {
                const DomainCredential* gamma =
                    home.registry.find_gamma(*uplink_session.gamma_serial);
                ok = gamma && gamma->agent.name == sigma->holder.name;
            }
            dominator_ok = ok;
            ByteWriter w;
            w.u8(ok ? 1 : 0);
            send_sealed(world, uplink_session, request.principal, request.dominator,
                        MsgKind::AuthAck, w.take());
            continue;
        }
        if (env.kind == MsgKind::AuthAck && env.to == request.dominator) {
            dominator_acked = true;
            continue;
        }
        throw std::runtime_error("subordination: unexpected envelope at uplink");
    }
    if (!dominator_ok) {
        return AccessDecision::deny(subject, DenyReason::Policy);
    }

    // Subordinate attaches over a mutually attested channel.
    world.fabric.set_phase("setup");
    ChannelSpec link_spec{request.subordinate, request.dominator, AttestPolicy::Mutual,
                          false};
    ChannelResult link = run_channel_setup(world, link_spec, budget);
    if (!link.ok) {
        return AccessDecision::deny(subject, reason_from_channel(link.failure));
    }
    Session& link_session = world.session(link.session_id);
    world.fabric.set_phase("flow");

    send_sealed(world, link_session, request.subordinate, request.dominator,
                MsgKind::SigmaPresent, subordinate.sigma->full_bytes());
    if (subordinate.sigma->backing == SigmaBacking::DedicatedGamma) {
        UnsealResult stored = unseal(subordinate.tpm, kSigmaBackingSlot);
        if (stored.status != UnsealStatus::Ok) {
            return AccessDecision::deny(subject, DenyReason::IntegrityMismatch);
        }
        AttestationQuote quote =
            attest_credential(subordinate.tpm, stored.payload, link.challenges.extra,
                              subordinate.tau->tpm_key_id, /*l2 sent=*/true);
        send_sealed(world, link_session, request.subordinate, request.dominator,
                    MsgKind::QuoteL3, build_l3_payload(quote, {}));
    }
    {
        ByteWriter w;
        w.lp(bytes_of(request.service));
        send_sealed(world, link_session, request.subordinate, request.dominator,
                    MsgKind::ServiceRequest, w.take());
    }

    // Dominator-side view of the subordinate's presentation.
    std::optional<SubordinationCredential> presented;
    std::optional<AttestationQuote> backing_quote;
    std::optional<DenyReason> pending;
    std::optional<AccessDecision> decision;
    bool escalated = false;
    auto note = [&](DenyReason reason) {
        if (!pending) pending = reason;
    };

    auto decide_locally = [&]() -> AccessDecision {
        if (pending) return AccessDecision::deny(subject, *pending);
        if (!presented) return AccessDecision::deny(subject, DenyReason::Policy);
        // Containment: only a credential from the dominator's own
        // principal is honoured locally.
        if (presented->issuer.name != dominator.id.domain ||
            !sigma_cert_valid(*presented, dominator.owner_authority_public)) {
            return AccessDecision::deny(subject, DenyReason::Policy);
        }
        if (presented->scope != SigmaScope::Subordinate ||
            !presented->granted_services.contains(request.service)) {
            return AccessDecision::deny(subject, DenyReason::Policy);
        }
        if (presented->backing == SigmaBacking::Tau) {
            auto signer = link_session.l2_signer.find(request.subordinate);
            if (signer == link_session.l2_signer.end() ||
                signer->second != presented->backing_tau_key_id) {
                return AccessDecision::deny(subject, DenyReason::Policy);
            }
            if (world.is_revoked(presented->backing_tau_key_id)) {
                return AccessDecision::deny(subject, DenyReason::Revoked);
            }
        } else {
            if (!backing_quote ||
                *backing_quote->credential_digest != presented->backing_gamma_digest) {
                return AccessDecision::deny(subject, DenyReason::IntegrityMismatch);
            }
        }
        return AccessDecision::grant(subject, Privilege::Base);
    };

    while (!decision) {
        if (!budget.spend()) break;
        FabricStep step = world.fabric.deliver_next();
        if (step.kind == StepKind::Idle) break;
        if (step.kind == StepKind::Dropped) continue;
        const Envelope& env = step.env;
        Session& session = env.session_id && *env.session_id == uplink_session.id
                               ? uplink_session
                               : link_session;
        OpenResult opened = receive_sealed(world, session, env);
        if (opened.status == OpenStatus::Replay) continue;
        if (opened.status == OpenStatus::AuthenticationFailure) {
            return AccessDecision::deny(subject, DenyReason::Policy);
        }

        switch (env.kind) {
            case MsgKind::SigmaPresent: {
                presented = SubordinationCredential::parse_full(opened.plaintext);
                if (!presented) note(DenyReason::Policy);
                break;
            }
            case MsgKind::QuoteL3: {
                // Expected digest comes from the cert-carried backing field.
                std::optional<Digest> expected;
                if (presented &&
                    sigma_cert_valid(*presented, dominator.owner_authority_public)) {
                    expected = presented->backing_gamma_digest;
                }
                Bytes context;
                QuoteStatus status = check_l3_payload(
                    world, dominator.verifier, opened.plaintext,
                    link.challenges.extra, link_session, request.subordinate,
                    expected, &context);
                if (status != QuoteStatus::Accepted) {
                    note(status == QuoteStatus::KeyRevoked ? DenyReason::Revoked
                                                           : DenyReason::IntegrityMismatch);
                    break;
                }
                Bytes quote_bytes;
                ByteReader r(opened.plaintext);
                quote_bytes = r.lp();
                backing_quote = AttestationQuote::decode(quote_bytes);
                break;
            }
            case MsgKind::ServiceRequest: {
                if (request.variant == SubordinationVariant::LocalGrant) {
                    decision = decide_locally();
                } else {
                    // Forward the whole presentation; the principal decides.
                    ByteWriter w;
                    w.lp(presented ? presented->full_bytes() : Bytes{});
                    w.lp(bytes_of(request.service));
                    w.lp(bytes_of(request.subordinate));
                    w.u8(backing_quote ? 1 : 0);
                    if (backing_quote) {
                        w.lp(backing_quote->encode());
                    }
                    w.u8(pending ? static_cast<std::uint8_t>(*pending) : 0xff);
                    send_sealed(world, uplink_session, request.dominator,
                                request.principal, MsgKind::AuthRequest, w.take());
                    escalated = true;
                }
                break;
            }
            case MsgKind::AuthRequest: {
                // Principal-side verdict over the forwarded presentation.
                AccessDecision verdict = AccessDecision::deny(subject, DenyReason::Policy);
                try {
                    ByteReader r(opened.plaintext);
                    Bytes sigma_bytes = r.lp();
                    Bytes service_bytes = r.lp();
                    Bytes name_bytes = r.lp();
                    bool has_quote = r.u8() == 1;
                    std::optional<AttestationQuote> quote;
                    if (has_quote) {
                        quote = AttestationQuote::decode(r.lp());
                    }
                    std::uint8_t carried_pending = r.u8();
                    r.expect_end();

                    std::string service(service_bytes.begin(), service_bytes.end());
                    auto sigma = SubordinationCredential::parse_full(sigma_bytes);
                    if (carried_pending != 0xff) {
                        verdict = AccessDecision::deny(
                            subject, static_cast<DenyReason>(carried_pending));
                    } else if (!sigma || sigma->scope != SigmaScope::Subordinate ||
                               sigma->issuer.name != home.id.name ||
                               !sigma_cert_valid(*sigma,
                                                 home.registry.authority().public_key)) {
                        verdict = AccessDecision::deny(subject, DenyReason::Policy);
                    } else if (!sigma->granted_services.contains(service)) {
                        verdict = AccessDecision::deny(subject, DenyReason::Policy);
                    } else if (sigma->backing == SigmaBacking::DedicatedGamma) {
                        const DomainCredential* gamma =
                            home.registry.find_gamma(sigma->backing_gamma_serial);
                        if (!quote || !quote->credential_digest || !gamma) {
                            verdict = AccessDecision::deny(subject,
                                                           DenyReason::IntegrityMismatch);
                        } else if (world.is_revoked(quote->signer_key_id)) {
                            verdict = AccessDecision::deny(subject, DenyReason::Revoked);
                        } else {
                            auto signer_public = world.resolve_public(quote->signer_key_id);
                            bool quote_ok =
                                signer_public &&
                                verify(*signer_public, quote->signed_bytes(),
                                       quote->signature) &&
                                *quote->credential_digest ==
                                    hash(gamma->canonical_bytes()) &&
                                *quote->credential_digest == sigma->backing_gamma_digest;
                            verdict = quote_ok
                                          ? AccessDecision::grant(subject,
                                                                  Privilege::Base)
                                          : AccessDecision::deny(
                                                subject, DenyReason::IntegrityMismatch);
                        }
                    } else {
                        if (!home.registry.find_tau(sigma->backing_tau_key_id)) {
                            verdict = AccessDecision::deny(subject, DenyReason::Policy);
                        } else if (world.is_revoked(sigma->backing_tau_key_id)) {
                            verdict = AccessDecision::deny(subject, DenyReason::Revoked);
                        } else {
                            verdict = AccessDecision::grant(subject, Privilege::Base);
                        }
                    }
                } catch (const WireError&) {
                    verdict = AccessDecision::deny(subject, DenyReason::Policy);
                }
                ByteWriter w;
                w.u8(verdict.verdict == Verdict::Grant ? 1 : 0);
                w.u8(static_cast<std::uint8_t>(verdict.reason));
                send_sealed(world, uplink_session, request.principal,
                            request.dominator, MsgKind::AuthAck, w.take());
                break;
            }
            case MsgKind::AuthAck: {
                if (!escalated) {
                    note(DenyReason::Policy);
                    break;
                }
                try {
                    ByteReader r(opened.plaintext);
                    bool granted = r.u8() == 1;
                    auto reason = static_cast<DenyReason>(r.u8());
                    r.expect_end();
                    decision = granted
                                   ? AccessDecision::grant(subject, Privilege::Base)
                                   : AccessDecision::deny(subject, reason);
                } catch (const WireError&) {
                    decision = AccessDecision::deny(subject, DenyReason::Policy);
                }
                break;
            }
            default:
                throw std::runtime_error("subordination: unexpected envelope kind");
        }
    }

    if (!decision) {
        return AccessDecision::deny(subject, DenyReason::Policy);
    }

    // Deliver the verdict to the subordinate.
    {
        ByteWriter w;
        if (decision->verdict == Verdict::Grant) {
            w.u8(1);
            send_sealed(world, link_session, request.dominator, request.subordinate,
                        MsgKind::ServiceGrant, w.take());
        } else {
            w.u8(static_cast<std::uint8_t>(decision->reason));
            send_sealed(world, link_session, request.dominator, request.subordinate,
                        MsgKind::ServiceDeny, w.take());
        }
    }
    while (!world.fabric.idle() && budget.spend()) {
        FabricStep step = world.fabric.deliver_next();
        if (step.kind != StepKind::Delivered) continue;
        if (step.env.to == request.subordinate) {
            receive_sealed(world, link_session, step.env);
        }
    }
    return *decision;
}

}  // namespace transtrust
