#include "transtrust/channel_setup.hpp"

namespace transtrust {

std::uint64_t send_plain(World& world, const std::string& from, const std::string& to,
                         MsgKind kind, Bytes payload) {
    Envelope env;
    env.from = from;
    env.to = to;
    env.kind = kind;
    env.payload = std::move(payload);
    return world.fabric.send(std::move(env));
}

std::uint64_t send_sealed(World& world, Session& session, const std::string& from,
                          const std::string& to, MsgKind kind, ByteView plaintext) {
    Envelope env;
    env.from = from;
    env.to = to;
    env.kind = kind;
    env.session_id = session.id;
    env.payload = session_seal(session, world.nonce_guard, from, to, kind,
                               env.counter, plaintext);
    return world.fabric.send(std::move(env));
}

OpenResult receive_sealed(World& world, Session& session, const Envelope& env) {
    OpenResult result = session_open(session, env);
    switch (result.status) {
        case OpenStatus::Ok:
            world.fabric.settle(env.seq, true);
            if (ObservationLog* obs = world.observer(env.to)) {
                obs->record(env.seq, result.plaintext);
            }
            break;
        case OpenStatus::Replay:
            world.fabric.settle(env.seq, false, "counter_mismatch");
            break;
        case OpenStatus::AuthenticationFailure:
            world.fabric.settle(env.seq, false, "authentication_failure");
            break;
    }
    return result;
}

void receive_plain(World& world, const Envelope& env) {
    world.fabric.settle(env.seq, true);
    if (ObservationLog* obs = world.observer(env.to)) {
        obs->record(env.seq, env.payload);
    }
}

const char* to_string(ChannelFailure failure) {
    switch (failure) {
        case ChannelFailure::None: return "none";
        case ChannelFailure::AuthenticationFailure: return "authentication_failure";
        case ChannelFailure::BadSignature: return "bad_signature";
        case ChannelFailure::UnknownKey: return "unknown_key";
        case ChannelFailure::KeyRevoked: return "key_revoked";
        case ChannelFailure::IntegrityMismatch: return "integrity_mismatch";
        case ChannelFailure::Replay: return "replay";
        case ChannelFailure::OrderingViolation: return "ordering_violation";
        case ChannelFailure::GammaRejected: return "gamma_rejected";
        case ChannelFailure::Timeout: return "timeout";
    }
    return "?";
}

ChannelFailure failure_from_quote(QuoteStatus status) {
    switch (status) {
        case QuoteStatus::Accepted: return ChannelFailure::None;
        case QuoteStatus::BadFormat: return ChannelFailure::AuthenticationFailure;
        case QuoteStatus::BadSignature: return ChannelFailure::BadSignature;
        case QuoteStatus::UnknownKey: return ChannelFailure::UnknownKey;
        case QuoteStatus::KeyRevoked: return ChannelFailure::KeyRevoked;
        case QuoteStatus::ReplayDetected: return ChannelFailure::Replay;
        case QuoteStatus::IntegrityMismatch: return ChannelFailure::IntegrityMismatch;
        case QuoteStatus::CredentialMismatch: return ChannelFailure::AuthenticationFailure;
        case QuoteStatus::OrderingViolation: return ChannelFailure::OrderingViolation;
    }
    return ChannelFailure::AuthenticationFailure;
}

Bytes build_l1_payload(const TpmState& tpm, const Nonce& challenge) {
    AttestationQuote quote = ek_prove_liveness(tpm, challenge);
    ByteWriter w;
    w.lp(quote.encode());
    w.lp(tpm.endorsement.public_key);
    w.lp(tpm.endorsement_cert);
    return w.take();
}

Bytes build_l2_payload(const AgentState& agent, const Nonce& challenge) {
    if (!agent.tau) {
        throw std::runtime_error("l2 payload: agent holds no trust credential");
    }
    AttestationQuote quote = quote_system_state(agent.tpm, challenge,
                                                kStandardPcrSelection,
                                                agent.tau->tpm_key_id);
    const SignKeypair& aik = agent.tpm.attestation_keys.at(agent.tau->tpm_key_id);
    ByteWriter w;
    w.lp(quote.encode());
    w.lp(aik.public_key);
    w.lp(agent.tau->issuer_key_id.view());
    w.lp(agent.tau->issuer_cert);
    w.lp(bytes_of(agent.id.name));
    w.lp(bytes_of(agent.id.domain));
    return w.take();
}

Bytes build_l3_payload(const AttestationQuote& quote, ByteView context) {
    ByteWriter w;
    w.lp(quote.encode());
    w.lp(context);
    return w.take();
}

QuoteStatus check_l1_payload(World& world, QuoteVerifier& verifier, ByteView payload,
                             const Nonce& expected_challenge, Session& session,
                             const std::string& prover) {
    Bytes quote_bytes, ek_public, ek_cert;
    try {
        ByteReader r(payload);
        quote_bytes = r.lp();
        ek_public = r.lp();
        ek_cert = r.lp();
        r.expect_end();
    } catch (const WireError&) {
        return QuoteStatus::BadFormat;
    }
    auto quote = AttestationQuote::decode(quote_bytes);
    if (!quote || quote->level != 1) {
        return QuoteStatus::BadFormat;
    }
    if (quote->nonce != expected_challenge) {
        return QuoteStatus::ReplayDetected;
    }
    if (hash(ek_public) != quote->signer_key_id) {
        return QuoteStatus::BadSignature;
    }

    QuoteCheck check = world.base_quote_check();
    check.resolve_public = [&ek_public](const Digest&) -> std::optional<Bytes> {
        return ek_public;
    };
    check.issuer_ok = [&](const Digest&) {
        return verify(world.manufacturer.public_key, ek_public, ek_cert);
    };
    check.session_evidence = session.evidence_of(prover);
    QuoteStatus status = verifier.verify_quote(*quote, check);
    if (status == QuoteStatus::Accepted) {
        session.raise_evidence(prover, 1);
    }
    return status;
}

QuoteStatus check_l2_payload(World& world, QuoteVerifier& verifier, ByteView payload,
                             const Nonce& expected_challenge, Session& session,
                             const std::string& prover) {
    Bytes quote_bytes, aik_public, issuer_id_bytes, issuer_cert, name, domain;
    try {
        ByteReader r(payload);
        quote_bytes = r.lp();
        aik_public = r.lp();
        issuer_id_bytes = r.lp();
        issuer_cert = r.lp();
        name = r.lp();
        domain = r.lp();
        r.expect_end();
    } catch (const WireError&) {
        return QuoteStatus::BadFormat;
    }
    auto quote = AttestationQuote::decode(quote_bytes);
    if (!quote || quote->level != 2 || issuer_id_bytes.size() != 32) {
        return QuoteStatus::BadFormat;
    }
    std::string subject_name(name.begin(), name.end());
    // A quote only attests the platform it names.
    if (subject_name != prover) {
        return QuoteStatus::BadFormat;
    }
    if (quote->nonce != expected_challenge) {
        return QuoteStatus::ReplayDetected;
    }
    if (hash(aik_public) != quote->signer_key_id) {
        return QuoteStatus::BadSignature;
    }

    TrustCredential shell;
    shell.tpm_key_id = quote->signer_key_id;
    shell.subject = ActorId{ActorId::Kind::Agent, subject_name,
                            std::string(domain.begin(), domain.end())};
    Digest issuer_id;
    std::copy(issuer_id_bytes.begin(), issuer_id_bytes.end(), issuer_id.bytes.begin());

    QuoteCheck check = world.base_quote_check();
    check.resolve_public = [&aik_public](const Digest&) -> std::optional<Bytes> {
        return aik_public;
    };
    check.issuer_ok = [&](const Digest&) {
        auto issuer_public = world.resolve_public(issuer_id);
        return issuer_public &&
               verify(*issuer_public, shell.certified_bytes(), issuer_cert);
    };
    check.expected_pcr_digest = world.reference_digest(subject_name);
    if (!check.expected_pcr_digest) {
        return QuoteStatus::IntegrityMismatch;
    }
    check.session_evidence = session.evidence_of(prover);
    QuoteStatus status = verifier.verify_quote(*quote, check);
    if (status == QuoteStatus::Accepted) {
        session.raise_evidence(prover, 2);
        session.l2_signer[prover] = quote->signer_key_id;
    }
    return status;
}

QuoteStatus check_l3_payload(World& world, QuoteVerifier& verifier, ByteView payload,
                             const Nonce& expected_challenge, Session& session,
                             const std::string& prover,
                             const std::optional<Digest>& expected_credential_digest,
                             Bytes* context_out) {
    Bytes quote_bytes, context;
    try {
        ByteReader r(payload);
        quote_bytes = r.lp();
        context = r.lp();
        r.expect_end();
    } catch (const WireError&) {
        return QuoteStatus::BadFormat;
    }
    auto quote = AttestationQuote::decode(quote_bytes);
    if (!quote || quote->level != 3) {
        return QuoteStatus::BadFormat;
    }
    if (quote->nonce != expected_challenge) {
        return QuoteStatus::ReplayDetected;
    }

    QuoteCheck check = world.base_quote_check();
    check.expected_pcr_digest = world.reference_digest(prover);
    check.expected_credential_digest = expected_credential_digest;
    if (!expected_credential_digest && !context.empty()) {
        // No registry copy to compare against: the credential digest must
        // match the context bytes travelling with the quote.
        check.expected_credential_digest = hash(context);
    }
    check.session_evidence = session.evidence_of(prover);
    QuoteStatus status = verifier.verify_quote(*quote, check);
    if (status == QuoteStatus::Accepted) {
        session.raise_evidence(prover, 3);
        if (context_out) *context_out = context;
    }
    return status;
}

namespace {

Bytes encode_hello(const DhKeypair& dh, const Nonce& resp_l1, const Nonce& resp_l2) {
    ByteWriter w;
    w.lp(ByteView(dh.public_key.data(), dh.public_key.size()));
    w.raw(ByteView(resp_l1.data(), resp_l1.size()));
    w.raw(ByteView(resp_l2.data(), resp_l2.size()));
    return w.take();
}

Bytes encode_attest(std::uint64_t session_id, const DhKeypair& dh,
                    const SetupChallenges& ch) {
    ByteWriter w;
    w.u64(session_id);
    w.lp(ByteView(dh.public_key.data(), dh.public_key.size()));
    w.raw(ByteView(ch.init_l1.data(), ch.init_l1.size()));
    w.raw(ByteView(ch.init_l2.data(), ch.init_l2.size()));
    w.raw(ByteView(ch.gamma.data(), ch.gamma.size()));
    w.raw(ByteView(ch.group.data(), ch.group.size()));
    w.raw(ByteView(ch.extra.data(), ch.extra.size()));
    return w.take();
}

Nonce read_nonce(ByteReader& r) {
    Bytes raw = r.raw(12);
    Nonce nonce{};
    std::copy(raw.begin(), raw.end(), nonce.begin());
    return nonce;
}

}  // namespace

ChannelResult run_channel_setup(World& world, const ChannelSpec& spec,
                                StepBudget& budget) {
    ChannelResult result;

    // Initiator opens with its key-agreement share and a challenge for the
    // responder's quotes (used only under mutual attestation).
    DhKeypair init_dh = dh_keygen(world.rng.next_seed());
    Nonce resp_l1_challenge = world.rng.next_nonce();
    Nonce resp_l2_challenge = world.rng.next_nonce();
    send_plain(world, spec.initiator, spec.responder, MsgKind::ChannelHello,
               encode_hello(init_dh, resp_l1_challenge, resp_l2_challenge));

    Session* session = nullptr;
    SetupChallenges challenges;
    bool initiator_keyed = false;
    int resp_quotes_checked = 0;
    int init_quotes_checked = 0;
    bool gamma_checked = !spec.gamma_logon;
    bool accept_seen = false;

    auto fail = [&](ChannelFailure failure) {
        result.ok = false;
        result.failure = failure;
        return result;
    };

    auto setup_complete = [&] {
        bool quotes_ok = true;
        if (spec.policy == AttestPolicy::Mutual && resp_quotes_checked < 2) quotes_ok = false;
        if (spec.policy != AttestPolicy::None && init_quotes_checked < 2) quotes_ok = false;
        if (spec.policy == AttestPolicy::None) {
            return initiator_keyed && gamma_checked && quotes_ok;
        }
        return accept_seen && gamma_checked && quotes_ok;
    };

    while (!setup_complete()) {
        if (!budget.spend()) {
            return fail(ChannelFailure::Timeout);
        }
        FabricStep step = world.fabric.deliver_next();
        if (step.kind == StepKind::Idle) {
            return fail(ChannelFailure::Timeout);
        }
        if (step.kind == StepKind::Dropped) {
            continue;
        }
        const Envelope& env = step.env;

        if (env.kind == MsgKind::ChannelHello && env.to == spec.responder) {
            receive_plain(world, env);
            Bytes peer_public;
            try {
                ByteReader r(env.payload);
                peer_public = r.lp();
                challenges.resp_l1 = read_nonce(r);
                challenges.resp_l2 = read_nonce(r);
                r.expect_end();
            } catch (const WireError&) {
                world.fabric.settle(env.seq, false, "malformed");
                return fail(ChannelFailure::AuthenticationFailure);
            }
            DhKeypair resp_dh = dh_keygen(world.rng.next_seed());
            auto transport = dh_derive(resp_dh, peer_public);
            if (!transport) {
                return fail(ChannelFailure::AuthenticationFailure);
            }
            challenges.init_l1 = world.rng.next_nonce();
            challenges.init_l2 = world.rng.next_nonce();
            challenges.gamma = world.rng.next_nonce();
            challenges.group = world.rng.next_nonce();
            challenges.extra = world.rng.next_nonce();
            session = &world.make_session(spec.initiator, spec.responder, *transport);
            send_plain(world, spec.responder, spec.initiator, MsgKind::ChannelAttest,
                       encode_attest(session->id, resp_dh, challenges));
            // Under mutual attestation the responder proves itself first.
            if (spec.policy == AttestPolicy::Mutual) {
                const AgentState& responder = world.agent(spec.responder);
                send_sealed(world, *session, spec.responder, spec.initiator,
                            MsgKind::QuoteL1,
                            build_l1_payload(responder.tpm, challenges.resp_l1));
                send_sealed(world, *session, spec.responder, spec.initiator,
                            MsgKind::QuoteL2,
                            build_l2_payload(responder, challenges.resp_l2));
            }
            continue;
        }

        if (env.kind == MsgKind::ChannelAttest && env.to == spec.initiator) {
            receive_plain(world, env);
            try {
                ByteReader r(env.payload);
                std::uint64_t session_id = r.u64();
                Bytes peer_public = r.lp();
                challenges.init_l1 = read_nonce(r);
                challenges.init_l2 = read_nonce(r);
                challenges.gamma = read_nonce(r);
                challenges.group = read_nonce(r);
                challenges.extra = read_nonce(r);
                r.expect_end();
                auto transport = dh_derive(init_dh, peer_public);
                if (!transport || !world.sessions.contains(session_id)) {
                    return fail(ChannelFailure::AuthenticationFailure);
                }
                session = &world.session(session_id);
            } catch (const WireError&) {
                world.fabric.settle(env.seq, false, "malformed");
                return fail(ChannelFailure::AuthenticationFailure);
            }
            initiator_keyed = true;
            // With no responder quotes pending, the initiator proceeds at
            // once; otherwise its own contribution waits for those checks.
            if (spec.policy != AttestPolicy::Mutual) {
                if (spec.gamma_logon) {
                    const AgentState& initiator = world.agent(spec.initiator);
                    ByteWriter w;
                    w.u32(initiator.gamma->serial);
                    auto tag = credential_mac(*initiator.gamma, challenges.gamma);
                    w.lp(ByteView(tag.data(), tag.size()));
                    send_sealed(world, *session, spec.initiator, spec.responder,
                                MsgKind::GammaAuth, w.take());
                }
                if (spec.policy == AttestPolicy::InitiatorOnly) {
                    const AgentState& initiator = world.agent(spec.initiator);
                    send_sealed(world, *session, spec.initiator, spec.responder,
                                MsgKind::QuoteL1,
                                build_l1_payload(initiator.tpm, challenges.init_l1));
                    send_sealed(world, *session, spec.initiator, spec.responder,
                                MsgKind::QuoteL2,
                                build_l2_payload(initiator, challenges.init_l2));
                }
            }
            continue;
        }

        if ((env.kind == MsgKind::QuoteL1 || env.kind == MsgKind::QuoteL2) &&
            env.to == spec.initiator && session) {
            OpenResult opened = receive_sealed(world, *session, env);
            if (opened.status == OpenStatus::Replay) continue;
            if (opened.status == OpenStatus::AuthenticationFailure) {
                return fail(ChannelFailure::AuthenticationFailure);
            }
            AgentState& initiator = world.agent(spec.initiator);
            QuoteStatus status =
                env.kind == MsgKind::QuoteL1
                    ? check_l1_payload(world, initiator.verifier, opened.plaintext,
                                       challenges.resp_l1, *session, spec.responder)
                    : check_l2_payload(world, initiator.verifier, opened.plaintext,
                                       challenges.resp_l2, *session, spec.responder);
            if (status != QuoteStatus::Accepted) {
                return fail(failure_from_quote(status));
            }
            ++resp_quotes_checked;
            if (resp_quotes_checked == 2) {
                // Responder verified; now the initiator presents its side.
                if (spec.gamma_logon) {
                    const AgentState& init_agent = world.agent(spec.initiator);
                    ByteWriter w;
                    w.u32(init_agent.gamma->serial);
                    auto tag = credential_mac(*init_agent.gamma, challenges.gamma);
                    w.lp(ByteView(tag.data(), tag.size()));
                    send_sealed(world, *session, spec.initiator, spec.responder,
                                MsgKind::GammaAuth, w.take());
                }
                const AgentState& init_agent = world.agent(spec.initiator);
                send_sealed(world, *session, spec.initiator, spec.responder,
                            MsgKind::QuoteL1,
                            build_l1_payload(init_agent.tpm, challenges.init_l1));
                send_sealed(world, *session, spec.initiator, spec.responder,
                            MsgKind::QuoteL2,
                            build_l2_payload(init_agent, challenges.init_l2));
            }
            continue;
        }

        if (env.kind == MsgKind::GammaAuth && env.to == spec.responder && session) {
            OpenResult opened = receive_sealed(world, *session, env);
            if (opened.status == OpenStatus::Replay) continue;
            if (opened.status == OpenStatus::AuthenticationFailure) {
                return fail(ChannelFailure::AuthenticationFailure);
            }
            std::uint32_t serial = 0;
            Bytes tag;
            try {
                ByteReader r(opened.plaintext);
                serial = r.u32();
                tag = r.lp();
                r.expect_end();
            } catch (const WireError&) {
                return fail(ChannelFailure::GammaRejected);
            }
            PrincipalState& responder = world.principal(spec.responder);
            if (!responder.registry.verify_gamma_response(serial, challenges.gamma, tag)) {
                return fail(ChannelFailure::GammaRejected);
            }
            session->gamma_serial = serial;
            gamma_checked = true;
            continue;
        }

        if ((env.kind == MsgKind::QuoteL1 || env.kind == MsgKind::QuoteL2) &&
            env.to == spec.responder && session) {
            OpenResult opened = receive_sealed(world, *session, env);
            if (opened.status == OpenStatus::Replay) continue;
            if (opened.status == OpenStatus::AuthenticationFailure) {
                return fail(ChannelFailure::AuthenticationFailure);
            }
            QuoteVerifier& verifier = world.has_agent(spec.responder)
                                          ? world.agent(spec.responder).verifier
                                          : world.principal(spec.responder).verifier;
            QuoteStatus status =
                env.kind == MsgKind::QuoteL1
                    ? check_l1_payload(world, verifier, opened.plaintext,
                                       challenges.init_l1, *session, spec.initiator)
                    : check_l2_payload(world, verifier, opened.plaintext,
                                       challenges.init_l2, *session, spec.initiator);
            if (status != QuoteStatus::Accepted) {
                return fail(failure_from_quote(status));
            }
            ++init_quotes_checked;
            if (init_quotes_checked == 2) {
                ByteWriter w;
                w.u8(1);
                send_sealed(world, *session, spec.responder, spec.initiator,
                            MsgKind::ChannelAccept, w.take());
            }
            continue;
        }

        if (env.kind == MsgKind::ChannelAccept && env.to == spec.initiator && session) {
            OpenResult opened = receive_sealed(world, *session, env);
            if (opened.status == OpenStatus::Replay) continue;
            if (opened.status == OpenStatus::AuthenticationFailure) {
                return fail(ChannelFailure::AuthenticationFailure);
            }
            accept_seen = true;
            continue;
        }

        // An envelope this setup does not understand is a wiring bug.
        throw std::runtime_error("channel setup: unexpected envelope " +
                                 std::string(to_string(env.kind)));
    }

    result.ok = true;
    result.failure = ChannelFailure::None;
    result.session_id = session->id;
    result.challenges = challenges;
    return result;
}

}  // namespace transtrust
