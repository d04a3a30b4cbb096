#include "transtrust/channels.hpp"

#include <charconv>
#include <ostream>
#include <sstream>

namespace transtrust {

const char* to_string(MsgKind kind) {
    switch (kind) {
        case MsgKind::ChannelHello: return "ChannelHello";
        case MsgKind::ChannelAttest: return "ChannelAttest";
        case MsgKind::ChannelAccept: return "ChannelAccept";
        case MsgKind::GammaAuth: return "GammaAuth";
        case MsgKind::QuoteL1: return "QuoteL1";
        case MsgKind::QuoteL2: return "QuoteL2";
        case MsgKind::QuoteL3: return "QuoteL3";
        case MsgKind::TauPresent: return "TauPresent";
        case MsgKind::SigmaPresent: return "SigmaPresent";
        case MsgKind::WrappedTau: return "WrappedTau";
        case MsgKind::AuthRequest: return "AuthRequest";
        case MsgKind::AuthAck: return "AuthAck";
        case MsgKind::WrappedAck: return "WrappedAck";
        case MsgKind::ServiceRequest: return "ServiceRequest";
        case MsgKind::ServiceGrant: return "ServiceGrant";
        case MsgKind::ServiceDeny: return "ServiceDeny";
    }
    return "?";
}

std::optional<MsgKind> kind_from_string(std::string_view name) {
    static const std::pair<std::string_view, MsgKind> table[] = {
        {"ChannelHello", MsgKind::ChannelHello},
        {"ChannelAttest", MsgKind::ChannelAttest},
        {"ChannelAccept", MsgKind::ChannelAccept},
        {"GammaAuth", MsgKind::GammaAuth},
        {"QuoteL1", MsgKind::QuoteL1},
        {"QuoteL2", MsgKind::QuoteL2},
        {"QuoteL3", MsgKind::QuoteL3},
        {"TauPresent", MsgKind::TauPresent},
        {"SigmaPresent", MsgKind::SigmaPresent},
        {"WrappedTau", MsgKind::WrappedTau},
        {"AuthRequest", MsgKind::AuthRequest},
        {"AuthAck", MsgKind::AuthAck},
        {"WrappedAck", MsgKind::WrappedAck},
        {"ServiceRequest", MsgKind::ServiceRequest},
        {"ServiceGrant", MsgKind::ServiceGrant},
        {"ServiceDeny", MsgKind::ServiceDeny},
    };
    for (const auto& [text, kind] : table) {
        if (text == name) return kind;
    }
    return std::nullopt;
}

void NonceGuard::check(const SharedSecret& key, const Nonce& nonce) {
    Bytes entry;
    append(entry, key.view());
    entry.push_back(static_cast<std::uint8_t>(key.role));
    append(entry, ByteView(nonce.data(), nonce.size()));
    if (!used_.insert(std::move(entry)).second) {
        throw NonceReuseError("nonce reused under the same key");
    }
}

int Session::direction_of(const std::string& sender) const {
    if (sender == initiator) return 0;
    if (sender == responder) return 1;
    throw std::runtime_error("session: sender is not an endpoint");
}

namespace {

Nonce hop_nonce(int direction, std::uint64_t counter) {
    Nonce nonce{};
    nonce[0] = static_cast<std::uint8_t>(direction);
    for (int i = 0; i < 8; ++i) {
        nonce[4 + i] = static_cast<std::uint8_t>(counter >> (8 * (7 - i)));
    }
    return nonce;
}

Bytes hop_aad(const std::string& from, const std::string& to, MsgKind kind,
              std::uint64_t counter) {
    ByteWriter w;
    w.lp(bytes_of(from));
    w.lp(bytes_of(to));
    w.u8(static_cast<std::uint8_t>(kind));
    w.u64(counter);
    return w.take();
}

}  // namespace

Bytes session_seal(Session& session, NonceGuard& guard, const std::string& from,
                   const std::string& to, MsgKind kind, std::uint64_t& counter_out,
                   ByteView plaintext) {
    int dir = session.direction_of(from);
    std::uint64_t counter = session.send_counter[static_cast<std::size_t>(dir)]++;
    Nonce nonce = hop_nonce(dir, counter);
    guard.check(session.transport, nonce);
    counter_out = counter;
    return aead_seal(session.transport, nonce, hop_aad(from, to, kind, counter),
                     plaintext);
}

OpenResult session_open(Session& session, const Envelope& env) {
    int dir = session.direction_of(env.from);
    std::uint64_t& expected = session.recv_counter[static_cast<std::size_t>(dir)];
    if (env.counter != expected) {
        return {OpenStatus::Replay, {}};
    }
    Nonce nonce = hop_nonce(dir, env.counter);
    auto plain = aead_open(session.transport, nonce,
                           hop_aad(env.from, env.to, env.kind, env.counter),
                           env.payload);
    if (!plain) {
        return {OpenStatus::AuthenticationFailure, {}};
    }
    ++expected;
    return {OpenStatus::Ok, std::move(*plain)};
}

std::optional<AdversaryAction> AdversaryAction::parse(std::string_view text) {
    auto next_field = [&text]() -> std::optional<std::string_view> {
        if (text.empty()) return std::nullopt;
        std::size_t pos = text.find(':');
        std::string_view field = text.substr(0, pos);
        text = pos == std::string_view::npos ? std::string_view{} : text.substr(pos + 1);
        return field;
    };

    auto head = next_field();
    if (!head) return std::nullopt;

    AdversaryAction action;
    if (*head == "tamper") {
        action.kind = Kind::Tamper;
    } else if (*head == "drop") {
        action.kind = Kind::Drop;
    } else if (*head == "duplicate") {
        action.kind = Kind::Duplicate;
    } else if (*head == "clone_credential") {
        action.kind = Kind::CloneCredential;
        auto agent = next_field();
        if (!agent || agent->empty() || !text.empty()) return std::nullopt;
        action.agent = std::string(*agent);
        return action;
    } else {
        return std::nullopt;
    }

    auto target = next_field();
    if (!target || target->empty()) return std::nullopt;
    if (auto kind = kind_from_string(*target)) {
        action.match_kind = *kind;
    } else {
        std::uint64_t seq = 0;
        auto [ptr, ec] = std::from_chars(target->data(), target->data() + target->size(), seq);
        if (ec != std::errc{} || ptr != target->data() + target->size()) {
            return std::nullopt;
        }
        action.match_seq = seq;
    }

    if (action.kind == Kind::Tamper) {
        auto index = next_field();
        if (!index || index->empty()) return std::nullopt;
        std::size_t byte_index = 0;
        auto [ptr, ec] = std::from_chars(index->data(), index->data() + index->size(), byte_index);
        if (ec != std::errc{} || ptr != index->data() + index->size()) {
            return std::nullopt;
        }
        action.byte_index = byte_index;
    }
    if (!text.empty()) return std::nullopt;
    return action;
}

std::string AdversaryAction::describe() const {
    std::ostringstream out;
    switch (kind) {
        case Kind::Tamper: out << "tamper"; break;
        case Kind::Drop: out << "drop"; break;
        case Kind::Duplicate: out << "duplicate"; break;
        case Kind::CloneCredential: return "clone_credential:" + agent;
    }
    if (match_kind) {
        out << ":" << to_string(*match_kind);
    } else if (match_seq) {
        out << ":" << *match_seq;
    }
    if (kind == Kind::Tamper) {
        out << ":" << byte_index;
    }
    return out.str();
}

void Transcript::write(std::ostream& out) const {
    for (const TranscriptEntry& entry : entries) {
        out << entry.env.seq << " | " << entry.phase << " | " << entry.env.from
            << " | " << entry.env.to << " | " << to_string(entry.env.kind) << " | "
            << (entry.accepted ? "accepted" : "rejected") << " | "
            << hash(entry.env.payload).hex() << "\n";
    }
}

std::string Transcript::text() const {
    std::ostringstream out;
    write(out);
    return out.str();
}

void Fabric::install(std::vector<AdversaryAction> script) {
    script_ = std::move(script);
}

TranscriptEntry* Fabric::entry_for(std::uint64_t seq) {
    for (TranscriptEntry& entry : transcript_.entries) {
        if (entry.env.seq == seq) return &entry;
    }
    return nullptr;
}

const AdversaryAction* Fabric::match(const Envelope& env,
                                     AdversaryAction::Kind kind) const {
    for (const AdversaryAction& action : script_) {
        if (action.kind != kind) continue;
        if (action.match_seq && *action.match_seq != env.seq) continue;
        if (action.match_kind && *action.match_kind != env.kind) continue;
        if (!action.match_seq && !action.match_kind) continue;
        return &action;
    }
    return nullptr;
}

std::uint64_t Fabric::send(Envelope env) {
    env.seq = next_seq_++;
    TranscriptEntry entry;
    entry.env = env;
    entry.phase = phase_;
    transcript_.entries.push_back(entry);
    queue_.push_back(std::move(env));
    return queue_.back().seq;
}

FabricStep Fabric::deliver_next() {
    if (queue_.empty()) {
        return {StepKind::Idle, {}};
    }
    Envelope env = std::move(queue_.front());
    queue_.pop_front();
    TranscriptEntry* entry = entry_for(env.seq);

    if (const AdversaryAction* action = match(env, AdversaryAction::Kind::Drop)) {
        entry->adversary_note = action->describe();
        entry->settled = true;
        entry->accepted = false;
        entry->reject_reason = "dropped";
        return {StepKind::Dropped, std::move(env)};
    }
    if (const AdversaryAction* action = match(env, AdversaryAction::Kind::Tamper)) {
        if (!env.payload.empty()) {
            env.payload[action->byte_index % env.payload.size()] ^= 0x01;
        }
        entry->adversary_note = action->describe();
        entry->env.payload = env.payload;
    }
    if (const AdversaryAction* action = match(env, AdversaryAction::Kind::Duplicate)) {
        if (!no_reduplicate_.contains(env.seq)) {
            Envelope copy = env;
            std::uint64_t copy_seq = send(std::move(copy));
            no_reduplicate_.insert(copy_seq);
            TranscriptEntry* copy_entry = entry_for(copy_seq);
            copy_entry->adversary_note =
                action->describe() + " of " + std::to_string(env.seq);
            // send() grows the transcript; the earlier pointer is stale.
            entry = entry_for(env.seq);
        }
    }
    entry->delivered_at = delivery_clock_++;
    return {StepKind::Delivered, std::move(env)};
}

void Fabric::settle(std::uint64_t seq, bool accepted, const std::string& reason) {
    TranscriptEntry* entry = entry_for(seq);
    if (!entry) {
        throw std::runtime_error("fabric: settling an unknown sequence number");
    }
    entry->settled = true;
    entry->accepted = accepted;
    entry->reject_reason = reason;
}

}  // namespace transtrust
