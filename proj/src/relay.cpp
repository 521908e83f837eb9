#include "crocodai/relay.hpp"

#include <algorithm>

namespace crocodai::relay {

std::string describe(const NodeSpec& n) {
    switch (n.behavior) {
        case Behavior::Honest: return "honest";
        case Behavior::Crashed:
            return n.crash_at ? "crashed@" + std::to_string(*n.crash_at) : "crashed";
        case Behavior::Byzantine:
            switch (n.strategy) {
                case Strategy::Equivocate: return "byzantine-equivocate";
                case Strategy::Refuse: return "byzantine-refuse";
                case Strategy::Forge: return "byzantine-forge";
            }
    }
    return "?";
}

std::string_view to_string(TransferState s) {
    switch (s) {
        case TransferState::Requested: return "requested";
        case TransferState::Escrowed: return "escrowed";
        case TransferState::Committed: return "committed";
        case TransferState::Aborted: return "aborted";
    }
    return "?";
}

std::string_view to_string(GovKind k) {
    switch (k) {
        case GovKind::AddWard: return "add_ward";
        case GovKind::RemoveWard: return "remove_ward";
        case GovKind::SetParam: return "set_param";
        case GovKind::AddChain: return "add_chain";
        case GovKind::DeprecateContract: return "deprecate_contract";
    }
    return "?";
}

nlohmann::json to_json(const RelayEvent& e) {
    nlohmann::json j{{"slot", e.slot}, {"kind", e.kind}};
    if (e.transfer) j["transfer"] = static_cast<std::uint64_t>(*e.transfer);
    if (!e.detail.empty()) j["detail"] = e.detail;
    return j;
}

Relay::Relay(std::vector<NodeSpec> nodes, int faults, Slot timeout)
    : nodes_(std::move(nodes)), f_(faults), timeout_(timeout) {
    if (f_ < 0 || n() < 3 * f_ + 1) fail(Errc::quorum_violation, "relay needs n >= 3f+1 nodes");
    if (timeout_ <= 0) fail(Errc::invalid_parameter, "transfer timeout must be positive");
}

const Transfer& Relay::transfer(TransferId id) const {
    auto it = transfers_.find(id);
    if (it == transfers_.end()) fail(Errc::unknown_transfer, "unknown transfer " + std::to_string(static_cast<std::uint64_t>(id)));
    return it->second;
}

void Relay::emit(std::vector<RelayEvent>& out, RelayEvent e) {
    events_.push_back(e);
    out.push_back(std::move(e));
}

TransferId Relay::request_transfer(Ledger& ledger, ChainId source, AccountId sender, Amount amount,
                                   ChainId target, AccountId recipient) {
    if (amount <= 0) fail(Errc::invalid_amount, "transfer amount must be positive");
    ledger.chain(source);
    if (!ledger.has_chain(target)) fail(Errc::unknown_chain, "unknown target chain");
    if (source == target) fail(Errc::wrong_chain, "source and target chain are the same");
    if (deprecated(source) || deprecated(target)) fail(Errc::invalid_state, "relay contract deprecated on this chain");
    const TransferId id{next_transfer_++};
    Transfer t{id, source, target, sender, recipient, amount, TransferState::Requested, {}, {}, ledger.now(), std::nullopt};
    ledger.open_escrow(source, id, sender, amount);
    t.state = TransferState::Escrowed;
    transfers_.emplace(id, t);
    events_.push_back({ledger.now(), "requested", id, format_amount(amount)});
    return id;
}

bool Relay::online(int node, Slot now) const {
    const NodeSpec& s = nodes_[static_cast<std::size_t>(node)];
    if (s.behavior == Behavior::Honest) return true;
    if (s.behavior == Behavior::Crashed) return s.crash_at && now < *s.crash_at;
    return false;
}

bool Relay::validates(const Ledger& ledger, const Transfer& t) const {
    const auto esc = ledger.chain(t.source).escrow(t.id);
    return esc && esc->sender == t.sender && esc->amount == t.amount;
}

bool Relay::submit_vote(const Vote& v) {
    if (v.sender < 0 || v.sender >= n() || v.claimed != v.sender) return false;
    auto it = transfers_.find(v.transfer);
    if (it == transfers_.end() || it->second.state != TransferState::Escrowed) return false;
    (v.commit ? it->second.commit_votes : it->second.abort_votes).insert(v.claimed);
    return true;
}

std::vector<RelayEvent> Relay::relay_step(Ledger& ledger, Slot slot, vault::Engine* engine) {
    if (slot > ledger.now()) ledger.advance_to(slot);
    const Slot now = ledger.now();
    std::vector<RelayEvent> out;
    apply_governance(ledger, engine, now, out);

    int rejected = 0;
    for (auto& [id, t] : transfers_) {
        if (t.state != TransferState::Escrowed) continue;
        if (!ledger.chain(t.source).escrow(id)) {
            // The request vanished from the source chain (fork revert) before
            // any certificate formed; nothing is left to refund.
            t.state = TransferState::Aborted;
            t.finished = now;
            emit(out, {now, "dropped", id, "escrow no longer on source chain"});
            continue;
        }
        const Slot deadline = t.requested + timeout_;
        const bool before = now < deadline;
        const bool valid = validates(ledger, t);
        for (int i = 0; i < n(); ++i) {
            const NodeSpec& s = nodes_[static_cast<std::size_t>(i)];
            if (s.behavior == Behavior::Byzantine) {
                if (s.strategy == Strategy::Equivocate) {
                    submit_vote({i, i, id, true});
                    submit_vote({i, i, id, false});
                } else if (s.strategy == Strategy::Forge) {
                    for (int j = 0; j < n() + 2; ++j)
                        if (j != i && !submit_vote({i, j, id, before})) ++rejected;
                }
                continue;
            }
            if (!online(i, now)) continue;
            if (before && valid) submit_vote({i, i, id, true});
            if (!before) submit_vote({i, i, id, false});
        }
        if (before && valid && static_cast<int>(t.commit_votes.size()) >= commit_quorum()) {
            ledger.burn_escrow(t.source, ledger::kRelayWard, id);
            ledger.mint(t.target, ledger::kRelayWard, t.recipient, t.amount);
            t.state = TransferState::Committed;
            t.finished = now;
            emit(out, {now, "committed", id, std::to_string(t.commit_votes.size()) + " votes"});
        } else if (!before && static_cast<int>(t.abort_votes.size()) >= abort_quorum()) {
            ledger.refund_escrow(t.source, ledger::kRelayWard, id);
            t.state = TransferState::Aborted;
            t.finished = now;
            emit(out, {now, "aborted", id, std::to_string(t.abort_votes.size()) + " abort votes"});
        }
    }
    if (rejected > 0) emit(out, {now, "forgery_rejected", std::nullopt, std::to_string(rejected) + " votes"});
    return out;
}

bool Relay::submit_governance(const Ledger& ledger, const GovernanceAction& action, const std::set<int>& votes,
                              const vault::Engine* engine) {
    if (used_nonces_.count(action.nonce))
        fail(Errc::stale_nonce, "governance nonce " + std::to_string(action.nonce) + " already used");
    const auto valid = std::count_if(votes.begin(), votes.end(), [&](int v) { return v >= 0 && v < n(); });
    if (valid < commit_quorum()) return false;

    switch (action.kind) {
        case GovKind::SetParam: {
            const vault::SystemParams base = engine ? engine->params() : vault::SystemParams{};
            base.with(action.param, action.value);
            break;
        }
        case GovKind::AddWard:
        case GovKind::RemoveWard:
        case GovKind::DeprecateContract:
            if (!ledger.find_chain(action.chain)) fail(Errc::unknown_chain, "unknown chain '" + action.chain + "'");
            break;
        case GovKind::AddChain:
            if (ledger.find_chain(action.chain)) fail(Errc::duplicate_name, "chain '" + action.chain + "' exists");
            break;
    }
    used_nonces_.insert(action.nonce);
    pending_.push_back({action, ledger.now()});
    events_.push_back({ledger.now(), "governance_queued", std::nullopt,
                       std::string(to_string(action.kind)) + " nonce " + std::to_string(action.nonce)});
    return true;
}

void Relay::apply_governance(Ledger& ledger, vault::Engine* engine, Slot now, std::vector<RelayEvent>& out) {
    std::vector<Pending> keep;
    for (auto& p : pending_) {
        if (p.submitted >= now) {
            keep.push_back(std::move(p));
            continue;
        }
        const GovernanceAction& a = p.action;
        std::string detail;
        switch (a.kind) {
            case GovKind::AddWard:
            case GovKind::RemoveWard:
                ledger.set_ward(*ledger.find_chain(a.chain), ledger::kRelayWard, ledger.account(a.account),
                                a.kind == GovKind::AddWard);
                detail = a.account + " on " + a.chain;
                break;
            case GovKind::SetParam:
                if (engine) engine->set_params(engine->params().with(a.param, a.value));
                detail = a.param + "=" + a.value + (engine ? "" : " (no engine attached)");
                break;
            case GovKind::AddChain:
                ledger.create_chain({a.chain, {}});
                detail = a.chain;
                break;
            case GovKind::DeprecateContract:
                deprecated_.insert(*ledger.find_chain(a.chain));
                detail = a.chain;
                break;
        }
        emit(out, {now, "governance_applied", std::nullopt, std::string(to_string(a.kind)) + " " + detail});
    }
    pending_ = std::move(keep);
}

std::vector<std::pair<TransferId, Amount>> Relay::unbacked_commits(const Ledger& ledger) const {
    std::vector<std::pair<TransferId, Amount>> out;
    for (const auto& [id, t] : transfers_) {
        if (t.state != TransferState::Committed) continue;
        const auto& log = ledger.chain(t.source).log();
        const bool burned = std::any_of(log.begin(), log.end(), [&](const ledger::LoggedEvent& e) {
            const auto* b = std::get_if<ledger::event::EscrowBurn>(&e.payload);
            return b && b->transfer == id;
        });
        if (!burned) out.emplace_back(id, t.amount);
    }
    return out;
}

std::string_view to_string(CostStrategy s) {
    switch (s) {
        case CostStrategy::NofN: return "NofN";
        case CostStrategy::Nof1: return "Nof1";
        case CostStrategy::OneOf1: return "1of1";
    }
    return "?";
}

CostRecord cost_of_commit(CostStrategy s, int n, int f, const CostWeights& w) {
    if (f < 0 || n < 3 * f + 1) fail(Errc::quorum_violation, "cost model needs n >= 3f+1");
    CostRecord r{s, n, f};
    const int q = 2 * f + 1;
    switch (s) {
        case CostStrategy::NofN:
            // every quorum member sends its own approval transaction
            r.transactions = q;
            r.verifications = q;
            r.message_bytes = q * kSignatureBytes;
            r.off_chain_time = w.sign_time * q;
            break;
        case CostStrategy::Nof1:
            r.transactions = 1;
            r.verifications = q;
            r.message_bytes = q * kSignatureBytes;
            r.off_chain_time = w.sign_time * q;
            break;
        case CostStrategy::OneOf1:
            r.transactions = 1;
            r.verifications = 1;
            r.message_bytes = kSignatureBytes;
            r.off_chain_time = w.threshold_time * n * n;
            break;
    }
    r.on_chain = r.transactions * w.transaction + r.verifications * w.verification + r.message_bytes * w.byte;
    return r;
}

}  // namespace crocodai::relay
