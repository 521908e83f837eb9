#pragma once

// Relay quorum for cross-chain transfers and governance, with fault
// injection. Votes are authenticated abstractly: a vote counts only when the
// id it claims is the registered id of the node that sent it.

#include "crocodai/ledger.hpp"
#include "crocodai/vault.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace crocodai::relay {

using ledger::AccountId;
using ledger::ChainId;
using ledger::Ledger;
using ledger::Slot;
using ledger::TransferId;

enum class Behavior { Honest, Crashed, Byzantine };
enum class Strategy { Equivocate, Refuse, Forge };

struct NodeSpec {
    Behavior behavior = Behavior::Honest;
    Strategy strategy = Strategy::Refuse;   // Byzantine only
    /// Crashed nodes behave honestly before this slot; empty means from the start.
    std::optional<Slot> crash_at;
};

std::string describe(const NodeSpec& n);

enum class TransferState { Requested, Escrowed, Committed, Aborted };
std::string_view to_string(TransferState s);

struct Transfer {
    TransferId id{};
    ChainId source{};
    ChainId target{};
    AccountId sender{};
    AccountId recipient{};
    Amount amount = 0;
    TransferState state = TransferState::Requested;
    std::set<int> commit_votes;
    std::set<int> abort_votes;
    Slot requested = 0;
    std::optional<Slot> finished;
};

struct Vote {
    int sender = 0;     // node that actually sent the message
    int claimed = 0;    // id the message claims to be signed by
    TransferId transfer{};
    bool commit = true;
};

enum class GovKind { AddWard, RemoveWard, SetParam, AddChain, DeprecateContract };
std::string_view to_string(GovKind k);

struct GovernanceAction {
    std::uint64_t nonce = 0;
    GovKind kind = GovKind::SetParam;
    std::string chain;    // AddWard, RemoveWard, DeprecateContract, AddChain (new name)
    std::string account;  // AddWard, RemoveWard
    std::string param;    // SetParam
    std::string value;    // SetParam
};

struct RelayEvent {
    Slot slot = 0;
    std::string kind;
    std::optional<TransferId> transfer;
    std::string detail;
};
nlohmann::json to_json(const RelayEvent& e);

class Relay {
public:
    /// `faults` is the f of the quorum; requires nodes.size() >= 3f+1.
    Relay(std::vector<NodeSpec> nodes, int faults, Slot timeout = 20);

    int n() const { return static_cast<int>(nodes_.size()); }
    int f() const { return f_; }
    int commit_quorum() const { return 2 * f_ + 1; }
    int abort_quorum() const { return f_ + 1; }
    Slot timeout() const { return timeout_; }
    const std::vector<NodeSpec>& nodes() const { return nodes_; }

    TransferId request_transfer(Ledger& ledger, ChainId source, AccountId sender, Amount amount,
                                ChainId target, AccountId recipient);

    /// Advances the ledger to `slot`, applies due governance, collects votes
    /// and commits or aborts transfers whose certificates are complete.
    std::vector<RelayEvent> relay_step(Ledger& ledger, Slot slot, vault::Engine* engine = nullptr);

    /// Accepts a vote message. Returns false when authentication rejects it.
    bool submit_vote(const Vote& v);

    /// Queues `action` for the next slot boundary when it carries a commit
    /// quorum of authenticated votes. Throws on a used nonce or an invalid
    /// parameter value; returns false when the quorum is missing.
    bool submit_governance(const Ledger& ledger, const GovernanceAction& action, const std::set<int>& votes,
                           const vault::Engine* engine = nullptr);

    const std::map<TransferId, Transfer>& transfers() const { return transfers_; }
    const Transfer& transfer(TransferId id) const;
    const std::vector<RelayEvent>& events() const { return events_; }
    bool deprecated(ChainId c) const { return deprecated_.count(c) != 0; }

    /// Committed transfers whose source-side burn is no longer on the source
    /// chain's log, i.e. coins minted on the target with nothing destroyed.
    std::vector<std::pair<TransferId, Amount>> unbacked_commits(const Ledger& ledger) const;

private:
    bool online(int node, Slot now) const;
    bool validates(const Ledger& ledger, const Transfer& t) const;
    void apply_governance(Ledger& ledger, vault::Engine* engine, Slot now, std::vector<RelayEvent>& out);
    void emit(std::vector<RelayEvent>& out, RelayEvent e);

    std::vector<NodeSpec> nodes_;
    int f_;
    Slot timeout_;
    std::map<TransferId, Transfer> transfers_;
    std::uint64_t next_transfer_ = 1;
    struct Pending {
        GovernanceAction action;
        Slot submitted;
    };
    std::vector<Pending> pending_;
    std::set<std::uint64_t> used_nonces_;
    std::set<ChainId> deprecated_;
    std::vector<RelayEvent> events_;
};

enum class CostStrategy { NofN, Nof1, OneOf1 };
std::string_view to_string(CostStrategy s);

struct CostWeights {
    double transaction = 21000.0;
    double verification = 3000.0;
    double byte = 16.0;
    double sign_time = 0.0083;       // per individual signature
    double threshold_time = 0.135;   // times n^2 for one threshold signature
};

struct CostRecord {
    CostStrategy strategy{};
    int n = 0;
    int f = 0;
    int transactions = 0;
    int verifications = 0;
    int message_bytes = 0;
    double on_chain = 0.0;
    double off_chain_time = 0.0;
};

inline constexpr int kSignatureBytes = 65;

CostRecord cost_of_commit(CostStrategy s, int n, int f, const CostWeights& w = {});

}  // namespace crocodai::relay
