#pragma once

// Coin-chain state: stablecoin balances, escrows, wards and locked vault
// collateral. Every mutation is appended to a per-chain event log and the
// live state is always equal to the fold of that log over the genesis
// balances, which is what makes fork_revert an exact inverse.

#include "crocodai/error.hpp"
#include "crocodai/fixed_point.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace crocodai::ledger {

enum class ChainId : std::uint32_t {};
enum class AccountId : std::uint64_t {};
enum class TokenId : std::uint32_t {};
enum class TransferId : std::uint64_t {};
enum class CdpId : std::uint64_t {};

using Slot = std::int64_t;
inline constexpr std::int64_t kSlotSeconds = 300;

/// Reserved system accounts. The vault engine, relay and savings pot act
/// through these; they are wards on every chain at genesis.
inline constexpr AccountId kVaultWard{1};
inline constexpr AccountId kRelayWard{2};
inline constexpr AccountId kSavingsPot{3};
inline constexpr AccountId kAuctionHouse{4};
inline constexpr std::uint64_t kFirstUserAccount = 16;

struct Token {
    TokenId id;
    std::string symbol;
    ChainId home;
    bool pegged = false;
};

struct EscrowRecord {
    TransferId transfer;
    AccountId sender;
    Amount amount = 0;
    Slot created = 0;
};

struct ChainConfig {
    std::string name;
    std::vector<std::pair<std::string, Amount>> accounts;
};

namespace event {
struct Mint { AccountId ward; AccountId to; Amount amount; };
struct Burn { AccountId ward; AccountId from; Amount amount; };
struct Move { AccountId from; AccountId to; Amount amount; };
struct EscrowOpen { TransferId transfer; AccountId sender; Amount amount; };
/// Outgoing cross-chain transfer committed: escrowed tokens destroyed.
struct EscrowBurn { TransferId transfer; };
struct EscrowRefund { TransferId transfer; };
struct Ward { AccountId who; bool add; };
/// Collateral tokens entering (amount > 0) or leaving a vault.
struct Collateral { CdpId cdp; TokenId token; Amount amount; };
}  // namespace event

using EventPayload = std::variant<event::Mint, event::Burn, event::Move, event::EscrowOpen,
                                  event::EscrowBurn, event::EscrowRefund, event::Ward, event::Collateral>;

struct LoggedEvent {
    std::uint64_t seq = 0;
    Slot slot = 0;
    EventPayload payload;
};

/// Emitted by fork_revert so an invariant monitor can explain supply changes.
struct RevertRecord {
    ChainId chain;
    Slot since;
    Slot at;
    std::size_t events_removed = 0;
    Amount supply_before = 0;
    Amount supply_after = 0;
    std::vector<TransferId> escrows_reopened;    ///< outgoing burns undone
    std::vector<TransferId> escrows_removed;     ///< requests erased entirely
    std::vector<CdpId> collateral_touched;
};

class CoinChain {
public:
    CoinChain(ChainId id, std::string name, std::map<AccountId, Amount> genesis);

    ChainId id() const { return id_; }
    const std::string& name() const { return name_; }
    Slot clock() const { return clock_; }
    bool compromised() const { return compromised_; }

    Amount balance(AccountId who) const;
    const std::map<AccountId, Amount>& balances() const { return balances_; }
    const std::map<TransferId, EscrowRecord>& escrows() const { return escrows_; }
    const std::optional<EscrowRecord> escrow(TransferId t) const;
    const std::set<AccountId>& wards() const { return wards_; }
    bool is_ward(AccountId who) const { return wards_.count(who) != 0; }
    Amount locked_collateral(CdpId cdp) const;
    const std::map<CdpId, Amount>& collateral() const { return collateral_; }
    const std::vector<LoggedEvent>& log() const { return log_; }

    /// Sum of balances plus escrowed amounts.
    Amount supply() const;
    Amount escrowed() const;

private:
    friend class Ledger;

    void append(Slot slot, EventPayload payload);
    void apply(const EventPayload& payload);
    void rebuild();

    ChainId id_;
    std::string name_;
    std::map<AccountId, Amount> genesis_;
    std::map<AccountId, Amount> balances_;
    std::map<TransferId, EscrowRecord> escrows_;
    std::set<AccountId> wards_;
    std::map<CdpId, Amount> collateral_;
    std::vector<LoggedEvent> log_;
    std::uint64_t next_seq_ = 0;
    Slot clock_ = 0;
    Slot applying_slot_ = 0;
    bool compromised_ = false;
};

/// All coin chains of one simulated system plus the token and account registries.
class Ledger {
public:
    ChainId create_chain(const ChainConfig& config);
    TokenId register_token(const std::string& symbol, ChainId home, bool pegged = false);

    AccountId account(const std::string& name);
    std::optional<AccountId> find_account(const std::string& name) const;
    std::string account_name(AccountId id) const;

    const CoinChain& chain(ChainId id) const;
    std::optional<ChainId> find_chain(const std::string& name) const;
    std::vector<ChainId> chain_ids() const;
    bool has_chain(ChainId id) const { return chains_.count(id) != 0; }

    const Token& token(TokenId id) const;
    std::optional<TokenId> find_token(const std::string& symbol) const;
    const std::vector<Token>& tokens() const { return tokens_; }

    Slot now() const { return now_; }
    /// Moves every chain clock forward; slots never go backwards.
    void advance_to(Slot slot);

    void transfer_local(ChainId chain, AccountId from, AccountId to, Amount amount);
    void mint(ChainId chain, AccountId ward, AccountId to, Amount amount);
    void burn(ChainId chain, AccountId ward, AccountId from, Amount amount);
    void open_escrow(ChainId chain, TransferId transfer, AccountId sender, Amount amount);
    void burn_escrow(ChainId chain, AccountId ward, TransferId transfer);
    void refund_escrow(ChainId chain, AccountId ward, TransferId transfer);
    void set_ward(ChainId chain, AccountId ward, AccountId who, bool add);
    void move_collateral(ChainId chain, AccountId ward, CdpId cdp, TokenId token, Amount delta);

    void set_compromised(ChainId chain, bool compromised);
    /// Reverses every event on `chain` stamped at or after `since`.
    RevertRecord fork_revert(ChainId chain, Slot since);
    const std::vector<RevertRecord>& reverts() const { return reverts_; }

    Amount total_circulating() const;

    void export_log_jsonl(ChainId chain, std::ostream& out) const;

private:
    CoinChain& mut(ChainId id);
    void require_ward(const CoinChain& c, AccountId ward) const;

    std::map<ChainId, CoinChain> chains_;
    std::unordered_map<std::string, ChainId> chain_names_;
    std::vector<Token> tokens_;
    std::unordered_map<std::string, TokenId> token_symbols_;
    std::unordered_map<std::string, AccountId> accounts_;
    std::map<AccountId, std::string> account_names_;
    std::uint64_t next_account_ = kFirstUserAccount;
    std::vector<RevertRecord> reverts_;
    Slot now_ = 0;
};

nlohmann::json to_json(const LoggedEvent& e);

}  // namespace crocodai::ledger
