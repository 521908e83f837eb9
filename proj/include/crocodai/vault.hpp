#pragma once

// CDP vaults, stability fees, debt ceilings, collateral auctions and the
// savings pot. The engine owns debt accounting; stablecoins themselves live
// on the coin chains and are minted/burned through ledger wards.

#include "crocodai/fixed_point.hpp"
#include "crocodai/ledger.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace crocodai::vault {

using ledger::AccountId;
using ledger::CdpId;
using ledger::ChainId;
using ledger::Ledger;
using ledger::Slot;
using ledger::TokenId;

struct SystemParams {
    Wad liquidation_ratio = Wad::parse("1.5");   ///< gamma
    Wad safety_threshold = Wad::parse("1.1");    ///< theta
    Wad stability_fee = Wad::zero();             ///< per slot
    Wad savings_rate = Wad::zero();              ///< per slot
    Wad liquidation_penalty = Wad::parse("0.13");
    std::map<TokenId, Wad> debt_ceiling;         ///< zeta per token; missing means 1
    /// Absolute cap for mints while system debt is still zero.
    Wad bootstrap_ceiling = Wad::from_int(1'000'000);
    Slot auction_duration = 72;
    Slot bid_duration = 12;
    Wad min_bid_step = Wad::parse("0.03");
    Wad flexibility_margin = Wad::parse("0.1");  ///< beta
    int relay_nodes = 4;
    int relay_faults = 1;
    Slot transfer_timeout = 20;

    Wad ceiling(TokenId t) const;
    /// Throws Errc::invalid_parameter describing the first violated constraint.
    void validate() const;
    /// Applies one named update ("liquidation_ratio", "debt_ceiling.<token id>", ...)
    /// to a copy and validates it.
    SystemParams with(const std::string& name, const std::string& value) const;
};

nlohmann::json to_json(const SystemParams& p);
/// Starts from defaults and overrides every field present in `j`.
SystemParams params_from_json(const nlohmann::json& j, const Ledger* ledger = nullptr);

enum class CdpState { Open, InAuction, Closed, Insolvent };
std::string_view to_string(CdpState s);

struct Cdp {
    CdpId id;
    AccountId owner;
    TokenId token;
    ChainId chain;
    Amount collateral = 0;
    Wad debt;
    CdpState state = CdpState::Open;
};

struct Bid {
    AccountId bidder;
    Amount amount = 0;
    Slot slot = 0;
    std::uint64_t seq = 0;
};

struct Auction {
    CdpId cdp;
    Slot start = 0;
    std::optional<Bid> best;
    Slot deadline = 0;
    bool settled = false;
};

struct Settlement {
    Amount burned = 0;
    Amount to_surplus = 0;
    Amount owner_refund = 0;
    Amount collateral_to_winner = 0;
    std::optional<AccountId> winner;
    CdpState outcome = CdpState::Closed;
};

struct SavingsPot {
    std::map<AccountId, Amount> deposits;
    Wad surplus;              ///< fees and penalties not yet paid out
    Amount interest_paid = 0; ///< cumulative, minted against surplus
};

struct FullBacking {
    Rational collateral_value;  ///< C*
    Rational debt;              ///< D*
    std::optional<Rational> ratio;  ///< empty when D* = 0 (ratio is +inf)
    bool ok = true;
};

/// Token prices used for a vault decision, indexed by token.
using PriceMap = std::map<TokenId, Wad>;

class Engine {
public:
    explicit Engine(SystemParams params = {});

    const SystemParams& params() const { return params_; }
    void set_params(SystemParams p);

    CdpId open_cdp(const Ledger& ledger, ChainId chain, AccountId owner, TokenId token);
    void deposit_collateral(Ledger& ledger, CdpId id, Amount amount);
    void repay_debt(Ledger& ledger, CdpId id, Amount amount);
    /// Mints `amount` stablecoins to the CDP owner if both the liquidation
    /// ratio and the debt ceiling still hold afterwards.
    Amount withdraw_stablecoins(Ledger& ledger, CdpId id, Amount amount, const PriceMap& prices);
    void withdraw_collateral(Ledger& ledger, CdpId id, Amount amount, const PriceMap& prices);
    void close_cdp(Ledger& ledger, CdpId id);

    /// Compounds every open debt by (1 + fee)^slots; the increase accrues to the pot surplus.
    void accrue_stability_fee(Slot slots);
    bool check_liquidatable(CdpId id, Wad price) const;

    void start_auction(const Ledger& ledger, CdpId id, const PriceMap& prices);
    void place_bid(Ledger& ledger, CdpId id, AccountId bidder, Amount amount);
    Settlement settle_auction(Ledger& ledger, CdpId id);

    void savings_deposit(Ledger& ledger, AccountId user, Amount amount);
    void savings_accrue(Ledger& ledger, Slot slots);
    void savings_withdraw(Ledger& ledger, AccountId user, Amount amount);
    Amount savings_balance(AccountId user) const;
    ChainId savings_chain() const { return savings_chain_; }
    void set_savings_chain(ChainId c) { savings_chain_ = c; }

    /// Re-reads collateral from the chain after a fork revert.
    void resync_collateral(const Ledger& ledger, ChainId chain);

    FullBacking full_backing(const PriceMap& prices) const;

    const Cdp& cdp(CdpId id) const;
    const std::map<CdpId, Cdp>& cdps() const { return cdps_; }
    const std::map<CdpId, Auction>& auctions() const { return auctions_; }
    const SavingsPot& pot() const { return pot_; }

    Wad total_debt() const;
    Wad debt_of_token(TokenId t) const;
    /// Net stablecoins created by vaults and the pot (mint - burn + interest).
    /// Cross-chain transfers conserve it, so total circulating should equal it.
    Amount issued() const { return issued_; }
    Wad fees_accrued() const { return fees_accrued_; }

    struct LoggedNote { Slot slot; std::string text; };
    const std::vector<LoggedNote>& notes() const { return notes_; }

private:
    Cdp& mut(CdpId id);
    static Wad price_of(const PriceMap& prices, TokenId t);

    SystemParams params_;
    std::map<CdpId, Cdp> cdps_;
    std::map<CdpId, Auction> auctions_;
    SavingsPot pot_;
    ChainId savings_chain_{0};
    std::uint64_t next_cdp_ = 1;
    std::uint64_t bid_seq_ = 0;
    Amount issued_ = 0;
    Wad fees_accrued_;
    std::vector<LoggedNote> notes_;
};

}  // namespace crocodai::vault
