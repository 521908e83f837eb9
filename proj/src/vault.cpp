#include "crocodai/vault.hpp"

#include <algorithm>

namespace crocodai::vault {
namespace {

bool wad_fraction(Wad w) { return w >= Wad::zero() && w <= Wad::one(); }

Wad wad_field(const nlohmann::json& v) {
    if (v.is_string()) return Wad::parse(v.get<std::string>());
    if (v.is_number()) return Wad::from_double(v.get<double>());
    fail(Errc::schema_error, "expected a decimal number");
}

}  // namespace

Wad SystemParams::ceiling(TokenId t) const {
    auto it = debt_ceiling.find(t);
    return it == debt_ceiling.end() ? Wad::one() : it->second;
}

void SystemParams::validate() const {
    auto bad = [](const std::string& what) { fail(Errc::invalid_parameter, what); };
    if (!(safety_threshold > Wad::one())) bad("safety threshold must exceed 1");
    if (!(liquidation_ratio > safety_threshold)) bad("liquidation ratio must exceed the safety threshold");
    if (stability_fee < Wad::zero()) bad("stability fee must be >= 0");
    if (savings_rate < Wad::zero()) bad("savings rate must be >= 0");
    if (liquidation_penalty < Wad::zero()) bad("liquidation penalty must be >= 0");
    if (min_bid_step < Wad::zero()) bad("min bid step must be >= 0");
    if (flexibility_margin < Wad::zero()) bad("flexibility margin must be >= 0");
    if (bootstrap_ceiling < Wad::zero()) bad("bootstrap ceiling must be >= 0");
    for (const auto& [t, z] : debt_ceiling)
        if (!wad_fraction(z)) bad("debt ceiling of token " + std::to_string(static_cast<unsigned>(t)) + " outside [0,1]");
    if (auction_duration <= 0 || bid_duration <= 0) bad("auction durations must be positive");
    if (transfer_timeout <= 0) bad("transfer timeout must be positive");
    if (relay_faults < 0 || relay_nodes < 3 * relay_faults + 1) bad("relay quorum requires n >= 3f+1");
}

SystemParams SystemParams::with(const std::string& name, const std::string& value) const {
    SystemParams p = *this;
    auto slots = [&] {
        try {
            return static_cast<Slot>(std::stoll(value));
        } catch (const std::exception&) {
            fail(Errc::invalid_parameter, "expected an integer for " + name);
        }
    };
    auto wad = [&] {
        try {
            return Wad::parse(value);
        } catch (const std::invalid_argument& e) {
            fail(Errc::invalid_parameter, e.what());
        }
    };
    if (name == "liquidation_ratio") p.liquidation_ratio = wad();
    else if (name == "safety_threshold") p.safety_threshold = wad();
    else if (name == "stability_fee") p.stability_fee = wad();
    else if (name == "savings_rate") p.savings_rate = wad();
    else if (name == "liquidation_penalty") p.liquidation_penalty = wad();
    else if (name == "min_bid_step") p.min_bid_step = wad();
    else if (name == "flexibility_margin") p.flexibility_margin = wad();
    else if (name == "bootstrap_ceiling") p.bootstrap_ceiling = wad();
    else if (name == "auction_duration") p.auction_duration = slots();
    else if (name == "bid_duration") p.bid_duration = slots();
    else if (name == "transfer_timeout") p.transfer_timeout = slots();
    else if (name == "relay_nodes") p.relay_nodes = static_cast<int>(slots());
    else if (name == "relay_faults") p.relay_faults = static_cast<int>(slots());
    else if (name.rfind("debt_ceiling.", 0) == 0) {
        const auto id = std::stoul(name.substr(13));
        p.debt_ceiling[TokenId{static_cast<std::uint32_t>(id)}] = wad();
    } else {
        fail(Errc::invalid_parameter, "unknown parameter '" + name + "'");
    }
    p.validate();
    return p;
}

nlohmann::json to_json(const SystemParams& p) {
    nlohmann::json ceilings = nlohmann::json::object();
    for (const auto& [t, z] : p.debt_ceiling) ceilings[std::to_string(static_cast<unsigned>(t))] = z.to_string();
    return {
        {"liquidation_ratio", p.liquidation_ratio.to_string()},
        {"safety_threshold", p.safety_threshold.to_string()},
        {"stability_fee", p.stability_fee.to_string()},
        {"savings_rate", p.savings_rate.to_string()},
        {"liquidation_penalty", p.liquidation_penalty.to_string()},
        {"debt_ceiling", ceilings},
        {"bootstrap_ceiling", p.bootstrap_ceiling.to_string()},
        {"auction_duration", p.auction_duration},
        {"bid_duration", p.bid_duration},
        {"min_bid_step", p.min_bid_step.to_string()},
        {"flexibility_margin", p.flexibility_margin.to_string()},
        {"relay_nodes", p.relay_nodes},
        {"relay_faults", p.relay_faults},
        {"transfer_timeout", p.transfer_timeout},
    };
}

SystemParams params_from_json(const nlohmann::json& j, const Ledger* ledger) {
    SystemParams p;
    if (j.is_null()) return p;
    if (!j.is_object()) fail(Errc::schema_error, "params must be an object");
    for (const auto& [key, v] : j.items()) {
        if (key == "liquidation_ratio") p.liquidation_ratio = wad_field(v);
        else if (key == "safety_threshold") p.safety_threshold = wad_field(v);
        else if (key == "stability_fee") p.stability_fee = wad_field(v);
        else if (key == "savings_rate") p.savings_rate = wad_field(v);
        else if (key == "liquidation_penalty") p.liquidation_penalty = wad_field(v);
        else if (key == "min_bid_step") p.min_bid_step = wad_field(v);
        else if (key == "flexibility_margin") p.flexibility_margin = wad_field(v);
        else if (key == "bootstrap_ceiling") p.bootstrap_ceiling = wad_field(v);
        else if (key == "auction_duration") p.auction_duration = v.get<Slot>();
        else if (key == "bid_duration") p.bid_duration = v.get<Slot>();
        else if (key == "transfer_timeout") p.transfer_timeout = v.get<Slot>();
        else if (key == "relay_nodes") p.relay_nodes = v.get<int>();
        else if (key == "relay_faults") p.relay_faults = v.get<int>();
        else if (key == "debt_ceiling") {
            for (const auto& [sym, z] : v.items()) {
                std::optional<TokenId> id;
                if (ledger) id = ledger->find_token(sym);
                if (!id) {
                    try {
                        id = TokenId{static_cast<std::uint32_t>(std::stoul(sym))};
                    } catch (const std::exception&) {
                        fail(Errc::unknown_token, "debt ceiling for unknown token '" + sym + "'");
                    }
                }
                p.debt_ceiling[*id] = wad_field(z);
            }
        } else {
            fail(Errc::schema_error, "unknown parameter '" + key + "'");
        }
    }
    p.validate();
    return p;
}

std::string_view to_string(CdpState s) {
    switch (s) {
        case CdpState::Open: return "open";
        case CdpState::InAuction: return "in_auction";
        case CdpState::Closed: return "closed";
        case CdpState::Insolvent: return "insolvent";
    }
    return "?";
}

Engine::Engine(SystemParams params) : params_(std::move(params)) { params_.validate(); }

void Engine::set_params(SystemParams p) {
    p.validate();
    params_ = std::move(p);
}

const Cdp& Engine::cdp(CdpId id) const {
    auto it = cdps_.find(id);
    if (it == cdps_.end()) fail(Errc::unknown_cdp, "unknown cdp " + std::to_string(static_cast<std::uint64_t>(id)));
    return it->second;
}

Cdp& Engine::mut(CdpId id) { return const_cast<Cdp&>(std::as_const(*this).cdp(id)); }

Wad Engine::price_of(const PriceMap& prices, TokenId t) {
    auto it = prices.find(t);
    if (it == prices.end()) fail(Errc::stale_price, "no price for token " + std::to_string(static_cast<unsigned>(t)));
    return it->second;
}

Wad Engine::total_debt() const {
    Wad total;
    for (const auto& [_, c] : cdps_) total += c.debt;
    return total;
}

Wad Engine::debt_of_token(TokenId t) const {
    Wad total;
    for (const auto& [_, c] : cdps_)
        if (c.token == t) total += c.debt;
    return total;
}

CdpId Engine::open_cdp(const Ledger& ledger, ChainId chain, AccountId owner, TokenId token) {
    const auto& tok = ledger.token(token);
    ledger.chain(chain);
    if (tok.home != chain)
        fail(Errc::wrong_chain, "token '" + tok.symbol + "' is not native to chain '" + ledger.chain(chain).name() + "'");
    const CdpId id{next_cdp_++};
    cdps_.emplace(id, Cdp{id, owner, token, chain, 0, Wad::zero(), CdpState::Open});
    return id;
}

void Engine::deposit_collateral(Ledger& ledger, CdpId id, Amount amount) {
    if (amount < 0) fail(Errc::invalid_amount, "negative deposit");
    Cdp& c = mut(id);
    if (c.state != CdpState::Open) fail(Errc::invalid_state, "cdp is not open");
    if (amount == 0) return;
    ledger.move_collateral(c.chain, ledger::kVaultWard, id, c.token, amount);
    c.collateral += amount;
}

void Engine::repay_debt(Ledger& ledger, CdpId id, Amount amount) {
    if (amount < 0) fail(Errc::invalid_amount, "negative repayment");
    Cdp& c = mut(id);
    if (c.state != CdpState::Open) fail(Errc::invalid_state, "cdp is not open");
    if (amount == 0) return;
    const Wad paid = Wad::from_amount(amount);
    // Paying the debt rounded up to minor units clears sub-unit fee dust.
    if (paid > c.debt && amount != c.debt.ceil_amount())
        fail(Errc::over_repay, "repayment " + format_amount(amount) + " exceeds debt " + c.debt.to_string());
    if (ledger.chain(c.chain).balance(c.owner) < amount)
        fail(Errc::insufficient_balance, "owner cannot cover repayment");
    ledger.burn(c.chain, ledger::kVaultWard, c.owner, amount);
    issued_ -= amount;
    if (paid >= c.debt) {
        pot_.surplus += paid - c.debt;
        c.debt = Wad::zero();
    } else {
        c.debt -= paid;
    }
}

Amount Engine::withdraw_stablecoins(Ledger& ledger, CdpId id, Amount amount, const PriceMap& prices) {
    if (amount < 0) fail(Errc::invalid_amount, "negative withdrawal");
    Cdp& c = mut(id);
    if (c.state != CdpState::Open) fail(Errc::invalid_state, "cdp is not open");
    if (amount == 0) return 0;
    const Wad debt_after = c.debt + Wad::from_amount(amount);
    if (!ratio_exceeds(price_of(prices, c.token), c.collateral, debt_after, params_.liquidation_ratio))
        fail(Errc::liquidation_ratio, "collateral ratio would not exceed the liquidation ratio");

    const Wad zeta = params_.ceiling(c.token);
    if (zeta < Wad::one()) {
        const Wad total_before = total_debt();
        const Wad total_after = total_before + Wad::from_amount(amount);
        const Wad mine_after = debt_of_token(c.token) + Wad::from_amount(amount);
        if (total_before == Wad::zero()) {
            if (mine_after > params_.bootstrap_ceiling)
                fail(Errc::debt_ceiling, "first mint exceeds the bootstrap ceiling");
        } else if (!(to_big(mine_after) * BigInt(Wad::kScale) < to_big(zeta) * to_big(total_after))) {
            fail(Errc::debt_ceiling, "token debt would reach its ceiling fraction " + zeta.to_string());
        }
    }
    ledger.mint(c.chain, ledger::kVaultWard, c.owner, amount);
    c.debt = debt_after;
    issued_ += amount;
    return amount;
}

void Engine::withdraw_collateral(Ledger& ledger, CdpId id, Amount amount, const PriceMap& prices) {
    if (amount < 0) fail(Errc::invalid_amount, "negative withdrawal");
    Cdp& c = mut(id);
    if (c.state != CdpState::Open) fail(Errc::invalid_state, "cdp is not open");
    if (amount > c.collateral) fail(Errc::insufficient_balance, "withdrawal exceeds locked collateral");
    if (amount == 0) return;
    const Amount left = c.collateral - amount;
    if (c.debt > Wad::zero() && !ratio_exceeds(price_of(prices, c.token), left, c.debt, params_.liquidation_ratio))
        fail(Errc::liquidation_ratio, "remaining collateral would not exceed the liquidation ratio");
    ledger.move_collateral(c.chain, ledger::kVaultWard, id, c.token, -amount);
    c.collateral = left;
}

void Engine::close_cdp(Ledger& ledger, CdpId id) {
    Cdp& c = mut(id);
    if (c.state != CdpState::Open) fail(Errc::invalid_state, "cdp is not open");
    if (c.debt != Wad::zero()) fail(Errc::nonzero_debt, "cannot close a cdp with debt " + c.debt.to_string());
    if (c.collateral > 0) ledger.move_collateral(c.chain, ledger::kVaultWard, id, c.token, -c.collateral);
    c.collateral = 0;
    c.state = CdpState::Closed;
}

void Engine::accrue_stability_fee(Slot slots) {
    if (slots < 0) fail(Errc::invalid_amount, "negative slot count");
    if (slots == 0 || params_.stability_fee == Wad::zero()) return;
    const Wad factor = compound(params_.stability_fee, slots);
    for (auto& [_, c] : cdps_) {
        if (c.state == CdpState::Closed || c.debt == Wad::zero()) continue;
        const Wad grown = c.debt * factor;
        pot_.surplus += grown - c.debt;
        fees_accrued_ += grown - c.debt;
        c.debt = grown;
    }
}

bool Engine::check_liquidatable(CdpId id, Wad price) const {
    const Cdp& c = cdp(id);
    if (c.debt <= Wad::zero()) return false;
    return !ratio_exceeds(price, c.collateral, c.debt, params_.liquidation_ratio);
}

void Engine::start_auction(const Ledger& ledger, CdpId id, const PriceMap& prices) {
    Cdp& c = mut(id);
    if (c.state != CdpState::Open) fail(Errc::invalid_state, "cdp is not open");
    if (!check_liquidatable(id, price_of(prices, c.token))) fail(Errc::not_liquidatable, "cdp is above the liquidation ratio");
    c.state = CdpState::InAuction;
    const Slot now = ledger.now();
    auctions_[id] = Auction{id, now, std::nullopt, now + params_.auction_duration, false};
}

void Engine::place_bid(Ledger& ledger, CdpId id, AccountId bidder, Amount amount) {
    auto it = auctions_.find(id);
    if (it == auctions_.end() || it->second.settled) fail(Errc::invalid_state, "no running auction for cdp");
    Auction& a = it->second;
    const Slot now = ledger.now();
    if (now >= a.deadline) fail(Errc::auction_expired, "auction deadline has passed");
    if (amount <= 0) fail(Errc::bid_too_low, "bid must be positive");
    if (a.best) {
        // amount >= best * (1 + step), exactly, and strictly above best
        const BigInt lhs = BigInt(amount) * BigInt(Wad::kScale);
        const BigInt rhs = BigInt(a.best->amount) * to_big(Wad::one() + params_.min_bid_step);
        if (amount <= a.best->amount || lhs < rhs)
            fail(Errc::bid_too_low, "bid " + format_amount(amount) + " below the minimum step over " + format_amount(a.best->amount));
    }
    const Cdp& c = cdp(id);
    if (ledger.chain(c.chain).balance(bidder) < amount) fail(Errc::insufficient_balance, "bidder cannot cover bid");
    ledger.transfer_local(c.chain, bidder, ledger::kAuctionHouse, amount);
    if (a.best) ledger.transfer_local(c.chain, ledger::kAuctionHouse, a.best->bidder, a.best->amount);
    a.best = Bid{bidder, amount, now, bid_seq_++};
    a.deadline = std::min(a.start + params_.auction_duration, now + params_.bid_duration);
}

Settlement Engine::settle_auction(Ledger& ledger, CdpId id) {
    auto it = auctions_.find(id);
    if (it == auctions_.end() || it->second.settled) fail(Errc::invalid_state, "no running auction for cdp");
    Auction& a = it->second;
    const Slot now = ledger.now();
    if (now < a.deadline) fail(Errc::auction_open, "auction still accepting bids");
    Cdp& c = mut(id);
    a.settled = true;
    Settlement s;
    if (!a.best) {
        c.state = CdpState::Insolvent;
        s.outcome = CdpState::Insolvent;
        notes_.push_back({now, "auction for cdp " + std::to_string(static_cast<std::uint64_t>(id)) +
                                   " ended without bids; debt " + c.debt.to_string() + " left unbacked"});
        return s;
    }
    const Amount bid = a.best->amount;
    const Wad debt = c.debt;
    const Amount owed = debt.ceil_amount();
    s.burned = std::min(bid, owed);
    const Amount excess = bid - s.burned;
    const Amount penalty_cap = (debt * params_.liquidation_penalty).floor_amount();
    s.to_surplus = std::min(excess, std::max<Amount>(penalty_cap, 0));
    s.owner_refund = excess - s.to_surplus;

    ledger.burn(c.chain, ledger::kVaultWard, ledger::kAuctionHouse, s.burned + s.to_surplus);
    issued_ -= s.burned + s.to_surplus;
    pot_.surplus += Wad::from_amount(s.to_surplus);
    if (s.owner_refund > 0) ledger.transfer_local(c.chain, ledger::kAuctionHouse, c.owner, s.owner_refund);

    s.collateral_to_winner = c.collateral;
    s.winner = a.best->bidder;
    if (c.collateral > 0) ledger.move_collateral(c.chain, ledger::kVaultWard, id, c.token, -c.collateral);
    c.collateral = 0;

    if (s.burned == owed) {
        pot_.surplus += Wad::from_amount(owed) - debt;
        c.debt = Wad::zero();
        c.state = CdpState::Closed;
    } else {
        c.debt = debt - Wad::from_amount(s.burned);
        c.state = CdpState::Insolvent;
        notes_.push_back({now, "auction for cdp " + std::to_string(static_cast<std::uint64_t>(id)) +
                                   " raised less than the debt; " + c.debt.to_string() + " remains"});
    }
    s.outcome = c.state;
    return s;
}

void Engine::savings_deposit(Ledger& ledger, AccountId user, Amount amount) {
    if (amount < 0) fail(Errc::invalid_amount, "negative deposit");
    if (amount == 0) return;
    ledger.transfer_local(savings_chain_, user, ledger::kSavingsPot, amount);
    pot_.deposits[user] += amount;
}

void Engine::savings_accrue(Ledger& ledger, Slot slots) {
    if (slots < 0) fail(Errc::invalid_amount, "negative slot count");
    if (slots == 0 || params_.savings_rate == Wad::zero()) return;
    const Wad factor = compound(params_.savings_rate, slots);
    std::map<AccountId, Amount> owed;
    Amount total = 0;
    for (const auto& [user, dep] : pot_.deposits) {
        const Wad d = Wad::from_amount(dep);
        const Amount o = (d * factor - d).floor_amount();
        if (o > 0) {
            owed[user] = o;
            total += o;
        }
    }
    if (total == 0) return;
    const Amount available = std::max<Amount>(pot_.surplus.floor_amount(), 0);
    Amount paid_total = 0;
    for (auto& [user, o] : owed) {
        Amount pay = o;
        if (total > available) pay = static_cast<Amount>(BigInt(o) * BigInt(available) / BigInt(total));
        pot_.deposits[user] += pay;
        paid_total += pay;
    }
    if (paid_total == 0) return;
    ledger.mint(savings_chain_, ledger::kSavingsPot, ledger::kSavingsPot, paid_total);
    pot_.surplus -= Wad::from_amount(paid_total);
    pot_.interest_paid += paid_total;
    issued_ += paid_total;
}

void Engine::savings_withdraw(Ledger& ledger, AccountId user, Amount amount) {
    if (amount < 0) fail(Errc::invalid_amount, "negative withdrawal");
    const Amount have = savings_balance(user);
    if (amount > have) fail(Errc::insufficient_balance, "withdrawal exceeds deposit plus interest");
    if (amount == 0) return;
    ledger.transfer_local(savings_chain_, ledger::kSavingsPot, user, amount);
    pot_.deposits[user] -= amount;
    if (pot_.deposits[user] == 0) pot_.deposits.erase(user);
}

Amount Engine::savings_balance(AccountId user) const {
    auto it = pot_.deposits.find(user);
    return it == pot_.deposits.end() ? 0 : it->second;
}

void Engine::resync_collateral(const Ledger& ledger, ChainId chain) {
    const auto& ch = ledger.chain(chain);
    for (auto& [id, c] : cdps_)
        if (c.chain == chain) c.collateral = ch.locked_collateral(id);
}

FullBacking Engine::full_backing(const PriceMap& prices) const {
    FullBacking fb;
    for (const auto& [_, c] : cdps_) {
        if (c.collateral > 0) fb.collateral_value += price_of(prices, c.token).to_rational() * amount_to_rational(c.collateral);
        fb.debt += c.debt.to_rational();
    }
    if (fb.debt == 0) {
        fb.ok = true;
        return fb;
    }
    fb.ratio = fb.collateral_value / fb.debt;
    fb.ok = *fb.ratio > params_.safety_threshold.to_rational();
    return fb;
}

}  // namespace crocodai::vault
