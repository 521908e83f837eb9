#include "crocodai/ledger.hpp"

#include <algorithm>

namespace crocodai::ledger {
namespace {

template <class... Ts>
struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::uint64_t raw(AccountId a) { return static_cast<std::uint64_t>(a); }
std::uint64_t raw(TransferId t) { return static_cast<std::uint64_t>(t); }
std::uint64_t raw(CdpId c) { return static_cast<std::uint64_t>(c); }

void require_amount(Amount amount) {
    if (amount < 0) fail(Errc::invalid_amount, "negative amount " + format_amount(amount));
}

}  // namespace

CoinChain::CoinChain(ChainId id, std::string name, std::map<AccountId, Amount> genesis)
    : id_(id), name_(std::move(name)), genesis_(std::move(genesis)) {
    rebuild();
}

Amount CoinChain::balance(AccountId who) const {
    auto it = balances_.find(who);
    return it == balances_.end() ? 0 : it->second;
}

const std::optional<EscrowRecord> CoinChain::escrow(TransferId t) const {
    auto it = escrows_.find(t);
    if (it == escrows_.end()) return std::nullopt;
    return it->second;
}

Amount CoinChain::locked_collateral(CdpId cdp) const {
    auto it = collateral_.find(cdp);
    return it == collateral_.end() ? 0 : it->second;
}

Amount CoinChain::escrowed() const {
    Amount total = 0;
    for (const auto& [_, e] : escrows_) total += e.amount;
    return total;
}

Amount CoinChain::supply() const {
    Amount total = escrowed();
    for (const auto& [_, b] : balances_) total += b;
    return total;
}

void CoinChain::append(Slot slot, EventPayload payload) {
    applying_slot_ = slot;
    apply(payload);
    log_.push_back(LoggedEvent{next_seq_++, slot, std::move(payload)});
}

void CoinChain::apply(const EventPayload& payload) {
    std::visit(overloaded{
                   [&](const event::Mint& e) { balances_[e.to] += e.amount; },
                   [&](const event::Burn& e) { balances_[e.from] -= e.amount; },
                   [&](const event::Move& e) {
                       balances_[e.from] -= e.amount;
                       balances_[e.to] += e.amount;
                   },
                   [&](const event::EscrowOpen& e) {
                       balances_[e.sender] -= e.amount;
                       escrows_[e.transfer] = EscrowRecord{e.transfer, e.sender, e.amount, applying_slot_};
                   },
                   [&](const event::EscrowBurn& e) { escrows_.erase(e.transfer); },
                   [&](const event::EscrowRefund& e) {
                       auto it = escrows_.find(e.transfer);
                       balances_[it->second.sender] += it->second.amount;
                       escrows_.erase(it);
                   },
                   [&](const event::Ward& e) {
                       if (e.add) wards_.insert(e.who);
                       else wards_.erase(e.who);
                   },
                   [&](const event::Collateral& e) {
                       collateral_[e.cdp] += e.amount;
                       if (collateral_[e.cdp] == 0) collateral_.erase(e.cdp);
                   },
               },
               payload);
}

void CoinChain::rebuild() {
    balances_ = genesis_;
    escrows_.clear();
    collateral_.clear();
    wards_ = {kVaultWard, kRelayWard, kSavingsPot, kAuctionHouse};
    for (const auto& e : log_) {
        applying_slot_ = e.slot;
        apply(e.payload);
    }
}

ChainId Ledger::create_chain(const ChainConfig& config) {
    if (config.name.empty()) fail(Errc::schema_error, "chain name must not be empty");
    if (chain_names_.count(config.name)) fail(Errc::duplicate_name, "duplicate chain name '" + config.name + "'");
    const ChainId id{static_cast<std::uint32_t>(chains_.size())};
    std::map<AccountId, Amount> genesis;
    for (const auto& [name, amount] : config.accounts) {
        require_amount(amount);
        genesis[account(name)] += amount;
    }
    CoinChain chain(id, config.name, std::move(genesis));
    chain.clock_ = now_;
    chains_.emplace(id, std::move(chain));
    chain_names_.emplace(config.name, id);
    return id;
}

TokenId Ledger::register_token(const std::string& symbol, ChainId home, bool pegged) {
    if (token_symbols_.count(symbol)) fail(Errc::duplicate_name, "duplicate token '" + symbol + "'");
    if (!has_chain(home)) fail(Errc::unknown_chain, "token '" + symbol + "' homed on unknown chain");
    const TokenId id{static_cast<std::uint32_t>(tokens_.size())};
    tokens_.push_back(Token{id, symbol, home, pegged});
    token_symbols_.emplace(symbol, id);
    return id;
}

AccountId Ledger::account(const std::string& name) {
    if (auto it = accounts_.find(name); it != accounts_.end()) return it->second;
    const AccountId id{next_account_++};
    accounts_.emplace(name, id);
    account_names_.emplace(id, name);
    return id;
}

std::optional<AccountId> Ledger::find_account(const std::string& name) const {
    auto it = accounts_.find(name);
    if (it == accounts_.end()) return std::nullopt;
    return it->second;
}

std::string Ledger::account_name(AccountId id) const {
    if (id == kVaultWard) return "@vault";
    if (id == kRelayWard) return "@relay";
    if (id == kSavingsPot) return "@pot";
    if (id == kAuctionHouse) return "@auction";
    auto it = account_names_.find(id);
    return it == account_names_.end() ? "#" + std::to_string(raw(id)) : it->second;
}

const CoinChain& Ledger::chain(ChainId id) const {
    auto it = chains_.find(id);
    if (it == chains_.end()) fail(Errc::unknown_chain, "unknown chain " + std::to_string(static_cast<unsigned>(id)));
    return it->second;
}

CoinChain& Ledger::mut(ChainId id) { return const_cast<CoinChain&>(std::as_const(*this).chain(id)); }

std::optional<ChainId> Ledger::find_chain(const std::string& name) const {
    auto it = chain_names_.find(name);
    if (it == chain_names_.end()) return std::nullopt;
    return it->second;
}

std::vector<ChainId> Ledger::chain_ids() const {
    std::vector<ChainId> ids;
    for (const auto& [id, _] : chains_) ids.push_back(id);
    return ids;
}

const Token& Ledger::token(TokenId id) const {
    const auto i = static_cast<std::size_t>(id);
    if (i >= tokens_.size()) fail(Errc::unknown_token, "unknown token " + std::to_string(i));
    return tokens_[i];
}

std::optional<TokenId> Ledger::find_token(const std::string& symbol) const {
    auto it = token_symbols_.find(symbol);
    if (it == token_symbols_.end()) return std::nullopt;
    return it->second;
}

void Ledger::advance_to(Slot slot) {
    if (slot < now_) fail(Errc::invalid_state, "clock cannot move backwards");
    now_ = slot;
    for (auto& [_, c] : chains_) c.clock_ = slot;
}

void Ledger::require_ward(const CoinChain& c, AccountId ward) const {
    if (!c.is_ward(ward))
        fail(Errc::unauthorized, account_name(ward) + " is not a ward on chain '" + c.name() + "'");
}

void Ledger::transfer_local(ChainId chain, AccountId from, AccountId to, Amount amount) {
    require_amount(amount);
    CoinChain& c = mut(chain);
    if (c.balance(from) < amount)
        fail(Errc::insufficient_balance, account_name(from) + " holds " + format_amount(c.balance(from)) +
                                             ", needs " + format_amount(amount));
    if (amount == 0) return;
    c.append(now_, event::Move{from, to, amount});
}

void Ledger::mint(ChainId chain, AccountId ward, AccountId to, Amount amount) {
    require_amount(amount);
    CoinChain& c = mut(chain);
    require_ward(c, ward);
    if (amount == 0) return;
    c.append(now_, event::Mint{ward, to, amount});
}

void Ledger::burn(ChainId chain, AccountId ward, AccountId from, Amount amount) {
    require_amount(amount);
    CoinChain& c = mut(chain);
    require_ward(c, ward);
    if (c.balance(from) < amount) fail(Errc::insufficient_balance, "burn exceeds balance of " + account_name(from));
    if (amount == 0) return;
    c.append(now_, event::Burn{ward, from, amount});
}

void Ledger::open_escrow(ChainId chain, TransferId transfer, AccountId sender, Amount amount) {
    require_amount(amount);
    CoinChain& c = mut(chain);
    if (c.escrows().count(transfer)) fail(Errc::duplicate_name, "escrow already exists");
    if (c.balance(sender) < amount) fail(Errc::insufficient_balance, "escrow exceeds balance of " + account_name(sender));
    c.append(now_, event::EscrowOpen{transfer, sender, amount});
}

void Ledger::burn_escrow(ChainId chain, AccountId ward, TransferId transfer) {
    CoinChain& c = mut(chain);
    require_ward(c, ward);
    if (!c.escrows().count(transfer)) fail(Errc::unknown_transfer, "no escrow for transfer");
    c.append(now_, event::EscrowBurn{transfer});
}

void Ledger::refund_escrow(ChainId chain, AccountId ward, TransferId transfer) {
    CoinChain& c = mut(chain);
    require_ward(c, ward);
    if (!c.escrows().count(transfer)) fail(Errc::unknown_transfer, "no escrow for transfer");
    c.append(now_, event::EscrowRefund{transfer});
}

void Ledger::set_ward(ChainId chain, AccountId ward, AccountId who, bool add) {
    CoinChain& c = mut(chain);
    require_ward(c, ward);
    if (c.is_ward(who) == add) return;
    c.append(now_, event::Ward{who, add});
}

void Ledger::move_collateral(ChainId chain, AccountId ward, CdpId cdp, TokenId token, Amount delta) {
    CoinChain& c = mut(chain);
    require_ward(c, ward);
    if (c.locked_collateral(cdp) + delta < 0) fail(Errc::insufficient_balance, "collateral would go negative");
    if (delta == 0) return;
    c.append(now_, event::Collateral{cdp, token, delta});
}

void Ledger::set_compromised(ChainId chain, bool compromised) { mut(chain).compromised_ = compromised; }

RevertRecord Ledger::fork_revert(ChainId chain, Slot since) {
    CoinChain& c = mut(chain);
    if (!c.compromised()) fail(Errc::not_compromised, "fork_revert requires a compromised chain ('" + c.name() + "')");
    RevertRecord rec;
    rec.chain = chain;
    rec.since = since;
    rec.at = now_;
    rec.supply_before = c.supply();
    auto first = std::find_if(c.log_.begin(), c.log_.end(), [&](const LoggedEvent& e) { return e.slot >= since; });
    std::set<TransferId> opened_removed;
    std::set<CdpId> touched;
    for (auto it = first; it != c.log_.end(); ++it) {
        if (auto* o = std::get_if<event::EscrowOpen>(&it->payload)) opened_removed.insert(o->transfer);
        if (auto* col = std::get_if<event::Collateral>(&it->payload)) touched.insert(col->cdp);
    }
    for (auto it = first; it != c.log_.end(); ++it) {
        if (auto* b = std::get_if<event::EscrowBurn>(&it->payload); b && !opened_removed.count(b->transfer))
            rec.escrows_reopened.push_back(b->transfer);
    }
    rec.escrows_removed.assign(opened_removed.begin(), opened_removed.end());
    rec.collateral_touched.assign(touched.begin(), touched.end());
    rec.events_removed = static_cast<std::size_t>(std::distance(first, c.log_.end()));
    c.log_.erase(first, c.log_.end());
    c.rebuild();
    rec.supply_after = c.supply();
    if (rec.events_removed > 0) reverts_.push_back(rec);
    return rec;
}

Amount Ledger::total_circulating() const {
    Amount total = 0;
    for (const auto& [_, c] : chains_) total += c.supply();
    return total;
}

nlohmann::json to_json(const LoggedEvent& e) {
    nlohmann::json j{{"seq", e.seq}, {"slot", e.slot}};
    std::visit(overloaded{
                   [&](const event::Mint& m) {
                       j["kind"] = "mint";
                       j["ward"] = raw(m.ward);
                       j["to"] = raw(m.to);
                       j["amount"] = format_amount(m.amount);
                   },
                   [&](const event::Burn& b) {
                       j["kind"] = "burn";
                       j["ward"] = raw(b.ward);
                       j["from"] = raw(b.from);
                       j["amount"] = format_amount(b.amount);
                   },
                   [&](const event::Move& m) {
                       j["kind"] = "move";
                       j["from"] = raw(m.from);
                       j["to"] = raw(m.to);
                       j["amount"] = format_amount(m.amount);
                   },
                   [&](const event::EscrowOpen& o) {
                       j["kind"] = "escrow_open";
                       j["transfer"] = raw(o.transfer);
                       j["sender"] = raw(o.sender);
                       j["amount"] = format_amount(o.amount);
                   },
                   [&](const event::EscrowBurn& b) {
                       j["kind"] = "escrow_burn";
                       j["transfer"] = raw(b.transfer);
                   },
                   [&](const event::EscrowRefund& r) {
                       j["kind"] = "escrow_refund";
                       j["transfer"] = raw(r.transfer);
                   },
                   [&](const event::Ward& w) {
                       j["kind"] = w.add ? "ward_add" : "ward_remove";
                       j["who"] = raw(w.who);
                   },
                   [&](const event::Collateral& c) {
                       j["kind"] = "collateral";
                       j["cdp"] = raw(c.cdp);
                       j["token"] = static_cast<unsigned>(c.token);
                       j["amount"] = format_amount(c.amount);
                   },
               },
               e.payload);
    return j;
}

void Ledger::export_log_jsonl(ChainId chain, std::ostream& out) const {
    for (const auto& e : this->chain(chain).log()) out << to_json(e).dump() << '\n';
}

}  // namespace crocodai::ledger
