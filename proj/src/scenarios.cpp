#include "crocodai/scenarios.hpp"

#include "crocodai/ledger.hpp"
#include "crocodai/oracle.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace crocodai::scen {
namespace {

struct Entry {
    const char* name;
    std::vector<std::pair<const char*, double>> weights;
    bool fitted;
};

// Optimized weights were solved on the original price history; A-Opt rows do
// not add up to 100% and are rescaled.
const std::vector<Entry>& table() {
    static const std::vector<Entry> t = {
        {"D-All", {{"USDC", 0.47}, {"ETH", 0.19}, {"PAXG", 0.14}, {"USDP", 0.10}, {"USDT", 0.08}, {"WBTC", 0.02}}, false},
        {"D-ERC", {{"ETH", 0.902}, {"WBTC", 0.094}, {"GNO", 0.002}, {"LINK", 0.001}, {"MATIC", 0.0005}, {"YFI", 0.0005}}, false},
        {"D-Mix1", {{"ETH", 0.5}, {"WBTC", 0.3}, {"GNO", 0.05}, {"LINK", 0.05}, {"MATIC", 0.05}, {"YFI", 0.05}}, false},
        {"D-Mix2", {{"ETH", 0.2}, {"WBTC", 0.2}, {"GNO", 0.15}, {"LINK", 0.15}, {"MATIC", 0.15}, {"YFI", 0.15}}, false},
        {"C-Mix1", {{"ETH", 0.5}, {"WBTC", 0.3}, {"ADA", 0.05}, {"DOT", 0.05}, {"TRX", 0.05}, {"AVAX", 0.05}}, false},
        {"C-Mix2", {{"ETH", 0.2}, {"WBTC", 0.2}, {"ADA", 0.15}, {"DOT", 0.15}, {"TRX", 0.15}, {"AVAX", 0.15}}, false},
        {"D-Opt", {{"WBTC", 0.74015}, {"GNO", 0.25985}}, true},
        {"D-Opt-0.2", {{"WBTC", 0.2}, {"ETH", 0.2}, {"GNO", 0.2}, {"LINK", 0.2}, {"YFI", 0.2}}, true},
        {"C-Opt", {{"WBTC", 0.62204}, {"TRX", 0.37796}}, true},
        {"C-Opt-0.2", {{"WBTC", 0.2}, {"ETH", 0.16656}, {"ADA", 0.14493}, {"DOT", 0.2}, {"TRX", 0.2}, {"EOS", 0.08851}}, true},
        {"A-Opt",
         {{"BSV", 8.728}, {"BTG", 0.796}, {"BTT", 36.821}, {"DCR", 4.357}, {"GNO", 5.221}, {"HT", 0.0762}, {"KCS", 2.726},
          {"KLAY", 5.705}, {"LEO", 17.568}, {"OKB", 3.223}, {"TRX", 13.017}, {"TWT", 0.483}, {"XLM", 0.593}},
         true},
        {"A-Opt-0.1",
         {{"BSV", 10}, {"BTG", 1.354}, {"BTT", 10}, {"CAKE", 0.644}, {"DCR", 7.278}, {"GNO", 10}, {"HT", 1.742},
          {"KCS", 5.819}, {"KLAY", 9.434}, {"LEO", 10}, {"NEXO", 0.311}, {"OKB", 5.604}, {"TRX", 10}, {"TWT", 8.61},
          {"WBTC", 10}, {"XLM", 6.951}},
         true},
    };
    return t;
}

const std::vector<std::string> kSingles = {"BTC", "ETH", "ADA", "SOL", "DOT", "TRX", "AVAX", "ALGO", "EOS"};

Rational wad_r(Wad w) { return w.to_rational(); }
Rational amt_r(Amount a) { return amount_to_rational(a); }

std::string ratio_str(const Rational& r) {
    std::ostringstream o;
    o.precision(9);
    o << static_cast<double>(r);
    return o.str();
}

// floor of a non-negative rational
BigInt floor_r(const Rational& r) {
    using boost::multiprecision::cpp_int;
    const cpp_int q = boost::multiprecision::numerator(r) / boost::multiprecision::denominator(r);
    return BigInt(q);
}

}  // namespace

mc::Portfolio builtin_portfolio(const std::string& name) {
    for (const auto& e : table()) {
        if (name != e.name) continue;
        mc::Portfolio p{e.name, {}, {}};
        for (const auto& [sym, w] : e.weights) {
            p.assets.emplace_back(sym);
            p.weights.push_back(w);
        }
        p = p.normalized();
        p.validate();
        return p;
    }
    if (std::find(kSingles.begin(), kSingles.end(), name) != kSingles.end()) return {name, {name}, {1.0}};
    fail(Errc::invalid_parameter, "unknown portfolio '" + name + "'");
}

std::vector<std::string> builtin_portfolio_names() {
    std::vector<std::string> out;
    for (const auto& e : table()) out.emplace_back(e.name);
    return out;
}

std::vector<std::string> single_asset_names() { return kSingles; }

bool dataset_dependent(const std::string& name) {
    for (const auto& e : table())
        if (name == e.name) return e.fitted;
    return false;
}

const std::vector<std::string>& pegged_symbols() {
    static const std::vector<std::string> p = {"USDC", "USDT", "BUSD", "DAI",  "USDP", "TUSD", "USDN", "USDD",
                                               "GUSD", "FRAX", "LUSD", "PAXG", "XAUT", "USTC", "EURS", "FEI"};
    return p;
}

std::vector<std::string> universe(const std::string& name, const std::vector<std::string>& available) {
    if (name == "D") return {"ETH", "WBTC", "GNO", "LINK", "MATIC", "YFI"};
    if (name == "C") return {"ETH", "WBTC", "ADA", "DOT", "TRX", "AVAX", "SOL", "EOS"};
    if (name == "A") {
        if (available.empty()) fail(Errc::insufficient_data, "universe A needs the list of available symbols");
        std::vector<std::string> out;
        const auto& peg = pegged_symbols();
        for (const auto& s : available)
            if (std::find(peg.begin(), peg.end(), s) == peg.end()) out.push_back(s);
        return out;
    }
    fail(Errc::invalid_parameter, "unknown universe '" + name + "' (D, C or A)");
}

// ---- system ---------------------------------------------------------------

std::size_t System::token_index(const std::string& symbol) const {
    for (std::size_t i = 0; i < tokens.size(); ++i)
        if (tokens[i].symbol == symbol) return i;
    fail(Errc::unknown_token, "unknown token '" + symbol + "'");
}

std::size_t System::chain_index(const std::string& name) const {
    for (std::size_t i = 0; i < chains.size(); ++i)
        if (chains[i] == name) return i;
    fail(Errc::unknown_chain, "unknown chain '" + name + "'");
}

Rational collateral_value(const System& s, const std::vector<bool>& crashed) {
    Rational v = 0;
    for (const auto& c : s.cdps) {
        if (c.token < crashed.size() && crashed[c.token]) continue;
        v += wad_r(s.tokens.at(c.token).price) * amt_r(c.collateral);
    }
    return v;
}

Rational total_debt(const System& s) {
    Rational d = 0;
    for (const auto& c : s.cdps) d += amt_r(c.debt);
    return d;
}

Rational debt_of_tokens(const System& s, const std::vector<bool>& which) {
    Rational d = 0;
    for (const auto& c : s.cdps)
        if (c.token < which.size() && which[c.token]) d += amt_r(c.debt);
    return d;
}

Rational aggregate_ratio(const System& s) {
    const Rational d = total_debt(s);
    if (d <= 0) fail(Errc::precondition, "no outstanding debt");
    return collateral_value(s) / d;
}

std::optional<std::string> precondition_violation(const System& s) {
    if (s.chains.empty() || s.tokens.empty()) return "system has no chains or tokens";
    for (const auto& t : s.tokens) {
        if (t.chain >= s.chains.size()) return "token " + t.symbol + " lives on an unknown chain";
        if (t.price <= Wad::zero()) return "token " + t.symbol + " has a non-positive price";
        if (t.ceiling < Wad::zero() || t.ceiling > Wad::one()) return "ceiling of " + t.symbol + " outside [0, 1]";
    }
    const Rational gamma = wad_r(s.gamma);
    std::vector<Rational> per_token(s.tokens.size(), Rational(0));
    for (std::size_t i = 0; i < s.cdps.size(); ++i) {
        const auto& c = s.cdps[i];
        if (c.token >= s.tokens.size()) return "cdp " + std::to_string(i) + " uses an unknown token";
        if (c.debt < 0 || c.collateral < 0) return "cdp " + std::to_string(i) + " has a negative amount";
        if (c.debt == 0) continue;
        const Rational r = wad_r(s.tokens[c.token].price) * amt_r(c.collateral) / amt_r(c.debt);
        if (!(r > gamma)) return "cdp " + std::to_string(i) + " ratio " + ratio_str(r) + " does not exceed gamma";
        per_token[c.token] += amt_r(c.debt);
    }
    const Rational d = total_debt(s);
    if (d <= 0) return "no outstanding debt";
    for (std::size_t m = 0; m < s.tokens.size(); ++m)
        if (per_token[m] > wad_r(s.tokens[m].ceiling) * d)
            return "debt share of " + s.tokens[m].symbol + " exceeds its ceiling";
    return std::nullopt;
}

System random_system(Rng& rng, const RandomSpec& spec) {
    auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    std::exponential_distribution<double> expo(1.0);
    const Rational gamma = wad_r(spec.gamma);
    for (int attempt = 0; attempt < 100'000; ++attempt) {
        System s;
        s.gamma = spec.gamma;
        s.theta = spec.theta;
        const int nc = uni(spec.min_chains, spec.max_chains);
        const int nt = std::max(nc, uni(spec.min_tokens, spec.max_tokens));
        for (int c = 0; c < nc; ++c) s.chains.push_back("chain" + std::to_string(c));
        for (int t = 0; t < nt; ++t) {
            TokenSpec tok;
            tok.symbol = "T" + std::to_string(t);
            tok.chain = static_cast<std::size_t>(t < nc ? t : uni(0, nc - 1));
            // 0.01 .. 50000 with six decimals
            const auto micros = std::uniform_int_distribution<std::int64_t>(10'000, 50'000'000'000)(rng);
            tok.price = Wad::from_raw(static_cast<Wad::Raw>(micros) * 1'000'000'000'000);
            s.tokens.push_back(tok);
        }
        std::vector<int> permille(static_cast<std::size_t>(nt));
        do {
            for (auto& k : permille) k = uni(1, 1000);
        } while (std::accumulate(permille.begin(), permille.end(), 0) < 1000);
        for (int t = 0; t < nt; ++t)
            s.tokens[static_cast<std::size_t>(t)].ceiling =
                Wad::from_raw(static_cast<Wad::Raw>(permille[static_cast<std::size_t>(t)]) * 1'000'000'000'000'000);

        const int n = uni(spec.min_cdps, spec.max_cdps);
        std::vector<std::vector<std::size_t>> by_token(static_cast<std::size_t>(nt));
        for (int i = 0; i < n; ++i) {
            CdpSpec c;
            c.token = static_cast<std::size_t>(uni(0, nt - 1));
            by_token[c.token].push_back(s.cdps.size());
            s.cdps.push_back(c);
        }
        std::vector<double> share(static_cast<std::size_t>(nt), 0.0);
        double total = 0.0;
        for (int t = 0; t < nt; ++t)
            if (!by_token[static_cast<std::size_t>(t)].empty()) total += share[static_cast<std::size_t>(t)] = expo(rng);
        const double debt_total = static_cast<double>(uni(1'000, 1'000'000));
        for (int t = 0; t < nt; ++t) {
            const auto& ids = by_token[static_cast<std::size_t>(t)];
            if (ids.empty()) continue;
            std::vector<double> split(ids.size());
            double ssum = 0.0;
            for (auto& x : split) ssum += x = expo(rng);
            for (std::size_t k = 0; k < ids.size(); ++k) {
                const double coins = debt_total * share[static_cast<std::size_t>(t)] / total * split[k] / ssum;
                s.cdps[ids[k]].debt = std::max<Amount>(1, amount_from_double(coins));
            }
        }
        for (auto& c : s.cdps) {
            const Rational u(std::uniform_int_distribution<std::int64_t>(1, 1'000'000)(rng), 1'000'000);
            const Rational r = gamma * (1 + 2 * u);
            const Rational units = r * amt_r(c.debt) / wad_r(s.tokens[c.token].price) * Rational(kCoin);
            c.collateral = static_cast<Amount>(floor_r(units) + 1);
        }
        if (!precondition_violation(s)) return s;
    }
    fail(Errc::infeasible, "could not draw a ceiling-respecting instance");
}

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::Holds: return "holds";
        case Outcome::Violated: return "violated";
        case Outcome::PreconditionFailed: return "precondition-failed";
    }
    return "?";
}

nlohmann::json to_json(const AttackReport& r) {
    nlohmann::json j{{"kind", r.kind},
                     {"affected", r.affected},
                     {"zeta_prime", static_cast<double>(r.zeta_prime)},
                     {"bound", static_cast<double>(r.bound)},
                     {"ratio_before", static_cast<double>(r.ratio_before)},
                     {"outcome", to_string(r.outcome)},
                     {"full_backing_ok", r.full_backing_ok}};
    if (r.ratio_after) j["ratio_after"] = static_cast<double>(*r.ratio_after);
    if (r.kind == "compromised_chain") {
        j["h_prime"] = format_amount(r.h_prime);
        j["unbacked"] = format_amount(r.unbacked);
    }
    if (!r.message.empty()) j["message"] = r.message;
    return j;
}

std::string to_text(const AttackReport& r) {
    std::ostringstream o;
    o << r.kind << " [";
    for (std::size_t i = 0; i < r.affected.size(); ++i) o << (i ? "," : "") << r.affected[i];
    o << "] zeta'=" << ratio_str(r.zeta_prime);
    if (r.kind == "compromised_chain") o << " h'=" << format_amount(r.h_prime) << " unbacked=" << format_amount(r.unbacked);
    if (r.ratio_after)
        o << " ratio " << ratio_str(r.ratio_before) << " -> " << ratio_str(*r.ratio_after) << " vs bound "
          << ratio_str(r.bound);
    o << ": " << to_string(r.outcome);
    if (!r.message.empty()) o << " (" << r.message << ")";
    return o.str();
}

namespace {

// Shared front half of both checkers: marks the affected tokens and fills in
// zeta', the bound and the ratio before the attack.
bool prepare(const System& s, const std::vector<bool>& tokens, AttackReport& r) {
    if (auto v = precondition_violation(s)) {
        r.message = *v;
        return false;
    }
    r.ratio_before = aggregate_ratio(s);
    for (std::size_t m = 0; m < s.tokens.size(); ++m)
        if (tokens[m]) r.zeta_prime += wad_r(s.tokens[m].ceiling);
    r.bound = wad_r(s.gamma) * (1 - r.zeta_prime);
    if (r.zeta_prime >= 1) {
        r.message = "affected ceilings sum to 1 or more";
        return false;
    }
    return true;
}

void conclude(const System& s, AttackReport& r) {
    r.full_backing_ok = *r.ratio_after > wad_r(s.theta);
    r.outcome = *r.ratio_after > r.bound ? Outcome::Holds : Outcome::Violated;
}

}  // namespace

AttackReport token_crash_scenario(const System& s, const std::vector<std::size_t>& tokens) {
    AttackReport r;
    r.kind = "token_crash";
    std::vector<bool> hit(s.tokens.size(), false);
    for (auto t : tokens) {
        if (t >= s.tokens.size()) fail(Errc::unknown_token, "token index " + std::to_string(t) + " out of range");
        if (!hit[t]) r.affected.push_back(s.tokens[t].symbol);
        hit[t] = true;
    }
    if (!prepare(s, hit, r)) return r;
    r.ratio_after = collateral_value(s, hit) / total_debt(s);
    conclude(s, r);
    return r;
}

std::optional<Amount> max_h_prime(const System& s, const std::vector<std::size_t>& chains) {
    std::vector<bool> hit(s.tokens.size(), false);
    Rational zeta = 0;
    for (std::size_t m = 0; m < s.tokens.size(); ++m)
        if (std::find(chains.begin(), chains.end(), s.tokens[m].chain) != chains.end()) {
            hit[m] = true;
            zeta += wad_r(s.tokens[m].ceiling);
        }
    if (zeta >= 1) return std::nullopt;
    const Rational minus = debt_of_tokens(s, hit);
    const Rational plus = total_debt(s) - minus;
    // h' < limit, in minor units
    const Rational limit = (zeta / (1 - zeta) * plus - minus) * Rational(kCoin);
    if (limit <= 0) return std::nullopt;
    BigInt h = floor_r(limit);
    if (Rational(h) == limit) h -= 1;
    const BigInt cap(std::numeric_limits<Amount>::max());
    return static_cast<Amount>(std::min(h, cap));
}

AttackReport compromised_chain_scenario(const System& s, const std::vector<std::size_t>& chains, Amount h_prime) {
    AttackReport r;
    r.kind = "compromised_chain";
    r.h_prime = h_prime;
    if (h_prime < 0) fail(Errc::invalid_amount, "h' must be non-negative");
    std::vector<bool> bad_chain(s.chains.size(), false);
    for (auto c : chains) {
        if (c >= s.chains.size()) fail(Errc::unknown_chain, "chain index " + std::to_string(c) + " out of range");
        if (!bad_chain[c]) r.affected.push_back(s.chains[c]);
        bad_chain[c] = true;
    }
    std::vector<bool> hit(s.tokens.size(), false);
    for (std::size_t m = 0; m < s.tokens.size(); ++m) hit[m] = s.tokens[m].chain < bad_chain.size() && bad_chain[s.tokens[m].chain];
    if (!prepare(s, hit, r)) return r;

    const Rational minus = debt_of_tokens(s, hit);
    const Rational plus = total_debt(s) - minus;
    if (!(minus + amt_r(h_prime) < r.zeta_prime / (1 - r.zeta_prime) * plus)) {
        r.message = "h' breaks D-_0 + h' < zeta'/(1 - zeta') D+_0";
        return r;
    }

    // Stablecoins issued against each chain's CDPs circulate on that chain,
    // held by one account per chain.
    ledger::Ledger L;
    std::vector<ledger::ChainId> ids;
    std::vector<ledger::AccountId> holder;
    for (std::size_t c = 0; c < s.chains.size(); ++c) {
        Amount issued = 0;
        for (const auto& cdp : s.cdps)
            if (s.tokens[cdp.token].chain == c) issued += cdp.debt;
        ledger::ChainConfig cfg{s.chains[c], {}};
        const std::string who = "holder@" + s.chains[c];
        if (issued > 0) cfg.accounts.emplace_back(who, issued);
        ids.push_back(L.create_chain(cfg));
        holder.push_back(L.account(who));
    }
    std::optional<std::size_t> target;
    for (std::size_t c = 0; c < s.chains.size() && !target; ++c)
        if (!bad_chain[c]) target = c;
    if (!target) {
        r.message = "every chain is compromised";
        return r;
    }
    relay::Relay relay(std::vector<relay::NodeSpec>(4), 1);
    for (std::size_t c = 0; c < s.chains.size(); ++c)
        if (bad_chain[c]) L.set_compromised(ids[c], true);

    const Amount before = L.total_circulating();
    auto move = [&](std::size_t from, std::size_t to, ledger::AccountId who, Amount amt, ledger::Slot slot) {
        L.advance_to(slot);
        const auto id = relay.request_transfer(L, ids[from], who, amt, ids[to], who);
        relay.relay_step(L, slot + 1);
        if (relay.transfer(id).state != relay::TransferState::Committed)
            fail(Errc::invalid_state, "relay did not commit an attack transfer");
    };
    Amount remaining = h_prime;
    ledger::Slot slot = 1;
    while (remaining > 0) {
        bool progress = false;
        for (std::size_t c = 0; c < s.chains.size() && remaining > 0; ++c) {
            if (!bad_chain[c]) continue;
            const Amount amt = std::min(L.chain(ids[c]).balance(holder[c]), remaining);
            if (amt == 0) continue;
            move(c, *target, holder[c], amt, slot);
            L.fork_revert(ids[c], slot);
            remaining -= amt;
            slot += 2;
            progress = true;
            if (remaining > 0) {
                // bring the fresh coins home so the next round can spend more
                move(*target, c, holder[c], L.chain(ids[*target]).balance(holder[c]), slot);
                slot += 2;
            }
        }
        if (!progress) {
            r.message = "no stablecoins circulate on the compromised chains";
            return r;
        }
    }
    for (const auto& [_, amt] : relay.unbacked_commits(L)) r.unbacked += amt;
    if (L.total_circulating() - before != r.unbacked)
        r.message = "circulating supply grew by " + format_amount(L.total_circulating() - before) + ", not by the unbacked mints";
    // collateral on the compromised chain keeps its value
    r.ratio_after = collateral_value(s) / (total_debt(s) + amt_r(r.unbacked));
    conclude(s, r);
    return r;
}

// ---- scenario files ---------------------------------------------------------

nlohmann::json ScenarioReport::to_json() const { return {{"pass", pass}, {"results", results}}; }

std::string ScenarioReport::to_text() const {
    std::string out;
    for (const auto& l : lines) out += l + '\n';
    out += pass ? "PASS\n" : "FAIL\n";
    return out;
}

relay::NodeSpec node_from_string(const std::string& text) {
    relay::NodeSpec n;
    if (text == "honest") return n;
    if (text.rfind("crashed", 0) == 0) {
        n.behavior = relay::Behavior::Crashed;
        if (text.size() > 7) {
            if (text[7] != '@') fail(Errc::schema_error, "bad node '" + text + "'");
            n.crash_at = std::stoll(text.substr(8));
        }
        return n;
    }
    if (text.rfind("byzantine:", 0) == 0) {
        n.behavior = relay::Behavior::Byzantine;
        const std::string s = text.substr(10);
        if (s == "equivocate") n.strategy = relay::Strategy::Equivocate;
        else if (s == "refuse") n.strategy = relay::Strategy::Refuse;
        else if (s == "forge") n.strategy = relay::Strategy::Forge;
        else fail(Errc::schema_error, "unknown byzantine strategy '" + s + "'");
        return n;
    }
    fail(Errc::schema_error, "unknown node behaviour '" + text + "'");
}

namespace {

using json = nlohmann::json;

[[noreturn]] void schema(const std::string& at, const std::string& what) { fail(Errc::schema_error, at + ": " + what); }

const json& need(const json& j, const char* key, const std::string& at) {
    if (!j.is_object() || !j.contains(key)) schema(at, std::string("missing '") + key + "'");
    return j.at(key);
}

std::string scalar(const json& j, const std::string& at) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number()) return j.dump();
    schema(at, "expected a number or numeric string");
}

Amount amount_at(const json& j, const std::string& at) {
    try {
        return parse_amount(scalar(j, at));
    } catch (const std::invalid_argument& e) {
        schema(at, e.what());
    }
}

Wad wad_at(const json& j, const std::string& at) {
    try {
        return Wad::parse(scalar(j, at));
    } catch (const std::invalid_argument& e) {
        schema(at, e.what());
    }
}

std::vector<std::string> strings_at(const json& j, const std::string& at) {
    if (!j.is_array()) schema(at, "expected an array of names");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_string()) schema(at + "/" + std::to_string(i), "expected a string");
        out.push_back(j[i].get<std::string>());
    }
    return out;
}

void check_keys(const json& j, const std::string& at, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) schema(at, "expected an object");
    for (const auto& [k, _] : j.items())
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
            schema(at + "/" + k, "unknown field");
}

System system_from(const json& sc, Rng& rng) {
    System s;
    if (sc.contains("gamma")) s.gamma = wad_at(sc["gamma"], "/gamma");
    if (sc.contains("theta")) s.theta = wad_at(sc["theta"], "/theta");
    if (sc.contains("random")) {
        const json& rj = sc["random"];
        check_keys(rj, "/random", {"chains", "tokens", "cdps"});
        RandomSpec spec;
        spec.gamma = s.gamma;
        spec.theta = s.theta;
        auto count = [&](const char* key, int& lo, int& hi) {
            if (!rj.contains(key)) return;
            if (!rj[key].is_number_integer() || rj[key].get<int>() < 1) schema(std::string("/random/") + key, "expected a positive integer");
            lo = hi = rj[key].get<int>();
        };
        count("chains", spec.min_chains, spec.max_chains);
        count("tokens", spec.min_tokens, spec.max_tokens);
        count("cdps", spec.min_cdps, spec.max_cdps);
        return random_system(rng, spec);
    }
    if (sc.contains("chains")) s.chains = strings_at(sc["chains"], "/chains");
    if (sc.contains("tokens")) {
        const json& tj = sc["tokens"];
        if (!tj.is_array()) schema("/tokens", "expected an array");
        for (std::size_t i = 0; i < tj.size(); ++i) {
            const std::string at = "/tokens/" + std::to_string(i);
            check_keys(tj[i], at, {"symbol", "chain", "price", "ceiling"});
            TokenSpec t;
            const json& sym = need(tj[i], "symbol", at);
            if (!sym.is_string()) schema(at + "/symbol", "expected a string");
            t.symbol = sym.get<std::string>();
            const json& ch = need(tj[i], "chain", at);
            if (!ch.is_string()) schema(at + "/chain", "expected a chain name");
            auto it = std::find(s.chains.begin(), s.chains.end(), ch.get<std::string>());
            if (it == s.chains.end()) schema(at + "/chain", "unknown chain '" + ch.get<std::string>() + "'");
            t.chain = static_cast<std::size_t>(it - s.chains.begin());
            t.price = wad_at(need(tj[i], "price", at), at + "/price");
            if (tj[i].contains("ceiling")) t.ceiling = wad_at(tj[i]["ceiling"], at + "/ceiling");
            s.tokens.push_back(t);
        }
    }
    if (sc.contains("cdps")) {
        const json& cj = sc["cdps"];
        if (!cj.is_array()) schema("/cdps", "expected an array");
        for (std::size_t i = 0; i < cj.size(); ++i) {
            const std::string at = "/cdps/" + std::to_string(i);
            check_keys(cj[i], at, {"token", "collateral", "debt"});
            CdpSpec c;
            const json& tok = need(cj[i], "token", at);
            if (!tok.is_string()) schema(at + "/token", "expected a token symbol");
            try {
                c.token = s.token_index(tok.get<std::string>());
            } catch (const Error& e) {
                schema(at + "/token", e.what());
            }
            c.collateral = amount_at(need(cj[i], "collateral", at), at + "/collateral");
            c.debt = amount_at(need(cj[i], "debt", at), at + "/debt");
            s.cdps.push_back(c);
        }
    }
    return s;
}

bool expected(const json& a, const std::string& at, Outcome got) {
    const std::string want = a.contains("expect") ? scalar(a["expect"], at + "/expect") : "holds";
    if (want != "holds" && want != "violated" && want != "precondition-failed")
        schema(at + "/expect", "expected holds, violated or precondition-failed");
    return want == to_string(got);
}

void run_attack(const json& a, const std::string& at, const System& s, ScenarioReport& rep) {
    const json& kind_j = need(a, "kind", at);
    if (!kind_j.is_string()) schema(at + "/kind", "expected a string");
    const std::string kind = kind_j.get<std::string>();
    if (kind == "token_crash") {
        check_keys(a, at, {"kind", "tokens", "expect"});
        std::vector<std::size_t> idx;
        const auto names = strings_at(need(a, "tokens", at), at + "/tokens");
        for (std::size_t i = 0; i < names.size(); ++i) {
            try {
                idx.push_back(s.token_index(names[i]));
            } catch (const Error& e) {
                schema(at + "/tokens/" + std::to_string(i), e.what());
            }
        }
        const auto r = token_crash_scenario(s, idx);
        const bool ok = expected(a, at, r.outcome);
        rep.pass = rep.pass && ok;
        json j = to_json(r);
        j["pass"] = ok;
        rep.results.push_back(j);
        rep.lines.push_back(to_text(r));
    } else if (kind == "compromised_chain") {
        check_keys(a, at, {"kind", "chains", "h_prime", "expect"});
        std::vector<std::size_t> idx;
        const auto names = strings_at(need(a, "chains", at), at + "/chains");
        for (std::size_t i = 0; i < names.size(); ++i) {
            try {
                idx.push_back(s.chain_index(names[i]));
            } catch (const Error& e) {
                schema(at + "/chains/" + std::to_string(i), e.what());
            }
        }
        Amount h = 0;
        if (a.contains("h_prime")) {
            if (a["h_prime"] == "max") {
                const auto m = max_h_prime(s, idx);
                h = m.value_or(0);
            } else {
                h = amount_at(a["h_prime"], at + "/h_prime");
            }
        }
        const auto r = compromised_chain_scenario(s, idx, h);
        const bool ok = expected(a, at, r.outcome);
        rep.pass = rep.pass && ok;
        json j = to_json(r);
        j["pass"] = ok;
        rep.results.push_back(j);
        rep.lines.push_back(to_text(r));
    } else if (kind == "corrupt_oracles") {
        check_keys(a, at, {"kind", "feeds", "corrupt", "sigma", "thresholds", "trials", "seed"});
        auto integer = [&](const char* key, std::int64_t def) {
            if (!a.contains(key)) return def;
            if (!a[key].is_number_integer()) schema(at + "/" + key, "expected an integer");
            return a[key].get<std::int64_t>();
        };
        const int feeds = static_cast<int>(integer("feeds", 5));
        const int corrupt = static_cast<int>(integer("corrupt", 2));
        const double sigma = a.contains("sigma") ? std::stod(scalar(a["sigma"], at + "/sigma")) : 1.0;
        std::vector<double> cs = {2, 3, 4, 5};
        if (a.contains("thresholds")) {
            if (!a["thresholds"].is_array()) schema(at + "/thresholds", "expected an array");
            cs.clear();
            for (const auto& c : a["thresholds"]) cs.push_back(std::stod(scalar(c, at + "/thresholds")));
        }
        const auto pts = oracle::tail_probability_experiment(feeds, corrupt, sigma, cs, integer("trials", 100'000),
                                                            static_cast<std::uint64_t>(integer("seed", 1)));
        bool ok = true;
        json arr = json::array();
        std::ostringstream line;
        line << "corrupt_oracles O=" << feeds << " corrupt=" << corrupt;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const bool below = pts[i].estimate <= pts[i].bound;
            const bool mono = i == 0 || pts[i].estimate < pts[i - 1].estimate || pts[i].estimate == 0.0;
            ok = ok && below && mono;
            arr.push_back({{"c", pts[i].c}, {"estimate", pts[i].estimate}, {"bound", pts[i].bound}});
            line << " c=" << pts[i].c << ":" << pts[i].estimate << (below ? "<=" : ">") << pts[i].bound;
        }
        line << (ok ? ": holds" : ": violated");
        rep.pass = rep.pass && ok;
        rep.results.push_back({{"kind", kind}, {"points", arr}, {"pass", ok}});
        rep.lines.push_back(line.str());
    } else {
        schema(at + "/kind", "unknown attack kind '" + kind + "'");
    }
}

void run_workload(const json& w, ScenarioReport& rep) {
    const std::string at = "/workload";
    check_keys(w, at, {"chains", "nodes", "f", "timeout", "transfers", "slots", "expect"});
    ledger::Ledger L;
    const json& cj = need(w, "chains", at);
    if (!cj.is_object()) schema(at + "/chains", "expected {chain: {account: amount}}");
    for (const auto& [name, accounts] : cj.items()) {
        if (!accounts.is_object()) schema(at + "/chains/" + name, "expected {account: amount}");
        ledger::ChainConfig cfg{name, {}};
        for (const auto& [acct, amt] : accounts.items())
            cfg.accounts.emplace_back(acct, amount_at(amt, at + "/chains/" + name + "/" + acct));
        L.create_chain(cfg);
    }
    std::vector<relay::NodeSpec> nodes;
    for (const auto& n : strings_at(need(w, "nodes", at), at + "/nodes")) {
        try {
            nodes.push_back(node_from_string(n));
        } catch (const Error& e) {
            schema(at + "/nodes", e.what());
        }
    }
    const int f = w.contains("f") ? w["f"].get<int>() : 1;
    const ledger::Slot timeout = w.contains("timeout") ? w["timeout"].get<ledger::Slot>() : 20;
    relay::Relay relay(nodes, f, timeout);

    struct Req { ledger::Slot slot; ledger::ChainId from, to; ledger::AccountId sender, recipient; Amount amount; };
    std::vector<Req> reqs;
    const json& tj = need(w, "transfers", at);
    if (!tj.is_array()) schema(at + "/transfers", "expected an array");
    for (std::size_t i = 0; i < tj.size(); ++i) {
        const std::string ta = at + "/transfers/" + std::to_string(i);
        check_keys(tj[i], ta, {"from", "to", "sender", "recipient", "amount", "slot"});
        auto chain = [&](const char* key) {
            const auto name = scalar(need(tj[i], key, ta), ta + "/" + key);
            auto id = L.find_chain(name);
            if (!id) schema(ta + "/" + key, "unknown chain '" + name + "'");
            return *id;
        };
        Req r{tj[i].value("slot", ledger::Slot{0}), chain("from"), chain("to"),
              L.account(scalar(need(tj[i], "sender", ta), ta + "/sender")),
              L.account(scalar(need(tj[i], "recipient", ta), ta + "/recipient")),
              amount_at(need(tj[i], "amount", ta), ta + "/amount")};
        reqs.push_back(r);
    }
    std::stable_sort(reqs.begin(), reqs.end(), [](const Req& a, const Req& b) { return a.slot < b.slot; });
    const ledger::Slot last = w.contains("slots") ? w["slots"].get<ledger::Slot>() : 2 * timeout + 2;

    const Amount before = L.total_circulating();
    std::size_t next = 0;
    for (ledger::Slot t = 0; t <= last; ++t) {
        while (next < reqs.size() && reqs[next].slot <= t) {
            const Req& r = reqs[next++];
            L.advance_to(std::max(t, L.now()));
            relay.request_transfer(L, r.from, r.sender, r.amount, r.to, r.recipient);
        }
        if (t > 0) relay.relay_step(L, t);
    }
    std::map<std::string, int> counts;
    bool terminal = true;
    for (const auto& [_, tr] : relay.transfers()) {
        ++counts[std::string(relay::to_string(tr.state))];
        terminal = terminal && (tr.state == relay::TransferState::Committed || tr.state == relay::TransferState::Aborted);
    }
    const bool conserved = L.total_circulating() == before;
    bool ok = terminal && conserved;
    if (w.contains("expect")) {
        const json& e = w["expect"];
        if (!e.is_object()) schema(at + "/expect", "expected {state: count}");
        for (const auto& [state, n] : e.items()) {
            auto it = counts.find(state);
            ok = ok && (it == counts.end() ? 0 : it->second) == n.get<int>();
        }
    }
    rep.pass = rep.pass && ok;
    json jc = json::object();
    for (const auto& [k, v] : counts) jc[k] = v;
    rep.results.push_back({{"kind", "workload"}, {"states", jc}, {"conserved", conserved}, {"terminal", terminal}, {"pass", ok}});
    std::ostringstream line;
    line << "workload:";
    for (const auto& [k, v] : counts) line << ' ' << k << '=' << v;
    line << (conserved ? " supply conserved" : " SUPPLY CHANGED") << (ok ? ": holds" : ": violated");
    rep.lines.push_back(line.str());
}

}  // namespace

ScenarioReport run_scenario(const json& sc) {
    check_keys(sc, "", {"seed", "gamma", "theta", "chains", "tokens", "cdps", "random", "attacks", "workload", "description"});
    ScenarioReport rep;
    Rng rng(sc.contains("seed") ? sc["seed"].get<std::uint64_t>() : 1);
    if (sc.contains("workload")) run_workload(sc["workload"], rep);
    if (sc.contains("attacks")) {
        const System s = system_from(sc, rng);
        const json& aj = sc["attacks"];
        if (!aj.is_array()) schema("/attacks", "expected an array");
        for (std::size_t i = 0; i < aj.size(); ++i) run_attack(aj[i], "/attacks/" + std::to_string(i), s, rep);
    }
    return rep;
}

ScenarioReport run_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::insufficient_data, "cannot open scenario '" + path + "'");
    json sc;
    try {
        sc = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(Errc::parse_error, path + ": byte " + std::to_string(e.byte) + ": malformed JSON");
    }
    return run_scenario(sc);
}

}  // namespace crocodai::scen
