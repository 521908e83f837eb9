#pragma once

// Built-in collateral portfolios, the token-crash and compromised-chain
// attack checkers (exact rational arithmetic) and the JSON scenario runner.

#include "crocodai/fixed_point.hpp"
#include "crocodai/monte_carlo.hpp"
#include "crocodai/relay.hpp"
#include "crocodai/rng.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace crocodai::scen {

/// Named multi-asset portfolios plus the single-asset ones (BTC, ETH, ...).
/// Optimized portfolios carry weights fitted on a dataset we may not have.
mc::Portfolio builtin_portfolio(const std::string& name);
std::vector<std::string> builtin_portfolio_names();
std::vector<std::string> single_asset_names();
bool dataset_dependent(const std::string& name);

/// Fiat- or commodity-pegged symbols, excluded from the "A" universe.
const std::vector<std::string>& pegged_symbols();

/// Token universes for the optimizer. "D" and "C" are fixed lists; "A" is
/// every available symbol that is not pegged.
std::vector<std::string> universe(const std::string& name, const std::vector<std::string>& available = {});

// ---- attack checkers -------------------------------------------------------

struct TokenSpec {
    std::string symbol;
    std::size_t chain = 0;   // index into System::chains
    Wad price;
    Wad ceiling = Wad::one();
};

struct CdpSpec {
    std::size_t token = 0;   // index into System::tokens
    Amount collateral = 0;
    Amount debt = 0;
};

/// Snapshot of a deployment at t=0: CDPs sit on their token's home chain.
struct System {
    Wad gamma = Wad::parse("1.5");
    Wad theta = Wad::parse("1.1");
    std::vector<std::string> chains;
    std::vector<TokenSpec> tokens;
    std::vector<CdpSpec> cdps;

    std::size_t token_index(const std::string& symbol) const;
    std::size_t chain_index(const std::string& name) const;
};

Rational collateral_value(const System& s, const std::vector<bool>& crashed = {});
Rational total_debt(const System& s);
Rational debt_of_tokens(const System& s, const std::vector<bool>& which);
/// C*/D*; requires D* > 0.
Rational aggregate_ratio(const System& s);

/// Empty when every CDP ratio exceeds gamma, D* > 0 and each token's debt
/// share is within its ceiling; otherwise the first violation.
std::optional<std::string> precondition_violation(const System& s);

struct RandomSpec {
    int min_chains = 2, max_chains = 4;
    int min_tokens = 2, max_tokens = 8;
    int min_cdps = 1, max_cdps = 30;
    Wad gamma = Wad::parse("1.5");
    Wad theta = Wad::parse("1.1");
};

/// CDP ratios uniform in (gamma, 3 gamma] (plus at most one minor unit of
/// collateral from rounding up), ceilings on a 0.001 grid with sum >= 1 and
/// debt shares drawn from Dirichlet(1), the whole instance redrawn until
/// every share is within its ceiling.
System random_system(Rng& rng, const RandomSpec& spec = {});

enum class Outcome { Holds, Violated, PreconditionFailed };
std::string_view to_string(Outcome o);

struct AttackReport {
    std::string kind;
    std::vector<std::string> affected;   // tokens or chains
    Rational zeta_prime;
    Rational bound;                      // gamma (1 - zeta')
    Rational ratio_before;
    std::optional<Rational> ratio_after;
    Amount h_prime = 0;
    Amount unbacked = 0;                 // measured after the attack
    bool full_backing_ok = false;        // ratio_after > theta
    Outcome outcome = Outcome::PreconditionFailed;
    std::string message;
};

nlohmann::json to_json(const AttackReport& r);
std::string to_text(const AttackReport& r);

/// Prices of `tokens` drop to zero at t=1.
AttackReport token_crash_scenario(const System& s, const std::vector<std::size_t>& tokens);

/// Largest h' with D-_0 + h' < zeta'/(1 - zeta') D+_0 for the tokens homed on
/// `chains`; empty when no h' >= 0 qualifies.
std::optional<Amount> max_h_prime(const System& s, const std::vector<std::size_t>& chains);

/// The attacker on each compromised chain escrows its stablecoins, lets the
/// relay commit the mint elsewhere and then forks the escrow away, repeating
/// (and relaying the minted coins back) until h' is unbacked.
AttackReport compromised_chain_scenario(const System& s, const std::vector<std::size_t>& chains, Amount h_prime);

// ---- scenario files --------------------------------------------------------

struct ScenarioReport {
    bool pass = true;
    nlohmann::json results = nlohmann::json::array();
    std::vector<std::string> lines;   // human-readable, one per result

    nlohmann::json to_json() const;
    std::string to_text() const;
};

/// Throws Errc::schema_error naming the JSON location of the first problem.
ScenarioReport run_scenario(const nlohmann::json& scenario);
/// Parse errors are reported as Errc::parse_error with the byte offset.
ScenarioReport run_scenario_file(const std::string& path);

/// "honest", "crashed", "crashed@<slot>", "byzantine:<equivocate|refuse|forge>"
relay::NodeSpec node_from_string(const std::string& text);

}  // namespace crocodai::scen
