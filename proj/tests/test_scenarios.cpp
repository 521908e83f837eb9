#include "crocodai/scenarios.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>

using namespace crocodai;
using namespace crocodai::scen;

namespace {

// two tokens on two chains; every CDP at ratio gamma plus a hair
System two_chain(Wad gamma, Wad zeta_a, Amount debt_a, Amount debt_b) {
    System s;
    s.gamma = gamma;
    s.chains = {"A", "B"};
    s.tokens = {{"ETH", 0, Wad::from_int(2), zeta_a}, {"BTC", 1, Wad::from_int(5), Wad::one()}};
    auto coll = [&](Amount debt, Wad price) {
        const Rational units = gamma.to_rational() * amount_to_rational(debt) / price.to_rational() * Rational(kCoin);
        return static_cast<Amount>(boost::multiprecision::numerator(units) / boost::multiprecision::denominator(units)) + 1;
    };
    s.cdps = {{0, coll(debt_a, s.tokens[0].price), debt_a}, {1, coll(debt_b, s.tokens[1].price), debt_b}};
    return s;
}

}  // namespace

TEST_CASE("builtin portfolios") {
    const auto d = builtin_portfolio("D-All");
    CHECK(d.assets == std::vector<std::string>{"USDC", "ETH", "PAXG", "USDP", "USDT", "WBTC"});
    CHECK(d.weights[0] == doctest::Approx(0.47));
    CHECK(d.weights[5] == doctest::Approx(0.02));
    const auto c = builtin_portfolio("C-Mix2");
    CHECK(c.assets == std::vector<std::string>{"ETH", "WBTC", "ADA", "DOT", "TRX", "AVAX"});
    CHECK(c.weights[2] == doctest::Approx(0.15));
    for (const auto& n : builtin_portfolio_names()) {
        const auto p = builtin_portfolio(n);
        double s = 0;
        for (double w : p.weights) s += w;
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
    CHECK(builtin_portfolio("BTC").weights == std::vector<double>{1.0});
    CHECK(dataset_dependent("A-Opt"));
    CHECK_FALSE(dataset_dependent("D-All"));
    CHECK_THROWS_AS(builtin_portfolio("Z-Mix"), Error);
    const auto a = universe("A", {"BTC", "USDC", "ETH", "PAXG"});
    CHECK(a == std::vector<std::string>{"BTC", "ETH"});
}

TEST_CASE("token crash examples") {
    // gamma 1.5, zeta' 0.2, ratios just above 1.5: post-crash ratio > 1.2
    const auto s = two_chain(Wad::parse("1.5"), Wad::parse("0.2"), 20 * kCoin, 80 * kCoin);
    const auto r = token_crash_scenario(s, {0});
    CHECK(r.outcome == Outcome::Holds);
    CHECK(*r.ratio_after > Rational(6, 5));
    CHECK(r.bound == Rational(6, 5));

    const auto none = token_crash_scenario(s, {});
    CHECK(none.zeta_prime == 0);
    CHECK(*none.ratio_after == none.ratio_before);
    CHECK(*none.ratio_after > Rational(3, 2));

    // theta just under the bound: full backing still holds
    System t = s;
    t.theta = Wad::parse("1.19");
    CHECK(token_crash_scenario(t, {0}).full_backing_ok);

    // CDP under gamma: precondition reported, not asserted
    System bad = s;
    bad.cdps[0].collateral /= 2;
    CHECK(token_crash_scenario(bad, {0}).outcome == Outcome::PreconditionFailed);
    // ceiling broken
    CHECK(token_crash_scenario(two_chain(Wad::parse("1.5"), Wad::parse("0.1"), 20 * kCoin, 80 * kCoin), {0}).outcome ==
          Outcome::PreconditionFailed);
}

TEST_CASE("compromised chain examples") {
    // gamma 1.5, zeta' 0.3: maximal h' still leaves ratio > 1.05
    const auto s = two_chain(Wad::parse("1.5"), Wad::parse("0.3"), 20 * kCoin, 80 * kCoin);
    const auto h = max_h_prime(s, {0});
    REQUIRE(h);
    // D- + h' < 3/7 * 80
    CHECK(amount_to_rational(*h) < Rational(240, 7) - 20);
    CHECK(amount_to_rational(*h + 1) >= Rational(240, 7) - 20);
    const auto r = compromised_chain_scenario(s, {0}, *h);
    CHECK(r.outcome == Outcome::Holds);
    CHECK(r.unbacked == *h);
    CHECK(r.message.empty());
    CHECK(*r.ratio_after > Rational(105, 100));

    const auto zero = compromised_chain_scenario(s, {0}, 0);
    CHECK(zero.unbacked == 0);
    CHECK(*zero.ratio_after > Rational(3, 2));

    const auto over = compromised_chain_scenario(s, {0}, *h + 1);
    CHECK(over.outcome == Outcome::PreconditionFailed);
    CHECK_FALSE(over.ratio_after);
}

TEST_CASE("two compromised chains use the summed ceilings") {
    System s = two_chain(Wad::parse("1.5"), Wad::parse("0.2"), 10 * kCoin, 60 * kCoin);
    s.chains.push_back("C");
    s.tokens.push_back({"SOL", 2, Wad::from_int(3), Wad::parse("0.25")});
    s.cdps.push_back({2, 10 * kCoin, 15 * kCoin});  // ratio 2
    s.cdps.push_back({1, 16 * kCoin, 15 * kCoin});  // ratio 5.33
    REQUIRE_FALSE(precondition_violation(s));
    const auto h = max_h_prime(s, {0, 2});
    REQUIRE(h);
    const auto r = compromised_chain_scenario(s, {0, 2}, *h);
    CHECK(r.zeta_prime == Rational(45, 100));
    CHECK(r.unbacked == *h);
    CHECK(r.outcome == Outcome::Holds);
    CHECK(compromised_chain_scenario(s, {0, 1, 2}, 0).outcome == Outcome::PreconditionFailed);
}

TEST_CASE("aggregate ratio of CDPs above gamma stays above gamma") {
    Rng rng(11);
    for (int i = 0; i < 300; ++i) {
        const auto s = random_system(rng);
        CHECK_FALSE(precondition_violation(s));
        CHECK(aggregate_ratio(s) > s.gamma.to_rational());
    }
}

TEST_CASE("random instances respect both bounds") {
    Rng rng(5);
    std::uniform_int_distribution<int> coin(0, 1);
    int crash_checked = 0, chain_checked = 0;
    for (int i = 0; i < 200; ++i) {
        const auto s = random_system(rng);
        // random subset whose ceilings sum below 1
        std::vector<std::size_t> tokens;
        Rational zeta = 0;
        for (std::size_t m = 0; m < s.tokens.size(); ++m)
            if (coin(rng) && zeta + s.tokens[m].ceiling.to_rational() < 1) {
                tokens.push_back(m);
                zeta += s.tokens[m].ceiling.to_rational();
            }
        const auto r = token_crash_scenario(s, tokens);
        if (r.outcome != Outcome::PreconditionFailed) {
            ++crash_checked;
            CHECK(r.outcome == Outcome::Holds);
        }
        const std::vector<std::size_t> chains{0};
        if (const auto h = max_h_prime(s, chains)) {
            const Amount pick = std::uniform_int_distribution<Amount>(0, *h)(rng);
            const auto c = compromised_chain_scenario(s, chains, pick);
            if (c.outcome != Outcome::PreconditionFailed) {
                ++chain_checked;
                CHECK(c.outcome == Outcome::Holds);
                CHECK(c.unbacked == pick);
            }
        }
    }
    CHECK(crash_checked == 200);
    CHECK(chain_checked > 100);
}

TEST_CASE("scenarios are deterministic under a seed") {
    Rng a(99), b(99);
    const auto s = random_system(a), t = random_system(b);
    CHECK(aggregate_ratio(s) == aggregate_ratio(t));
    CHECK(to_json(token_crash_scenario(s, {0})) == to_json(token_crash_scenario(t, {0})));
}

TEST_CASE("scenario json") {
    CHECK(run_scenario(nlohmann::json::object()).pass);
    CHECK(run_scenario(nlohmann::json::object()).results.empty());

    const auto crash = nlohmann::json::parse(R"({
      "gamma": "1.5",
      "chains": ["A", "B"],
      "tokens": [{"symbol": "ETH", "chain": "A", "price": "2", "ceiling": "0.3"},
                 {"symbol": "BTC", "chain": "B", "price": "5"}],
      "cdps": [{"token": "ETH", "collateral": "15.01", "debt": "20"},
               {"token": "BTC", "collateral": "24.01", "debt": "80"}],
      "attacks": [{"kind": "token_crash", "tokens": ["ETH"]},
                  {"kind": "compromised_chain", "chains": ["A"], "h_prime": "max"}]
    })");
    const auto rep = run_scenario(crash);
    CHECK(rep.pass);
    REQUIRE(rep.results.size() == 2);
    CHECK(rep.results[0]["outcome"] == "holds");
    CHECK(rep.to_text().find("token_crash [ETH]") != std::string::npos);

    auto bad = crash;
    bad["attacks"][1]["kind"] = "meteor";
    try {
        run_scenario(bad);
        FAIL("expected schema error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::schema_error);
        CHECK(std::string(e.what()).find("/attacks/1/kind") != std::string::npos);
    }
    bad = crash;
    bad["cdps"][0]["debt"] = "lots";
    CHECK_THROWS_WITH_AS(run_scenario(bad), doctest::Contains("/cdps/0/debt"), Error);

    const std::string path = "malformed_scenario.json";
    std::ofstream(path) << "{\"attacks\": [";
    try {
        run_scenario_file(path);
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::parse_error);
        CHECK(std::string(e.what()).find("byte") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("workload through the relay") {
    const auto sc = nlohmann::json::parse(R"({
      "workload": {
        "chains": {"A": {"alice": "50"}, "B": {"bob": "10"}},
        "nodes": ["honest", "honest", "crashed", "crashed"],
        "transfers": [{"from": "A", "to": "B", "sender": "alice", "recipient": "bob", "amount": "5", "slot": 0}],
        "expect": {"aborted": 1}
      }
    })");
    CHECK(run_scenario(sc).pass);
    auto live = sc;
    live["workload"]["nodes"] = {"honest", "honest", "honest", "crashed"};
    CHECK_FALSE(run_scenario(live).pass);
    live["workload"]["expect"] = {{"committed", 1}};
    CHECK(run_scenario(live).pass);
    CHECK(node_from_string("byzantine:forge").strategy == relay::Strategy::Forge);
    CHECK(node_from_string("crashed@4").crash_at == 4);
    CHECK_THROWS_AS(node_from_string("sleepy"), Error);
}
