// One PASS/FAIL/SKIP line per acceptance criterion. Exit status is 1 when any
// criterion fails.

#include "crocodai/ledger.hpp"
#include "crocodai/monte_carlo.hpp"
#include "crocodai/optimizer.hpp"
#include "crocodai/oracle.hpp"
#include "crocodai/relay.hpp"
#include "crocodai/risk_model.hpp"
#include "crocodai/scenarios.hpp"
#include "crocodai/vault.hpp"

#include <boost/math/distributions/normal.hpp>

#include <array>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

using namespace crocodai;

namespace {

struct Verdict {
    enum Kind { Pass, Fail, Skip } kind = Pass;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double x, int prec = 4) {
    std::ostringstream o;
    o.precision(prec);
    o << x;
    return o.str();
}

// ---- 1: attack bounds -------------------------------------------------------

Verdict theorem_suite() {
    const auto t0 = Clock::now();
    Rng rng(20240101);
    std::bernoulli_distribution coin(0.5);
    int crash = 0, chain = 0, violations = 0, draws = 0;
    while (crash < 1000 || chain < 1000) {
        if (++draws > 100'000) return {Verdict::Fail, "could not draw enough admissible instances"};
        const auto s = scen::random_system(rng);
        if (crash < 1000) {
            std::vector<std::size_t> tokens;
            Rational zeta = 0;
            for (std::size_t m = 0; m < s.tokens.size(); ++m)
                if (coin(rng) && zeta + s.tokens[m].ceiling.to_rational() < 1) {
                    tokens.push_back(m);
                    zeta += s.tokens[m].ceiling.to_rational();
                }
            const auto r = scen::token_crash_scenario(s, tokens);
            if (r.outcome != scen::Outcome::PreconditionFailed) {
                ++crash;
                violations += r.outcome == scen::Outcome::Violated;
            }
        }
        if (chain < 1000) {
            std::vector<std::size_t> chains;
            for (std::size_t c = 0; c < s.chains.size(); ++c)
                if (coin(rng)) chains.push_back(c);
            if (chains.empty() || chains.size() == s.chains.size()) continue;
            const auto h = scen::max_h_prime(s, chains);
            if (!h) continue;
            const Amount pick = std::uniform_int_distribution<Amount>(0, *h)(rng);
            const auto r = scen::compromised_chain_scenario(s, chains, pick);
            if (r.outcome == scen::Outcome::PreconditionFailed) continue;
            ++chain;
            violations += r.outcome == scen::Outcome::Violated || r.unbacked != pick;
        }
    }
    const double secs = seconds_since(t0);
    std::string d = "1000 token-crash + 1000 compromised-chain instances, " + std::to_string(violations) +
                    " violations, " + num(secs, 3) + " s";
    return {violations == 0 && secs < 10 ? Verdict::Pass : Verdict::Fail, d};
}

// ---- 2: relay safety and liveness -----------------------------------------------

Verdict relay_suite() {
    using namespace relay;
    const auto t0 = Clock::now();
    std::vector<std::pair<std::string, std::vector<NodeSpec>>> schedules;
    schedules.push_back({"all honest", std::vector<NodeSpec>(4)});
    const std::vector<std::optional<Slot>> crash_times = {std::nullopt, 1, 2, 3, 5, 10, 19};
    for (int node = 0; node < 4; ++node) {
        for (auto at : crash_times) {
            std::vector<NodeSpec> v(4);
            v[static_cast<std::size_t>(node)] = NodeSpec{Behavior::Crashed, Strategy::Refuse, at};
            schedules.push_back({"crash", v});
        }
        for (auto st : {Strategy::Equivocate, Strategy::Refuse, Strategy::Forge}) {
            std::vector<NodeSpec> v(4);
            v[static_cast<std::size_t>(node)] = NodeSpec{Behavior::Byzantine, st, std::nullopt};
            schedules.push_back({"byzantine", v});
        }
    }
    // three transfers; request slots and directions varied
    const std::vector<std::array<ledger::Slot, 3>> timings = {{0, 0, 0}, {0, 1, 2}, {0, 5, 12}, {3, 3, 7}};
    int runs = 0, lost = 0, slow = 0;
    for (const auto& [kind, nodes] : schedules) {
        for (const auto& when : timings) {
            ++runs;
            ledger::Ledger L;
            const auto a = L.create_chain({"A", {{"alice", 100 * kCoin}, {"carol", 100 * kCoin}}});
            const auto b = L.create_chain({"B", {{"bob", 100 * kCoin}}});
            const auto alice = L.account("alice"), bob = L.account("bob"), carol = L.account("carol");
            Relay r(nodes, 1, 20);
            struct Req { ledger::Slot at; ledger::ChainId from, to; ledger::AccountId s, d; Amount amt; };
            const std::array<Req, 3> reqs = {Req{when[0], a, b, alice, bob, 10 * kCoin},
                                             Req{when[1], b, a, bob, carol, 7 * kCoin},
                                             Req{when[2], a, b, carol, alice, 3 * kCoin}};
            const Amount supply = L.total_circulating();
            std::map<ledger::AccountId, Amount> start;
            for (auto who : {alice, bob, carol}) start[who] = L.chain(a).balance(who) + L.chain(b).balance(who);
            std::vector<ledger::TransferId> ids;
            std::size_t next = 0;
            for (ledger::Slot t = 0; t <= 60; ++t) {
                while (next < reqs.size() && reqs[next].at <= t) {
                    L.advance_to(std::max(t, L.now()));
                    const auto& q = reqs[next++];
                    ids.push_back(r.request_transfer(L, q.from, q.s, q.amt, q.to, q.d));
                }
                if (t > 0) r.relay_step(L, t);
            }
            // every transfer ends minted or refunded and balances add up
            std::map<ledger::AccountId, Amount> expect = start;
            bool ok = L.total_circulating() == supply;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                const auto& tr = r.transfer(ids[i]);
                if (tr.state == TransferState::Committed) {
                    expect[reqs[i].s] -= reqs[i].amt;
                    expect[reqs[i].d] += reqs[i].amt;
                } else if (tr.state != TransferState::Aborted) {
                    ok = false;
                }
                const bool crash_only = kind != "byzantine";
                if (crash_only && (tr.state != TransferState::Committed || !tr.finished || *tr.finished - tr.requested > 20))
                    ++slow;
            }
            for (auto who : {alice, bob, carol})
                ok = ok && expect[who] == L.chain(a).balance(who) + L.chain(b).balance(who);
            lost += !ok;
        }
    }
    const double secs = seconds_since(t0);
    std::string d = std::to_string(runs) + " executions (" + std::to_string(schedules.size()) + " fault schedules), " +
                    std::to_string(lost) + " lost funds, " + std::to_string(slow) + " late crash-only commits, " +
                    num(secs, 3) + " s";
    return {lost == 0 && slow == 0 && secs < 30 ? Verdict::Pass : Verdict::Fail, d};
}

// ---- 3: conservation ---------------------------------------------------------------

Verdict conservation_suite() {
    using namespace ledger;
    int workloads = 0, failures = 0, commits = 0, cdp_count = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        ++workloads;
        Rng rng(seed);
        auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
        auto amount = [&](std::int64_t max_coins) {
            return std::uniform_int_distribution<Amount>(1, max_coins * kCoin)(rng);
        };
        Ledger L;
        const std::vector<ChainId> chains = {L.create_chain({"A", {}}), L.create_chain({"B", {}}), L.create_chain({"C", {}})};
        std::vector<TokenId> tokens;
        for (std::size_t c = 0; c < chains.size(); ++c) tokens.push_back(L.register_token("T" + std::to_string(c), chains[c]));
        std::vector<AccountId> users;
        for (int u = 0; u < 5; ++u) users.push_back(L.account("u" + std::to_string(u)));
        vault::SystemParams params;
        params.stability_fee = Wad::parse("0.001");
        params.savings_rate = Wad::parse("0.0005");
        vault::Engine E(params);
        vault::PriceMap prices;
        for (auto t : tokens) prices[t] = Wad::from_int(1 + pick(50));
        relay::Relay R(std::vector<relay::NodeSpec>(4), 1);
        std::vector<CdpId> cdps;
        Slot now = 0;
        bool ok = true;
        for (int ev = 0; ev < 500 && ok; ++ev) {
            try {
                switch (pick(9)) {
                    case 0: {  // open and fund
                        const int t = pick(static_cast<int>(tokens.size()));
                        const auto id = E.open_cdp(L, chains[static_cast<std::size_t>(t)], users[static_cast<std::size_t>(pick(5))], tokens[static_cast<std::size_t>(t)]);
                        E.deposit_collateral(L, id, amount(1000));
                        cdps.push_back(id);
                        break;
                    }
                    case 1:
                    case 2:
                        if (!cdps.empty()) E.withdraw_stablecoins(L, cdps[static_cast<std::size_t>(pick(static_cast<int>(cdps.size())))], amount(500), prices);
                        break;
                    case 3:
                        if (!cdps.empty()) {
                            const auto id = cdps[static_cast<std::size_t>(pick(static_cast<int>(cdps.size())))];
                            const auto& c = E.cdp(id);
                            const Amount have = L.chain(c.chain).balance(c.owner);
                            const Amount owe = c.debt.floor_amount();
                            if (std::min(have, owe) > 0) E.repay_debt(L, id, std::uniform_int_distribution<Amount>(1, std::min(have, owe))(rng));
                        }
                        break;
                    case 4: {  // cross-chain transfer
                        const auto from = chains[static_cast<std::size_t>(pick(3))], to = chains[static_cast<std::size_t>(pick(3))];
                        const auto who = users[static_cast<std::size_t>(pick(5))];
                        const Amount bal = L.chain(from).balance(who);
                        if (from != to && bal > 0)
                            R.request_transfer(L, from, who, std::uniform_int_distribution<Amount>(1, bal)(rng), to, users[static_cast<std::size_t>(pick(5))]);
                        break;
                    }
                    case 5: {
                        now += 1 + pick(3);
                        R.relay_step(L, now);
                        E.accrue_stability_fee(1);
                        break;
                    }
                    case 6: {
                        const auto who = users[static_cast<std::size_t>(pick(5))];
                        const Amount bal = L.chain(E.savings_chain()).balance(who);
                        if (bal > 0) E.savings_deposit(L, who, std::uniform_int_distribution<Amount>(1, bal)(rng));
                        break;
                    }
                    case 7:
                        E.savings_accrue(L, 1 + pick(5));
                        break;
                    case 8: {
                        const auto who = users[static_cast<std::size_t>(pick(5))];
                        const Amount have = E.savings_balance(who);
                        if (have > 0) E.savings_withdraw(L, who, std::uniform_int_distribution<Amount>(1, have)(rng));
                        break;
                    }
                }
            } catch (const Error&) {
                // rejected operations leave state untouched; that is part of the property
            }
            // circulating <= debt + savings interest, exactly
            const BigInt circ = BigInt(L.total_circulating()) * BigInt(1'000'000'000);
            const BigInt cap = to_big(E.total_debt()) + BigInt(E.pot().interest_paid) * BigInt(1'000'000'000);
            ok = ok && circ <= cap;
        }
        // burn equals mint for every committed transfer
        R.relay_step(L, now + 1);
        Amount committed = 0, relay_mints = 0, burned = 0;
        for (const auto& [id, t] : R.transfers()) {
            if (t.state != relay::TransferState::Committed) continue;
            committed += t.amount;
            ++commits;
            bool found = false;
            for (const auto& e : L.chain(t.source).log())
                if (auto* b = std::get_if<event::EscrowBurn>(&e.payload); b && b->transfer == id) found = true;
            Amount opened = 0;
            for (const auto& e : L.chain(t.source).log())
                if (auto* o = std::get_if<event::EscrowOpen>(&e.payload); o && o->transfer == id) opened = o->amount;
            ok = ok && found && opened == t.amount;
            burned += opened;
        }
        cdp_count += static_cast<int>(E.cdps().size());
        for (auto c : chains)
            for (const auto& e : L.chain(c).log())
                if (auto* m = std::get_if<event::Mint>(&e.payload); m && m->ward == kRelayWard) relay_mints += m->amount;
        ok = ok && committed == relay_mints && burned == relay_mints;
        failures += !ok;
    }
    return {failures == 0 ? Verdict::Pass : Verdict::Fail,
            std::to_string(workloads) + " random 500-event workloads (" + std::to_string(commits) + " committed transfers, " +
                std::to_string(cdp_count) + " cdps), " + std::to_string(failures) + " violations"};
}

// ---- 4: numerical kernels ----------------------------------------------------------

Verdict numeric_suite() {
    const auto t0 = Clock::now();
    Rng rng(4);
    std::normal_distribution<double> z;
    double worst = 0;
    for (int n : {1, 2, 3, 5, 10, 20, 50, 100}) {
        for (int rep = 0; rep < 3; ++rep) {
            const int rank = rep == 2 ? std::max(1, n / 2) : n;
            Eigen::MatrixXd B(n, rank);
            for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = z(rng);
            const Eigen::MatrixXd A = B * B.transpose();
            const auto c = risk::cholesky(A, false);
            worst = std::max(worst, (c.L * c.L.transpose() - A).norm() / A.norm());
        }
    }
    Eigen::MatrixXd C(5, 5);
    const Eigen::VectorXd sd = (Eigen::VectorXd(5) << 0.01, 0.02, 0.015, 0.03, 0.005).finished();
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) C(i, j) = sd(i) * sd(j) * (i == j ? 1.0 : 0.5 + 0.05 * (i + j));
    double worst_cov = 0;
    for (auto dist : {risk::Distribution::Normal, risk::Distribution::StudentT}) {
        const auto m = risk::make_model({"A", "B", "C", "D", "E"}, Eigen::VectorXd::Zero(5), C, {6, 7, 8, 10, 30});
        Eigen::MatrixXd r;
        risk::Sampler(m, dist).sample(rng, r, 1'000'000);
        const Eigen::MatrixXd centred = r.colwise() - r.rowwise().mean();
        const Eigen::MatrixXd emp = centred * centred.transpose() / static_cast<double>(r.cols() - 1);
        worst_cov = std::max(worst_cov, (emp - C).norm() / C.norm());
    }
    const double secs = seconds_since(t0);
    const bool ok = worst < 1e-10 && worst_cov < 0.01 && secs < 60;
    return {ok ? Verdict::Pass : Verdict::Fail, "cholesky rel. error " + num(worst, 3) + ", sampler cov rel. error " +
                                                    num(worst_cov, 3) + " (normal and t), " + num(secs, 3) + " s"};
}

// ---- 5: optimizer -----------------------------------------------------------------

Verdict optimizer_suite() {
    const double s1 = 0.0004, s2 = 0.0009;
    const auto two = opt::min_variance({Eigen::Vector2d(s1, s2).asDiagonal(), Eigen::Vector2d(1, 1), {}});
    const double closed_err = std::abs(two.v(0) - s2 / (s1 + s2));
    Rng rng(5);
    std::normal_distribution<double> z;
    double worst_kkt = 0;
    int exceptions = 0;
    for (int k = 0; k < 100; ++k) {
        const int n = 2 + k % 10;
        Eigen::MatrixXd B(n, n + 2);
        for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = z(rng);
        const Eigen::MatrixXd C = B * B.transpose() * 1e-5;
        const double cap = std::max(1.0 / n + 0.05, 0.3 + 0.1 * (k % 5));
        opt::QpProblem p{C, Eigen::VectorXd::Constant(n, std::min(1.0, cap)), {}};
        const auto sol = opt::min_variance(p);
        worst_kkt = std::max(worst_kkt, sol.kkt);
        for (int j = 0; j < 1000; ++j) {
            const Eigen::VectorXd v = opt::random_feasible(p.upper, rng);
            exceptions += sol.objective > v.dot(C * v);
        }
    }
    const bool ok = closed_err < 1e-6 && worst_kkt < 1e-6 && exceptions == 0;
    return {ok ? Verdict::Pass : Verdict::Fail, "closed-form error " + num(closed_err, 3) + ", worst KKT " +
                                                    num(worst_kkt, 3) + ", " + std::to_string(exceptions) +
                                                    " dominance exceptions in 100x1000"};
}

// ---- 6: Monte Carlo ---------------------------------------------------------------

Verdict monte_carlo_suite() {
    const int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    const auto flat = risk::make_model({"A", "B"}, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Zero());
    mc::SimConfig zc{1.1, 288, 10'000, 1, jobs};
    const auto zero = mc::simulate_failure({"z", {"A", "B"}, {0.5, 0.5}}, flat, 1.2, risk::Distribution::Normal, zc);

    // one slot: S flat, X log-normal
    const double sigma = 0.15, mu = 0.001, v1 = 0.4, gp = 1.25, theta = 1.1;
    const auto toy = risk::make_model({"S", "X"}, Eigen::Vector2d(0, mu), Eigen::Vector2d(0, sigma * sigma).asDiagonal());
    mc::SimConfig sc{theta, 1, 100'000, 3, jobs};
    const auto e = mc::simulate_failure({"toy", {"S", "X"}, {v1, 1 - v1}}, toy, gp, risk::Distribution::Normal, sc);
    const double k = theta / gp;
    const double p = boost::math::cdf(boost::math::normal_distribution<>(), (std::log((k - v1) / (1 - v1)) - mu) / sigma);
    const double hw = 1.96 * std::sqrt(p * (1 - p) / 1e5);
    const bool oracle_ok = std::abs(e.p - p) <= 3 * hw;

    // gamma' monotone on shared draws
    const auto model = risk::make_model({"X"}, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, 1e-4), {4});
    const auto minima = mc::simulate_minima({"x", {"X"}, {1.0}}, model, risk::Distribution::StudentT, {1.1, 288, 20'000, 9, jobs});
    bool mono = true;
    double prev = 2;
    for (double g = 1.11; g <= 2.0; g += 0.01) {
        const double q = mc::estimate_from_minima(minima, g, 1.1).p;
        mono = mono && q <= prev;
        prev = q;
    }
    const bool ok = zero.failures == 0 && oracle_ok && mono;
    return {ok ? Verdict::Pass : Verdict::Fail, "zero-vol p=" + num(zero.p) + ", one-slot p=" + num(e.p) + " vs " +
                                                    num(p) + " (3 half-widths " + num(3 * hw, 3) + "), gamma' monotone " +
                                                    (mono ? "yes" : "no")};
}

// ---- 7: reference tables -----------------------------------------------------------

Verdict table_suite() {
    const char* env = std::getenv("CROCODAI_DATA");
    if (!env || !*env)
        return {Verdict::Skip, "CROCODAI_DATA not set; reference numbers need the original price data "
                               "(criteria 4-6 stand in)"};
    std::string path = env;
    if (std::filesystem::is_directory(path)) path = (std::filesystem::path(path) / "prices.csv").string();
    if (!std::filesystem::exists(path)) return {Verdict::Skip, path + " not found"};
    const auto t0 = Clock::now();
    const auto set = risk::ingest_prices_file(path);
    const int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    struct Target { const char* name; double g12, g13; };
    const Target targets[] = {{"BTC", 0.021, 0.003}, {"SOL", 0.228, 0.093}, {"D-All", 0.001, 0.000}, {"C-Mix2", 0.029, 0.003}};
    std::string d;
    bool ok = true;
    for (const auto& t : targets) {
        const auto p = scen::builtin_portfolio(t.name);
        const auto model = risk::estimate_model(p.assets, risk::log_returns(risk::aligned_prices(set, p.assets)));
        const auto table = mc::table_sweep({p}, {1.2, 1.3}, mc::Method::StudentT, {1.1, 288, 100'000, 7, jobs}, &model, nullptr);
        const double a = table.cells[0][0].p, b = table.cells[1][0].p;
        ok = ok && std::abs(a - t.g12) <= 0.01 && std::abs(b - t.g13) <= 0.01;
        d += std::string(t.name) + " " + num(a, 3) + "/" + num(b, 3) + " (" + num(t.g12, 3) + "/" + num(t.g13, 3) + "); ";
    }
    const auto hist = mc::historical_replay(scen::builtin_portfolio("BTC"), risk::aligned_prices(set, {"BTC"}), 1.3, 1.1, 288);
    ok = ok && std::abs(hist.p - 0.002) <= 0.005;
    d += "historical BTC 1.3 " + num(hist.p, 3) + " (0.002); " + num(seconds_since(t0), 3) + " s";
    return {ok ? Verdict::Pass : Verdict::Fail, d};
}

// ---- 8: cost model ---------------------------------------------------------------

Verdict cost_suite() {
    using relay::CostStrategy;
    auto cost = [](CostStrategy s, int n) { return relay::cost_of_commit(s, n, (n - 1) / 3); };
    const int ns[] = {4, 10, 16};
    bool ok = true;
    for (int i = 1; i < 3; ++i) {
        ok = ok && cost(CostStrategy::OneOf1, ns[i]).on_chain == cost(CostStrategy::OneOf1, ns[0]).on_chain;
        ok = ok && cost(CostStrategy::NofN, ns[i]).on_chain > cost(CostStrategy::NofN, ns[i - 1]).on_chain;
        ok = ok && cost(CostStrategy::Nof1, ns[i]).on_chain > cost(CostStrategy::Nof1, ns[i - 1]).on_chain;
    }
    const double nof1 = cost(CostStrategy::Nof1, 16).off_chain_time, one = cost(CostStrategy::OneOf1, 16).off_chain_time;
    ok = ok && nof1 * 100 < one;
    return {ok ? Verdict::Pass : Verdict::Fail, "1of1 on-chain constant, NofN/Nof1 increasing; off-chain at n=16: Nof1 " +
                                                    num(nof1, 3) + " s vs 1of1 " + num(one, 3) + " s"};
}

// ---- 9: oracle tail -----------------------------------------------------------------

Verdict oracle_suite() {
    const auto t0 = Clock::now();
    const auto pts = oracle::tail_probability_experiment(5, 2, 1.0, {2, 3, 4, 5}, 1'000'000, 9);
    bool mono = true, below = true;
    std::string d;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        mono = mono && (i == 0 || pts[i].estimate < pts[i - 1].estimate || pts[i].estimate == 0.0);
        below = below && pts[i].estimate <= pts[i].bound;
        d += "c=" + num(pts[i].c) + " " + num(pts[i].estimate, 3) + (pts[i].estimate <= pts[i].bound ? "<=" : ">") +
             num(pts[i].bound, 3) + "; ";
    }
    const double secs = seconds_since(t0);
    d += std::string(mono ? "decreasing" : "not decreasing") + ", " + num(secs, 3) + " s";
    return {mono && below && secs < 30 ? Verdict::Pass : Verdict::Fail, d};
}

}  // namespace

int main() {
    const std::vector<std::pair<int, std::function<Verdict()>>> suites = {
        {1, theorem_suite}, {2, relay_suite},  {3, conservation_suite}, {4, numeric_suite}, {5, optimizer_suite},
        {6, monte_carlo_suite}, {7, table_suite}, {8, cost_suite}, {9, oracle_suite}};
    bool failed = false;
    for (const auto& [id, run] : suites) {
        Verdict v;
        try {
            v = run();
        } catch (const std::exception& e) {
            v = {Verdict::Fail, std::string("threw: ") + e.what()};
        }
        const char* tag = v.kind == Verdict::Pass ? "PASS" : v.kind == Verdict::Fail ? "FAIL" : "SKIP";
        failed = failed || v.kind == Verdict::Fail;
        std::cout << "criterion " << id << ": " << tag << "  " << v.detail << std::endl;
    }
    return failed ? 1 : 0;
}
