#include "crocodai/relay.hpp"

#include <doctest.h>

using namespace crocodai;
using namespace crocodai::ledger;
using namespace crocodai::relay;

namespace {

Amount coins(std::int64_t n) { return n * kCoin; }

struct Net {
    Ledger l;
    ChainId a;
    ChainId b;
    AccountId alice;
    AccountId bob;

    Net() {
        a = l.create_chain({"alpha", {{"alice", coins(50)}}});
        b = l.create_chain({"beta", {}});
        alice = l.account("alice");
        bob = l.account("bob");
    }
};

std::vector<NodeSpec> nodes(std::initializer_list<NodeSpec> specs) { return specs; }

const NodeSpec H{Behavior::Honest, Strategy::Refuse, std::nullopt};
const NodeSpec C{Behavior::Crashed, Strategy::Refuse, std::nullopt};

NodeSpec byz(Strategy s) { return {Behavior::Byzantine, s, std::nullopt}; }

}  // namespace

TEST_CASE("request_transfer escrows the amount") {
    Net w;
    Relay r(nodes({H, H, H, H}), 1);
    const TransferId id = r.request_transfer(w.l, w.a, w.alice, coins(10), w.b, w.bob);
    CHECK(w.l.chain(w.a).balance(w.alice) == coins(40));
    CHECK(w.l.chain(w.a).escrowed() == coins(10));
    CHECK(r.transfer(id).state == TransferState::Escrowed);
    CHECK_THROWS_AS(r.request_transfer(w.l, w.a, w.alice, 0, w.b, w.bob), Error);
    CHECK_THROWS_AS(r.request_transfer(w.l, w.a, w.alice, coins(1), ChainId{9}, w.bob), Error);
    CHECK_THROWS_AS(r.request_transfer(w.l, w.a, w.alice, coins(41), w.b, w.bob), Error);
}

TEST_CASE("quorum of three commits and conserves supply") {
    Net w;
    Relay r(nodes({H, H, H, C}), 1);
    const TransferId id = r.request_transfer(w.l, w.a, w.alice, coins(10), w.b, w.bob);
    const Amount total = w.l.total_circulating();
    r.relay_step(w.l, 1);
    CHECK(r.transfer(id).state == TransferState::Committed);
    CHECK(r.transfer(id).commit_votes.size() == 3);
    CHECK(w.l.chain(w.a).supply() == coins(40));
    CHECK(w.l.chain(w.b).supply() == coins(10));
    CHECK(w.l.chain(w.b).balance(w.bob) == coins(10));
    CHECK(w.l.total_circulating() == total);
    r.relay_step(w.l, 2);
    CHECK(w.l.chain(w.b).supply() == coins(10));
}

TEST_CASE("two crashed nodes stall commit until the abort certificate refunds") {
    Net w;
    Relay r(nodes({H, H, C, C}), 1);
    const TransferId id = r.request_transfer(w.l, w.a, w.alice, coins(10), w.b, w.bob);
    for (Slot s = 1; s < 20; ++s) {
        r.relay_step(w.l, s);
        REQUIRE(r.transfer(id).state == TransferState::Escrowed);
    }
    r.relay_step(w.l, 20);
    CHECK(r.transfer(id).state == TransferState::Aborted);
    CHECK(w.l.chain(w.a).balance(w.alice) == coins(50));
    CHECK(w.l.chain(w.b).supply() == 0);
}

TEST_CASE("byzantine strategies cannot block or fake a commit") {
    for (Strategy s : {Strategy::Equivocate, Strategy::Refuse, Strategy::Forge}) {
        Net w;
        Relay r(nodes({byz(s), H, H, H}), 1);
        const TransferId id = r.request_transfer(w.l, w.a, w.alice, coins(10), w.b, w.bob);
        r.relay_step(w.l, 1);
        CHECK(r.transfer(id).state == TransferState::Committed);
        CHECK(w.l.chain(w.b).balance(w.bob) == coins(10));
    }
}

TEST_CASE("forged votes are rejected") {
    Relay r(nodes({byz(Strategy::Forge), H, H, H}), 1);
    CHECK_FALSE(r.submit_vote({0, 1, TransferId{1}, true}));
    CHECK_FALSE(r.submit_vote({7, 7, TransferId{1}, true}));

    // forger plus a crashed node leaves only two honest votes: no commit,
    // and the forger's claims for the crashed id never count
    Net w;
    Relay two(nodes({byz(Strategy::Forge), H, H, C}), 1);
    const TransferId id = two.request_transfer(w.l, w.a, w.alice, coins(5), w.b, w.bob);
    two.relay_step(w.l, 1);
    CHECK(two.transfer(id).state == TransferState::Escrowed);
    CHECK(two.transfer(id).commit_votes == std::set<int>{1, 2});
}

TEST_CASE("a node crashing after it voted does not undo its vote") {
    Net w;
    Relay r(nodes({H, H, NodeSpec{Behavior::Crashed, Strategy::Refuse, Slot{2}}, C}), 1);
    const TransferId first = r.request_transfer(w.l, w.a, w.alice, coins(5), w.b, w.bob);
    r.relay_step(w.l, 1);
    CHECK(r.transfer(first).state == TransferState::Committed);
    w.l.advance_to(2);
    const TransferId second = r.request_transfer(w.l, w.a, w.alice, coins(5), w.b, w.bob);
    r.relay_step(w.l, 3);
    CHECK(r.transfer(second).state == TransferState::Escrowed);
    r.relay_step(w.l, 22);
    CHECK(r.transfer(second).state == TransferState::Aborted);
}

TEST_CASE("reverting the source after commit leaves an unbacked mint") {
    Net w;
    Relay r(nodes({H, H, H, H}), 1);
    w.l.advance_to(3);
    const TransferId id = r.request_transfer(w.l, w.a, w.alice, coins(10), w.b, w.bob);
    r.relay_step(w.l, 4);
    REQUIRE(r.transfer(id).state == TransferState::Committed);
    const Amount before = w.l.total_circulating();
    w.l.set_compromised(w.a, true);
    w.l.fork_revert(w.a, 3);
    CHECK(w.l.chain(w.a).balance(w.alice) == coins(50));
    CHECK(w.l.total_circulating() - before == coins(10));
    const auto unbacked = r.unbacked_commits(w.l);
    REQUIRE(unbacked.size() == 1);
    CHECK(unbacked[0].second == coins(10));
}

TEST_CASE("revert before commit drops the request") {
    Net w;
    Relay r(nodes({H, H, C, C}), 1);
    w.l.advance_to(2);
    const TransferId id = r.request_transfer(w.l, w.a, w.alice, coins(10), w.b, w.bob);
    r.relay_step(w.l, 3);
    w.l.set_compromised(w.a, true);
    w.l.fork_revert(w.a, 2);
    r.relay_step(w.l, 4);
    CHECK(r.transfer(id).state == TransferState::Aborted);
    CHECK(w.l.chain(w.a).balance(w.alice) == coins(50));
    CHECK(r.unbacked_commits(w.l).empty());
}

TEST_CASE("governance") {
    Net w;
    vault::Engine engine;
    Relay r(nodes({H, H, H, H}), 1);
    GovernanceAction raise{1, GovKind::SetParam, "", "", "liquidation_ratio", "1.6"};

    CHECK_FALSE(r.submit_governance(w.l, raise, {0}, &engine));
    CHECK(r.submit_governance(w.l, raise, {0, 1, 2}, &engine));
    CHECK(engine.params().liquidation_ratio == Wad::parse("1.5"));
    r.relay_step(w.l, 0, &engine);
    CHECK(engine.params().liquidation_ratio == Wad::parse("1.5"));
    r.relay_step(w.l, 1, &engine);
    CHECK(engine.params().liquidation_ratio == Wad::parse("1.6"));

    try {
        r.submit_governance(w.l, raise, {0, 1, 2}, &engine);
        FAIL("expected stale nonce");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::stale_nonce);
    }
    r.relay_step(w.l, 2, &engine);
    CHECK(engine.params().liquidation_ratio == Wad::parse("1.6"));

    GovernanceAction bad{2, GovKind::SetParam, "", "", "liquidation_ratio", "1.05"};
    CHECK_THROWS_AS(r.submit_governance(w.l, bad, {0, 1, 2, 3}, &engine), Error);

    GovernanceAction ward{3, GovKind::AddWard, "beta", "minter", "", ""};
    CHECK(r.submit_governance(w.l, ward, {1, 2, 3}, &engine));
    GovernanceAction chain{4, GovKind::AddChain, "gamma", "", "", ""};
    CHECK(r.submit_governance(w.l, chain, {1, 2, 3}, &engine));
    GovernanceAction dep{5, GovKind::DeprecateContract, "beta", "", "", ""};
    CHECK(r.submit_governance(w.l, dep, {0, 1, 3}, &engine));
    r.relay_step(w.l, 3, &engine);
    CHECK(w.l.chain(w.b).is_ward(w.l.account("minter")));
    CHECK(w.l.find_chain("gamma").has_value());
    CHECK(r.deprecated(w.b));
    CHECK_THROWS_AS(r.request_transfer(w.l, w.a, w.alice, coins(1), w.b, w.bob), Error);
}

TEST_CASE("quorum arithmetic") {
    CHECK_THROWS_AS(Relay(nodes({H, H, H}), 1), Error);
    CHECK_THROWS_AS(cost_of_commit(CostStrategy::NofN, 3, 1), Error);
}

TEST_CASE("cost_of_commit") {
    const auto nofn = cost_of_commit(CostStrategy::NofN, 4, 1);
    CHECK(nofn.transactions == 3);
    CHECK(nofn.verifications == 3);
    const auto nof1 = cost_of_commit(CostStrategy::Nof1, 4, 1);
    CHECK(nof1.transactions == 1);
    CHECK(nof1.verifications == 3);
    CHECK(nof1.message_bytes == 195);
    const auto t4 = cost_of_commit(CostStrategy::OneOf1, 4, 1);
    const auto t16 = cost_of_commit(CostStrategy::OneOf1, 16, 5);
    CHECK(t4.verifications == 1);
    CHECK(t16.verifications == 1);
    CHECK(t4.message_bytes == 65);
    CHECK(t4.on_chain == t16.on_chain);

    double last_nofn = 0, last_nof1 = 0;
    for (auto [n, f] : {std::pair{4, 1}, {10, 3}, {16, 5}}) {
        const double a = cost_of_commit(CostStrategy::NofN, n, f).on_chain;
        const double b = cost_of_commit(CostStrategy::Nof1, n, f).on_chain;
        CHECK(a > last_nofn);
        CHECK(b > last_nof1);
        last_nofn = a;
        last_nof1 = b;
    }
    CHECK(cost_of_commit(CostStrategy::Nof1, 16, 5).off_chain_time < t16.off_chain_time);
}
