#include "crocodai/vault.hpp"

#include <doctest.h>

#include <random>

using namespace crocodai;
using namespace crocodai::ledger;
using namespace crocodai::vault;

namespace {

Amount coins(std::int64_t n) { return n * kCoin; }
Amount amt(const char* s) { return parse_amount(s); }

struct World {
    Ledger l;
    ChainId eth;
    ChainId other;
    TokenId ETH;
    TokenId BTC;
    AccountId alice;
    AccountId bob;
    Engine e;
    PriceMap prices;

    explicit World(SystemParams p = {}) : e(std::move(p)) {
        eth = l.create_chain({"eth", {{"bob", coins(1000)}}});
        other = l.create_chain({"btc", {}});
        ETH = l.register_token("ETH", eth);
        BTC = l.register_token("BTC", eth);
        alice = l.account("alice");
        bob = l.account("bob");
        prices[ETH] = Wad::from_int(1);
        prices[BTC] = Wad::from_int(1);
    }

    CdpId funded(Amount collateral, TokenId t) {
        const CdpId id = e.open_cdp(l, eth, alice, t);
        e.deposit_collateral(l, id, collateral);
        return id;
    }
};

SystemParams with_penalty(const char* p, const char* step = "0.03") {
    SystemParams s;
    s.liquidation_penalty = Wad::parse(p);
    s.min_bid_step = Wad::parse(step);
    return s;
}

}  // namespace

TEST_CASE("open_cdp") {
    World w;
    const CdpId a = w.e.open_cdp(w.l, w.eth, w.alice, w.ETH);
    const CdpId b = w.e.open_cdp(w.l, w.eth, w.alice, w.ETH);
    CHECK(a != b);
    CHECK(w.e.cdp(a).collateral == 0);
    CHECK(w.e.cdp(a).debt == Wad::zero());
    CHECK(w.e.cdp(a).state == CdpState::Open);
    CHECK_THROWS_AS(w.e.open_cdp(w.l, w.other, w.alice, w.ETH), Error);
}

TEST_CASE("withdraw_stablecoins is strict at the liquidation ratio") {
    World w;
    const CdpId id = w.funded(coins(150), w.ETH);
    CHECK_THROWS_AS(w.e.withdraw_stablecoins(w.l, id, coins(100), w.prices), Error);
    CHECK(w.e.withdraw_stablecoins(w.l, id, amt("99.99"), w.prices) == amt("99.99"));
    CHECK(w.l.chain(w.eth).balance(w.alice) == amt("99.99"));
    CHECK(w.e.withdraw_stablecoins(w.l, id, 0, w.prices) == 0);
    CHECK(w.e.issued() == amt("99.99"));
}

TEST_CASE("debt ceiling bounds a token's share of system debt") {
    SystemParams p;
    World probe;
    p.debt_ceiling[probe.BTC] = Wad::parse("0.5");
    World w(p);
    const CdpId eth_cdp = w.funded(coins(1000), w.ETH);
    w.e.withdraw_stablecoins(w.l, eth_cdp, coins(100), w.prices);
    const CdpId btc_cdp = w.funded(coins(1000), w.BTC);

    // D_m < zeta (D_m + D_other) with zeta 0.5 gives D_m < 100
    try {
        w.e.withdraw_stablecoins(w.l, btc_cdp, coins(120), w.prices);
        FAIL("expected ceiling rejection");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::debt_ceiling);
    }
    CHECK_THROWS_AS(w.e.withdraw_stablecoins(w.l, btc_cdp, coins(100), w.prices), Error);
    CHECK(w.e.withdraw_stablecoins(w.l, btc_cdp, coins(99), w.prices) == coins(99));
}

TEST_CASE("first mint of a capped token uses the bootstrap ceiling") {
    SystemParams p;
    World probe;
    p.debt_ceiling[probe.ETH] = Wad::parse("0.5");
    p.bootstrap_ceiling = Wad::from_int(50);
    World w(p);
    const CdpId id = w.funded(coins(1000), w.ETH);
    CHECK_THROWS_AS(w.e.withdraw_stablecoins(w.l, id, coins(51), w.prices), Error);
    CHECK(w.e.withdraw_stablecoins(w.l, id, coins(50), w.prices) == coins(50));
    // after that the fractional rule applies and ETH holds all debt
    CHECK_THROWS_AS(w.e.withdraw_stablecoins(w.l, id, coins(1), w.prices), Error);
}

TEST_CASE("repay_debt and close") {
    World w;
    const CdpId id = w.funded(coins(300), w.ETH);
    w.e.withdraw_stablecoins(w.l, id, coins(50), w.prices);
    CHECK_THROWS_AS(w.e.repay_debt(w.l, id, coins(60)), Error);
    CHECK_THROWS_AS(w.e.close_cdp(w.l, id), Error);
    w.e.repay_debt(w.l, id, coins(50));
    CHECK(w.e.cdp(id).debt == Wad::zero());
    CHECK(w.l.chain(w.eth).balance(w.alice) == 0);
    w.e.deposit_collateral(w.l, id, 0);
    w.e.withdraw_collateral(w.l, id, coins(300), w.prices);
    w.e.close_cdp(w.l, id);
    CHECK(w.e.cdp(id).state == CdpState::Closed);
    CHECK_THROWS_AS(w.e.deposit_collateral(w.l, id, coins(1)), Error);
}

TEST_CASE("withdraw_collateral keeps the ratio strictly above gamma") {
    World w;
    const CdpId id = w.funded(coins(300), w.ETH);
    w.e.withdraw_stablecoins(w.l, id, coins(100), w.prices);
    CHECK_THROWS_AS(w.e.withdraw_collateral(w.l, id, coins(150), w.prices), Error);
    w.e.withdraw_collateral(w.l, id, coins(149), w.prices);
    CHECK(w.e.cdp(id).collateral == coins(151));
    CHECK(w.l.chain(w.eth).locked_collateral(id) == coins(151));
}

TEST_CASE("accrue_stability_fee compounds per slot") {
    SystemParams p;
    p.stability_fee = Wad::parse("0.01");
    World w(p);
    const CdpId id = w.funded(coins(1000), w.ETH);
    const CdpId empty = w.funded(coins(10), w.ETH);
    w.e.withdraw_stablecoins(w.l, id, coins(100), w.prices);
    w.e.accrue_stability_fee(2);
    CHECK(w.e.cdp(id).debt == Wad::parse("102.01"));
    CHECK(w.e.cdp(empty).debt == Wad::zero());
    CHECK(w.e.pot().surplus == Wad::parse("2.01"));

    World z;
    const CdpId zid = z.funded(coins(1000), z.ETH);
    z.e.withdraw_stablecoins(z.l, zid, coins(100), z.prices);
    z.e.accrue_stability_fee(50);
    CHECK(z.e.cdp(zid).debt == Wad::from_int(100));
}

TEST_CASE("fee accrual never shrinks the liquidatable set") {
    SystemParams p;
    p.stability_fee = Wad::parse("0.003");
    World w(p);
    std::mt19937_64 rng(5);
    std::vector<CdpId> ids;
    for (int i = 0; i < 40; ++i) {
        const CdpId id = w.funded(coins(1000), w.ETH);
        w.e.withdraw_stablecoins(w.l, id, coins(300 + static_cast<std::int64_t>(rng() % 360)), w.prices);
        ids.push_back(id);
    }
    std::vector<bool> before;
    for (auto id : ids) before.push_back(w.e.check_liquidatable(id, Wad::parse("0.9")));
    w.e.accrue_stability_fee(30);
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (before[i]) CHECK(w.e.check_liquidatable(ids[i], Wad::parse("0.9")));
}

TEST_CASE("check_liquidatable") {
    World w;
    const CdpId id = w.funded(coins(1), w.ETH);
    CHECK_FALSE(w.e.check_liquidatable(id, Wad::from_int(149)));
    w.e.withdraw_stablecoins(w.l, id, coins(99), w.prices.empty() ? w.prices : PriceMap{{w.ETH, Wad::from_int(1000)}});
    w.e.repay_debt(w.l, id, coins(99));
    CHECK_FALSE(w.e.check_liquidatable(id, Wad::from_int(1)));
    w.e.withdraw_stablecoins(w.l, id, coins(100), PriceMap{{w.ETH, Wad::from_int(1000)}});
    CHECK(w.e.check_liquidatable(id, Wad::from_int(149)));
    CHECK(w.e.check_liquidatable(id, Wad::from_int(150)));
    CHECK_FALSE(w.e.check_liquidatable(id, Wad::from_int(151)));
}

TEST_CASE("auction settlement splits the winning bid") {
    World w(with_penalty("0.1"));
    const CdpId id = w.funded(coins(1), w.ETH);
    w.e.withdraw_stablecoins(w.l, id, coins(100), PriceMap{{w.ETH, Wad::from_int(200)}});
    const PriceMap crashed{{w.ETH, Wad::from_int(140)}};
    w.e.start_auction(w.l, id, crashed);
    CHECK(w.e.cdp(id).state == CdpState::InAuction);
    w.e.place_bid(w.l, id, w.bob, coins(125));
    CHECK_THROWS_AS(w.e.settle_auction(w.l, id), Error);
    w.l.advance_to(100);
    const Amount before = w.l.total_circulating();
    const Settlement s = w.e.settle_auction(w.l, id);
    CHECK(s.burned == coins(100));
    CHECK(s.to_surplus == coins(10));
    CHECK(s.owner_refund == coins(15));
    CHECK(s.burned + s.to_surplus + s.owner_refund == coins(125));
    CHECK(s.collateral_to_winner == coins(1));
    CHECK(s.outcome == CdpState::Closed);
    CHECK(w.l.chain(w.eth).balance(w.alice) == coins(115));
    CHECK(w.l.chain(w.eth).balance(w.bob) == coins(875));
    CHECK(w.l.total_circulating() == before - coins(110));
    CHECK(w.e.pot().surplus == Wad::from_int(10));
    CHECK(w.e.cdp(id).debt == Wad::zero());
}

TEST_CASE("bids must clear the minimum step") {
    World w(with_penalty("0.1", "0.05"));
    const CdpId id = w.funded(coins(1), w.ETH);
    w.e.withdraw_stablecoins(w.l, id, coins(100), PriceMap{{w.ETH, Wad::from_int(200)}});
    w.e.start_auction(w.l, id, PriceMap{{w.ETH, Wad::from_int(100)}});
    const AccountId carol = w.l.account("carol");
    w.l.transfer_local(w.eth, w.bob, carol, coins(200));
    w.e.place_bid(w.l, id, w.bob, coins(100));
    CHECK_THROWS_AS(w.e.place_bid(w.l, id, carol, coins(104)), Error);
    w.e.place_bid(w.l, id, carol, coins(105));
    CHECK(w.l.chain(w.eth).balance(w.bob) == coins(800));
    CHECK(w.l.chain(w.eth).balance(carol) == coins(95));
    CHECK_THROWS_AS(w.e.place_bid(w.l, id, carol, coins(1000)), Error);
    w.l.advance_to(12);
    CHECK_THROWS_AS(w.e.place_bid(w.l, id, w.bob, coins(200)), Error);
}

TEST_CASE("auction without bids leaves the cdp insolvent") {
    World w;
    const CdpId id = w.funded(coins(1), w.ETH);
    w.e.withdraw_stablecoins(w.l, id, coins(100), PriceMap{{w.ETH, Wad::from_int(200)}});
    CHECK_THROWS_AS(w.e.start_auction(w.l, id, PriceMap{{w.ETH, Wad::from_int(200)}}), Error);
    w.e.start_auction(w.l, id, PriceMap{{w.ETH, Wad::from_int(100)}});
    w.l.advance_to(w.e.params().auction_duration);
    const Settlement s = w.e.settle_auction(w.l, id);
    CHECK(s.outcome == CdpState::Insolvent);
    CHECK(w.e.cdp(id).debt == Wad::from_int(100));
    CHECK(w.e.notes().size() == 1);
}

TEST_CASE("savings pot pays interest out of surplus") {
    SystemParams p;
    p.savings_rate = Wad::parse("0.01");
    p.stability_fee = Wad::parse("0.5");

    SUBCASE("ample surplus") {
        World w(p);
        const CdpId id = w.funded(coins(1000), w.ETH);
        w.e.withdraw_stablecoins(w.l, id, coins(200), w.prices);
        w.e.accrue_stability_fee(1);  // surplus 100
        w.e.savings_deposit(w.l, w.bob, coins(100));
        w.e.savings_accrue(w.l, 1);
        CHECK(w.e.savings_balance(w.bob) == coins(101));
        CHECK_THROWS_AS(w.e.savings_withdraw(w.l, w.bob, coins(102)), Error);
        w.e.savings_withdraw(w.l, w.bob, coins(101));
        CHECK(w.l.chain(w.eth).balance(w.bob) == coins(1001));
        CHECK(w.e.pot().surplus == Wad::from_int(99));
    }
    SUBCASE("no surplus") {
        World w(p);
        w.e.savings_deposit(w.l, w.bob, coins(100));
        w.e.savings_accrue(w.l, 1);
        CHECK(w.e.savings_balance(w.bob) == coins(100));
    }
    SUBCASE("partial surplus is paid pro rata") {
        World w(p);
        const CdpId id = w.funded(coins(1000), w.ETH);
        w.e.withdraw_stablecoins(w.l, id, coins(1), w.prices);
        w.e.accrue_stability_fee(1);  // surplus 0.5
        w.e.savings_deposit(w.l, w.bob, coins(100));
        w.e.savings_accrue(w.l, 1);  // owed 1.0
        CHECK(w.e.savings_balance(w.bob) == amt("100.5"));
        CHECK(w.e.pot().surplus == Wad::zero());
    }
}

TEST_CASE("full_backing") {
    SystemParams p;
    World w;
    CHECK(w.e.full_backing(w.prices).ok);
    CHECK_FALSE(w.e.full_backing(w.prices).ratio.has_value());

    const CdpId id = w.funded(coins(1), w.ETH);
    w.e.withdraw_stablecoins(w.l, id, coins(100), PriceMap{{w.ETH, Wad::from_int(200)}});
    const FullBacking fine = w.e.full_backing(PriceMap{{w.ETH, Wad::from_int(150)}});
    CHECK(fine.ok);
    CHECK(*fine.ratio == Rational(3, 2));
    const FullBacking low = w.e.full_backing(PriceMap{{w.ETH, Wad::from_int(109)}});
    CHECK_FALSE(low.ok);
    CHECK_FALSE(w.e.full_backing(PriceMap{{w.ETH, Wad::from_int(110)}}).ok);
}

TEST_CASE("parameter updates are validated") {
    SystemParams p;
    CHECK(p.with("liquidation_ratio", "2").liquidation_ratio == Wad::from_int(2));
    CHECK_THROWS_AS(p.with("liquidation_ratio", "1.05"), Error);
    CHECK_THROWS_AS(p.with("debt_ceiling.0", "1.2"), Error);
    CHECK_THROWS_AS(p.with("relay_faults", "2"), Error);
    CHECK_THROWS_AS(p.with("nonsense", "1"), Error);
    const auto j = to_json(p.with("debt_ceiling.3", "0.25"));
    const SystemParams back = params_from_json(j);
    CHECK(back.ceiling(TokenId{3}) == Wad::parse("0.25"));
    CHECK(back.liquidation_ratio == p.liquidation_ratio);
}
