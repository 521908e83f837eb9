#include "crocodai/oracle.hpp"

#include <doctest.h>

#include <boost/math/distributions/normal.hpp>

#include <cmath>

using namespace crocodai;
using namespace crocodai::oracle;

namespace {

// With k honest N(0,1) reports and the remaining minority pinned far above,
// the median is the (O/2+1)-th smallest of all O values, which is the
// (O/2+1)-th honest order statistic. For O=5, corrupt=2 that is the maximum.
double exact_max_of_three_exceeds(double c) {
    boost::math::normal n;
    const double up = boost::math::cdf(n, c);
    const double down = boost::math::cdf(n, -c);
    return 1.0 - up * up * up + down * down * down;
}

}  // namespace

TEST_CASE("report_price") {
    Rng rng(1);
    Feed honest;
    honest.noise = {0.0, 1e-300};
    CHECK(report_price(honest, TokenId{0}, 42.0, rng).value() == doctest::Approx(42.0));

    Feed target;
    target.corruption = Corruption::FixedTarget;
    target.corruption_value = 0.0;
    CHECK(report_price(target, TokenId{0}, 1234.0, rng).value() == 0.0);

    Feed offset;
    offset.corruption = Corruption::ConstantOffset;
    offset.corruption_value = -5000.0;
    CHECK(report_price(offset, TokenId{0}, 10.0, rng).value() == 0.0);

    Feed silent;
    silent.corruption = Corruption::Silent;
    CHECK_FALSE(report_price(silent, TokenId{0}, 10.0, rng).has_value());

    Feed noisy;
    noisy.noise = {0.5, 4.0};
    Rng a(77), b(77);
    CHECK(report_price(noisy, TokenId{0}, 100.0, a) == report_price(noisy, TokenId{0}, 100.0, b));

    CHECK_THROWS_AS(report_price(honest, TokenId{0}, 0.0, rng), Error);
}

TEST_CASE("medianize") {
    CHECK(medianize(TokenId{0}, 0, {0.9, 1.0, 1.1, 100, 100}).price == 1.1);
    CHECK(medianize(TokenId{0}, 0, {1.0}).price == 1.0);
    CHECK(medianize(TokenId{0}, 0, {2.0, 1.0}).price == 1.5);
    CHECK(medianize(TokenId{0}, 0, {4.0, 1.0, 3.0, 2.0}).feeds == 4);
    try {
        medianize(TokenId{0}, 0, {});
        FAIL("expected stale price");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::stale_price);
    }
}

TEST_CASE("median stays inside the honest range with a corrupt minority") {
    Rng rng(3);
    std::vector<Feed> feeds(7);
    for (auto& f : feeds) f.noise = {0.0, 25.0};
    feeds[0].corruption = Corruption::FixedTarget;
    feeds[0].corruption_value = 1e9;
    feeds[1].corruption = Corruption::ConstantOffset;
    feeds[1].corruption_value = -80.0;
    feeds[2].corruption = Corruption::Silent;
    for (int i = 0; i < 5000; ++i) {
        std::vector<double> honest, all;
        for (const auto& f : feeds) {
            auto r = report_price(f, TokenId{0}, 100.0, rng);
            if (!r) continue;
            all.push_back(*r);
            if (f.honest()) honest.push_back(*r);
        }
        const double m = medianize(TokenId{0}, i, all).price;
        REQUIRE(m >= *std::min_element(honest.begin(), honest.end()));
        REQUIRE(m <= *std::max_element(honest.begin(), honest.end()));
    }
}

TEST_CASE("price book staleness") {
    PriceBook book;
    CHECK(book.stale(TokenId{1}, 0));
    book.update({TokenId{1}, 10, 2.5, 3});
    CHECK(book.price(TokenId{1}).value() == 2.5);
    CHECK_FALSE(book.stale(TokenId{1}, 12));
    CHECK(book.stale(TokenId{1}, 13));
    CHECK(book.price(TokenId{1}).value() == 2.5);
}

TEST_CASE("tail experiment matches the order-statistic probability") {
    const std::vector<double> cs{0.0, 1.0, 2.0, 3.0};
    const auto pts = tail_probability_experiment(5, 2, 1.0, cs, 200'000, 9);
    REQUIRE(pts.size() == cs.size());
    CHECK(pts[0].estimate == doctest::Approx(1.0));
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double p = exact_max_of_three_exceeds(cs[i]);
        const double se = std::sqrt(p * (1 - p) / 200'000.0);
        CHECK(std::abs(pts[i].estimate - p) <= 4 * se + 1e-6);
        CHECK(pts[i].estimate <= pts[i - 1].estimate);
    }
}

TEST_CASE("tail experiment at c=5 is tiny") {
    const auto pts = tail_probability_experiment(5, 2, 1.0, {5.0}, 1'000'000, 1);
    CHECK(pts[0].estimate <= 1e-4);
}

TEST_CASE("more honest feeds shrink the tail") {
    const auto five = tail_probability_experiment(5, 2, 1.0, {1.5}, 100'000, 4);
    const auto nine = tail_probability_experiment(9, 2, 1.0, {1.5}, 100'000, 4);
    CHECK(nine[0].estimate < five[0].estimate);
}

TEST_CASE("tail experiment refuses a corrupt majority") {
    try {
        tail_probability_experiment(5, 3, 1.0, {1.0}, 10'000, 1);
        FAIL("expected refusal");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::quorum_violation);
    }
    CHECK_THROWS_AS(tail_probability_experiment(4, 2, 1.0, {1.0}, 10'000, 1), Error);
}

TEST_CASE("tail bound formula") {
    // exp(-3*4/2) / (2 sqrt(2 pi))
    CHECK(tail_bound(5, 2, 1.0, 2.0) == doctest::Approx(std::exp(-6.0) / (2.0 * 2.5066282746310002)));
}

TEST_CASE("feeds from json") {
    const auto feeds = feeds_from_json(nlohmann::json::parse(
        R"([{"variance": 0.25}, {"corruption": "fixed-target", "value": 0}, {"corruption": "silent"}])"));
    REQUIRE(feeds.size() == 3);
    CHECK(feeds[0].noise.variance == 0.25);
    CHECK(feeds[1].corruption == Corruption::FixedTarget);
    CHECK(feeds[2].id == 2);
    CHECK_THROWS_AS(feeds_from_json(nlohmann::json::parse(R"([{"corruption": "bribe"}])")), Error);
}
