#include "crocodai/risk_model.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace crocodai;
using namespace crocodai::risk;

namespace {

PriceSet parse(const std::string& csv) {
    std::istringstream in(csv);
    return ingest_prices(in);
}

double rel_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / b.norm(); }

Eigen::MatrixXd fixture_cov() {
    Eigen::MatrixXd c(3, 3);
    c << 4e-6, 1.2e-6, -0.4e-6,
         1.2e-6, 9e-6, 2.1e-6,
         -0.4e-6, 2.1e-6, 1e-6;
    return c;
}

}  // namespace

TEST_CASE("timestamps") {
    CHECK(parse_timestamp("2022-11-08T00:00:00Z") == 1667865600);
    CHECK(parse_timestamp("2022-11-08 00:05:00") == 1667865900);
    CHECK(parse_timestamp("2022-11-08T00:05:00.000+00:00") == 1667865900);
    CHECK(parse_timestamp("1970-01-01T00:00Z") == 0);
    CHECK_THROWS_AS(parse_timestamp("2022-02-30T00:00:00Z"), Error);
    CHECK_THROWS_AS(parse_timestamp("2022-11-08T00:00:00+02:00"), Error);
    CHECK_THROWS_AS(parse_timestamp("yesterday"), Error);
    CHECK(format_timestamp(1667865900) == "2022-11-08T00:05:00Z");
}

TEST_CASE("ingest_prices") {
    SUBCASE("two rows") {
        const auto set = parse("timestamp,BTC\n2022-01-01T00:00:00Z,100\n2022-01-01T00:05:00Z,110\n");
        const auto s = series(set, "BTC");
        CHECK(s.prices == std::vector<double>{100, 110});
        CHECK(s.periods() == 1);
    }
    SUBCASE("non-positive price reports the row") {
        try {
            parse("timestamp,BTC\n2022-01-01T00:00:00Z,100\n2022-01-01T00:05:00Z,-1\n");
            FAIL("expected parse error");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::parse_error);
            CHECK(std::string(e.what()).find("row 3") != std::string::npos);
        }
    }
    SUBCASE("gap starts a new period") {
        const auto set = parse(
            "timestamp,BTC\n2022-01-01T00:00:00Z,1\n2022-01-01T00:05:00Z,2\n2022-01-01T04:05:00Z,3\n");
        CHECK(series(set, "BTC").period_starts == std::vector<std::size_t>{0, 2});
    }
    SUBCASE("ten minute gap stays in the period") {
        const auto set = parse("timestamp,BTC\n2022-01-01T00:00:00Z,1\n2022-01-01T00:10:00Z,2\n");
        CHECK(series(set, "BTC").periods() == 1);
    }
    SUBCASE("missing cells and malformed rows") {
        const auto set = parse("timestamp,A,B\n2022-01-01T00:00:00Z,1,\n2022-01-01T00:05:00Z,2,5\n");
        CHECK(series(set, "A").prices.size() == 2);
        CHECK(series(set, "B").prices.size() == 1);
        CHECK(aligned_prices(set, {"A", "B"}).times.size() == 1);
        CHECK_THROWS_AS(parse("timestamp,A\n2022-01-01T00:00:00Z,1,2\n"), Error);
        CHECK_THROWS_AS(parse("timestamp,A\n2022-01-01T00:05:00Z,1\n2022-01-01T00:00:00Z,1\n"), Error);
        CHECK_THROWS_AS(parse("time,A\n"), Error);
        CHECK_THROWS_AS(series(set, "C"), Error);
    }
}

TEST_CASE("log_returns") {
    PriceSeries s{"X", {0, 300}, {100, 110}, {0}};
    const auto r = log_returns(s);
    REQUIRE(r.size() == 1);
    CHECK(r[0] == doctest::Approx(0.0953102).epsilon(1e-6));

    PriceSeries flat{"X", {0, 300, 600}, {5, 5, 5}, {0}};
    CHECK(log_returns(flat) == std::vector<double>{0, 0});

    // boundary between observations 5 and 6
    PriceSeries split{"X", {}, {}, {}};
    for (int i = 0; i < 10; ++i) {
        split.times.push_back(i < 6 ? i * 300 : 100000 + i * 300);
        split.prices.push_back(1.0 + i);
    }
    split.period_starts = split_periods(split.times);
    const auto rs = log_returns(split);
    CHECK(rs.size() == 8);
    for (double x : rs) CHECK(x != doctest::Approx(std::log(7.0 / 6.0)));

    PriceSeries one{"X", {0}, {1}, {0}};
    CHECK_THROWS_AS(log_returns(one), Error);
}

TEST_CASE("cholesky examples") {
    Eigen::MatrixXd a(2, 2);
    a << 4, 2, 2, 3;
    const auto L = cholesky(a).L;
    CHECK(L(0, 0) == doctest::Approx(2));
    CHECK(L(0, 1) == 0);
    CHECK(L(1, 0) == doctest::Approx(1));
    CHECK(L(1, 1) == doctest::Approx(std::sqrt(2.0)));
    CHECK(rel_frobenius(L * L.transpose(), a) < 1e-15);

    CHECK(cholesky(Eigen::MatrixXd::Identity(4, 4)).L == Eigen::MatrixXd::Identity(4, 4));

    Eigen::MatrixXd bad(2, 2);
    bad << 1, 2, 2, 1;
    try {
        cholesky(bad);
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::not_positive_definite);
    }
    CHECK(cholesky(Eigen::MatrixXd::Zero(3, 3)).L.isZero());
}

TEST_CASE("cholesky on random and rank deficient PSD matrices") {
    Rng rng(42);
    std::normal_distribution<double> z;
    for (int n : {1, 2, 7, 30, 100}) {
        for (int rank : {n, std::max(1, n / 2)}) {
            Eigen::MatrixXd B(n, rank);
            for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = z(rng);
            const Eigen::MatrixXd A = B * B.transpose();
            const auto ch = cholesky(A);
            CHECK(ch.L.isLowerTriangular());
            CHECK(rel_frobenius(ch.L * ch.L.transpose(), A) < 1e-10);
        }
    }
}

TEST_CASE("t degrees of freedom are recovered") {
    Rng rng(7);
    std::student_t_distribution<double> t4(4.0);
    std::normal_distribution<double> gauss;
    std::vector<double> a(100'000), b(100'000);
    for (auto& x : a) x = t4(rng);
    for (auto& x : b) x = gauss(rng);
    const double nu_t = fit_t_dof(a);
    const double nu_g = fit_t_dof(b);
    CHECK(nu_t >= 3.5);
    CHECK(nu_t <= 4.5);
    CHECK(nu_g > 50.0);
    CHECK(nu_g <= kMaxNu);
}

TEST_CASE("estimate_model") {
    Rng rng(3);
    const Eigen::MatrixXd cov = fixture_cov();
    const auto truth = make_model({"A", "B", "C"}, Eigen::Vector3d(1e-5, -2e-5, 0), cov);
    Sampler s(truth, Distribution::Normal);
    Eigen::MatrixXd r;
    s.sample(rng, r, 50'000);
    const auto fitted = estimate_model({"A", "B", "C"}, r.transpose());
    CHECK(rel_frobenius(fitted.cov, cov) < 0.03);
    CHECK(fitted.observations == 50'000);
    CHECK(fitted.L.isLowerTriangular());

    Eigen::MatrixXd flat = Eigen::MatrixXd::Ones(200, 2);
    flat.col(1).setRandom();
    try {
        estimate_model({"X", "Y"}, flat);
        FAIL("expected zero variance");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::zero_variance);
    }
    CHECK_THROWS_AS(estimate_model({"A", "B", "C"}, r.transpose().topRows(50)), Error);
}

TEST_CASE("sampler") {
    SUBCASE("zero covariance and drift gives zeros") {
        const auto m = make_model({"A", "B"}, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Zero());
        Sampler s(m, Distribution::StudentT);
        Rng rng(1);
        Eigen::MatrixXd r;
        s.sample(rng, r, 10);
        CHECK(r.isZero(0.0));
    }
    SUBCASE("perfect correlation") {
        Eigen::Matrix2d c;
        c << 1e-4, 1e-4, 1e-4, 1e-4;
        const auto m = make_model({"A", "B"}, Eigen::Vector2d(0.1, 0.2), c);
        Rng rng(1);
        Eigen::MatrixXd r;
        Sampler(m, Distribution::Normal).sample(rng, r, 100);
        CHECK(((r.row(1).array() - 0.2) - (r.row(0).array() - 0.1)).abs().maxCoeff() < 1e-15);
    }
    SUBCASE("covariance converges at the square-root rate") {
        std::vector<double> nu{4.0, 6.0, 3.0};
        const auto m = make_model({"A", "B", "C"}, Eigen::Vector3d::Zero(), fixture_cov(), nu);
        double err_small = 0, err_large = 0;
        for (auto [n, err] : {std::pair<int, double*>{10'000, &err_small}, {160'000, &err_large}}) {
            Rng rng(5);
            Eigen::MatrixXd r;
            Sampler(m, Distribution::Normal).sample(rng, r, n);
            const Eigen::MatrixXd c = r * r.transpose() / n;
            *err = rel_frobenius(c, m.cov);
        }
        CHECK(err_large < err_small);
        CHECK(err_large < 0.02);
    }
    SUBCASE("standardized t draws keep the target covariance") {
        std::vector<double> nu{5.0, 8.0, 5.0};
        const auto m = make_model({"A", "B", "C"}, Eigen::Vector3d::Zero(), fixture_cov(), nu);
        Rng rng(11);
        Eigen::MatrixXd r;
        Sampler(m, Distribution::StudentT).sample(rng, r, 400'000);
        CHECK(rel_frobenius(r * r.transpose() / 400'000.0, m.cov) < 0.02);
    }
    SUBCASE("same seed, same draws") {
        const auto m = make_model({"A", "B", "C"}, Eigen::Vector3d::Zero(), fixture_cov(), {4, 4, 4});
        Eigen::MatrixXd a, b;
        Rng r1(9), r2(9);
        Sampler(m, Distribution::StudentT).sample(r1, a, 50);
        Sampler(m, Distribution::StudentT).sample(r2, b, 50);
        CHECK(a == b);
    }
    SUBCASE("t sampling needs nu above two") {
        ReturnModel m = make_model({"A"}, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
        m.nu = {2.0};
        CHECK_THROWS_AS(Sampler(m, Distribution::StudentT), Error);
        CHECK_NOTHROW(Sampler(m, Distribution::Normal));
    }
}

TEST_CASE("gbm_terminal") {
    CHECK(gbm_terminal(100, 0.05, 0.0, 2.0, 0.7) == doctest::Approx(100 * std::exp(0.1)));
    CHECK(gbm_terminal(100, 0.0, 0.0, 5.0, 3.0) == 100.0);
    const double s0 = 3.5, mu = 0.01, sigma = 0.4, t = 1.5, w = -0.8;
    const double direct = s0 * std::exp(mu * t - 0.5 * sigma * sigma * t + sigma * w);
    CHECK(std::abs(gbm_terminal(s0, mu, sigma, t, w) / direct - 1.0) < 1e-12);
    CHECK(gbm_terminal(1e-3, -5, 3, 10, -40) > 0.0);
}

TEST_CASE("model json round trip and subsets") {
    const auto m = make_model({"A", "B", "C"}, Eigen::Vector3d(1, 2, 3), fixture_cov(), {3, 4, 5});
    const auto back = model_from_json(to_json(m));
    CHECK(back.symbols == m.symbols);
    CHECK(back.cov == m.cov);
    CHECK(back.nu == m.nu);
    const auto sub = m.subset({"C", "A"});
    CHECK(sub.mu(0) == 3);
    CHECK(sub.cov(0, 1) == m.cov(2, 0));
    CHECK(sub.nu == std::vector<double>{5, 3});
    CHECK_THROWS_AS(m.subset({"Z"}), Error);
}
