#include "crocodai/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

namespace crocodai::mc {

void Portfolio::validate() const {
    if (assets.empty() || assets.size() != weights.size())
        fail(Errc::invalid_parameter, "portfolio '" + name + "' needs one weight per asset");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) fail(Errc::invalid_parameter, "portfolio '" + name + "' has a negative weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail(Errc::invalid_parameter, "weights of portfolio '" + name + "' do not sum to 1");
}

Portfolio Portfolio::normalized() const {
    Portfolio out = *this;
    double sum = 0.0;
    for (double w : weights) sum += w;
    if (!(sum > 0.0)) fail(Errc::invalid_parameter, "portfolio '" + name + "' has no positive weight");
    for (double& w : out.weights) w /= sum;
    return out;
}

std::string_view to_string(Method m) {
    switch (m) {
        case Method::StudentT: return "t";
        case Method::Normal: return "normal";
        case Method::Historical: return "historical";
    }
    return "?";
}

Method method_from(const std::string& name) {
    if (name == "t" || name == "student-t") return Method::StudentT;
    if (name == "normal" || name == "gbm") return Method::Normal;
    if (name == "historical" || name == "hist") return Method::Historical;
    fail(Errc::invalid_parameter, "unknown method '" + name + "'");
}

nlohmann::json to_json(const FailureEstimate& e) {
    return {{"portfolio", e.portfolio},   {"p", e.p},
            {"half_width", e.half_width}, {"failures", e.failures},
            {"runs", e.runs},             {"horizon", e.horizon},
            {"method", to_string(e.method)}, {"gamma_prime", e.gamma_prime},
            {"theta", e.theta},           {"seed", e.seed}};
}

double confidence_interval(std::int64_t failures, std::int64_t runs) {
    if (runs < 1 || failures < 0 || failures > runs) fail(Errc::invalid_parameter, "need 0 <= failures <= runs, runs >= 1");
    const double p = static_cast<double>(failures) / static_cast<double>(runs);
    return 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(runs));
}

double failure_level(double gamma_prime, double theta) {
    if (!(theta > 0.0) || !(gamma_prime > 0.0)) fail(Errc::invalid_parameter, "gamma' and theta must be positive");
    return theta / gamma_prime;
}

std::vector<double> simulate_minima(const Portfolio& p, const risk::ReturnModel& model, risk::Distribution dist,
                                    const SimConfig& cfg) {
    p.validate();
    if (cfg.horizon < 1) fail(Errc::invalid_parameter, "horizon must be at least one slot");
    if (cfg.runs < 1) fail(Errc::invalid_parameter, "need at least one run");
    const risk::ReturnModel sub = model.subset(p.assets);
    const risk::Sampler sampler(sub, dist);
    const Eigen::Map<const Eigen::VectorXd> w(p.weights.data(), static_cast<Eigen::Index>(p.weights.size()));

    std::vector<double> minima(static_cast<std::size_t>(cfg.runs));
    auto work = [&](std::int64_t begin, std::int64_t end) {
        Eigen::MatrixXd r;
        Eigen::VectorXd cum(w.size());
        for (std::int64_t i = begin; i < end; ++i) {
            Rng rng = substream(cfg.seed, static_cast<std::uint64_t>(i));
            sampler.sample(rng, r, cfg.horizon);
            cum.setZero();
            double lo = 1.0;
            for (Eigen::Index t = 0; t < r.cols(); ++t) {
                cum += r.col(t);
                lo = std::min(lo, w.dot(cum.array().exp().matrix()));
            }
            minima[static_cast<std::size_t>(i)] = lo;
        }
    };
    const int jobs = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(cfg.runs)));
    if (jobs == 1) {
        work(0, cfg.runs);
    } else {
        std::vector<std::thread> pool;
        const std::int64_t chunk = (cfg.runs + jobs - 1) / jobs;
        for (int j = 0; j < jobs; ++j) {
            const std::int64_t b = j * chunk, e = std::min(cfg.runs, b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
        for (auto& t : pool) t.join();
    }
    return minima;
}

FailureEstimate estimate_from_minima(const std::vector<double>& minima, double gamma_prime, double theta) {
    if (minima.empty()) fail(Errc::insufficient_data, "no runs to evaluate");
    const double level = failure_level(gamma_prime, theta);
    FailureEstimate e;
    e.runs = static_cast<std::int64_t>(minima.size());
    e.failures = std::count_if(minima.begin(), minima.end(), [&](double m) { return m <= level; });
    e.p = static_cast<double>(e.failures) / static_cast<double>(e.runs);
    e.half_width = confidence_interval(e.failures, e.runs);
    e.gamma_prime = gamma_prime;
    e.theta = theta;
    return e;
}

FailureEstimate simulate_failure(const Portfolio& p, const risk::ReturnModel& model, double gamma_prime,
                                 risk::Distribution dist, const SimConfig& cfg) {
    if (!(gamma_prime > cfg.theta) || !(cfg.theta > 1.0)) fail(Errc::invalid_parameter, "need gamma' > theta > 1");
    FailureEstimate e = estimate_from_minima(simulate_minima(p, model, dist, cfg), gamma_prime, cfg.theta);
    e.portfolio = p.name;
    e.horizon = cfg.horizon;
    e.method = dist == risk::Distribution::Normal ? Method::Normal : Method::StudentT;
    e.seed = cfg.seed;
    return e;
}

std::vector<double> historical_minima(const Portfolio& p, const risk::AlignedPrices& prices, int horizon) {
    p.validate();
    if (horizon < 1) fail(Errc::invalid_parameter, "horizon must be at least one slot");
    std::vector<Eigen::Index> cols;
    for (const auto& a : p.assets) {
        auto it = std::find(prices.symbols.begin(), prices.symbols.end(), a);
        if (it == prices.symbols.end()) fail(Errc::unknown_token, "no prices for '" + a + "'");
        cols.push_back(static_cast<Eigen::Index>(it - prices.symbols.begin()));
    }
    std::vector<double> minima;
    const std::size_t n = prices.times.size();
    for (std::size_t k = 0; k < prices.period_starts.size(); ++k) {
        const std::size_t begin = prices.period_starts[k];
        const std::size_t end = k + 1 < prices.period_starts.size() ? prices.period_starts[k + 1] : n;
        for (std::size_t s = begin; s + static_cast<std::size_t>(horizon) < end; ++s) {
            double lo = 1.0;
            for (std::size_t t = s + 1; t <= s + static_cast<std::size_t>(horizon); ++t) {
                double v = 0.0;
                for (std::size_t a = 0; a < cols.size(); ++a)
                    v += p.weights[a] * prices.prices(static_cast<Eigen::Index>(t), cols[a]) /
                         prices.prices(static_cast<Eigen::Index>(s), cols[a]);
                lo = std::min(lo, v);
            }
            minima.push_back(lo);
        }
    }
    if (minima.empty())
        fail(Errc::insufficient_data, "no period holds " + std::to_string(horizon + 1) + " consecutive observations");
    return minima;
}

FailureEstimate historical_replay(const Portfolio& p, const risk::AlignedPrices& prices, double gamma_prime,
                                  double theta, int horizon) {
    FailureEstimate e = estimate_from_minima(historical_minima(p, prices, horizon), gamma_prime, theta);
    e.portfolio = p.name;
    e.horizon = horizon;
    e.method = Method::Historical;
    return e;
}

namespace {

std::string fmt(double x) {
    std::ostringstream o;
    o << std::setprecision(6) << std::fixed << x;
    std::string s = o.str();
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    return s;
}

}  // namespace

std::string SweepTable::to_csv(bool with_half_widths) const {
    std::ostringstream out;
    out << "gamma_prime";
    for (const auto& p : portfolios) {
        out << ',' << p;
        if (with_half_widths) out << ',' << p << "_ci";
    }
    out << '\n';
    for (std::size_t r = 0; r < gamma_primes.size(); ++r) {
        out << fmt(gamma_primes[r]);
        for (const auto& c : cells[r]) {
            out << ',' << fmt(c.p);
            if (with_half_widths) out << ',' << fmt(c.half_width);
        }
        out << '\n';
    }
    return out.str();
}

nlohmann::json SweepTable::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : cells)
        for (const auto& c : row) rows.push_back(mc::to_json(c));
    return {{"portfolios", portfolios}, {"gamma_primes", gamma_primes}, {"cells", rows}};
}

SweepTable table_sweep(const std::vector<Portfolio>& portfolios, const std::vector<double>& gamma_primes, Method method,
                       const SimConfig& cfg, const risk::ReturnModel* model, const risk::PriceSet* prices) {
    if (gamma_primes.empty() || portfolios.empty()) fail(Errc::invalid_parameter, "sweep needs portfolios and gamma' values");
    SweepTable t;
    t.gamma_primes = gamma_primes;
    t.cells.assign(gamma_primes.size(), {});
    for (const auto& p : portfolios) {
        t.portfolios.push_back(p.name);
        std::vector<double> minima;
        if (method == Method::Historical) {
            if (!prices) fail(Errc::insufficient_data, "historical replay needs price data");
            minima = historical_minima(p, risk::aligned_prices(*prices, p.assets), cfg.horizon);
        } else {
            if (!model) fail(Errc::insufficient_data, "simulation needs a fitted model");
            const auto dist = method == Method::Normal ? risk::Distribution::Normal : risk::Distribution::StudentT;
            minima = simulate_minima(p, *model, dist, cfg);
        }
        for (std::size_t r = 0; r < gamma_primes.size(); ++r) {
            if (!(gamma_primes[r] > cfg.theta)) fail(Errc::invalid_parameter, "need gamma' > theta");
            FailureEstimate e = estimate_from_minima(minima, gamma_primes[r], cfg.theta);
            e.portfolio = p.name;
            e.horizon = cfg.horizon;
            e.method = method;
            e.seed = method == Method::Historical ? 0 : cfg.seed;
            t.cells[r].push_back(e);
        }
    }
    return t;
}

}  // namespace crocodai::mc
