#include "crocodai/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace crocodai::oracle {

const Noise& Feed::noise_for(TokenId t) const {
    auto it = per_token.find(t);
    return it == per_token.end() ? noise : it->second;
}

std::optional<double> report_price(const Feed& feed, TokenId token, double base_price, Rng& rng) {
    if (!(base_price > 0.0)) fail(Errc::invalid_amount, "base price must be positive");
    switch (feed.corruption) {
        case Corruption::Silent: return std::nullopt;
        case Corruption::FixedTarget: return feed.corruption_value;
        case Corruption::ConstantOffset: return std::max(0.0, base_price + feed.corruption_value);
        case Corruption::None: break;
    }
    const Noise& n = feed.noise_for(token);
    if (!(n.variance > 0.0)) fail(Errc::invalid_parameter, "feed noise variance must be positive");
    std::normal_distribution<double> d(n.mean, std::sqrt(n.variance));
    return std::max(0.0, base_price + d(rng));
}

MedianizedPrice medianize(TokenId token, Slot slot, std::vector<double> reports) {
    if (reports.empty()) fail(Errc::stale_price, "no price reports");
    const std::size_t n = reports.size();
    const std::size_t mid = n / 2;
    std::nth_element(reports.begin(), reports.begin() + static_cast<std::ptrdiff_t>(mid), reports.end());
    double m = reports[mid];
    if (n % 2 == 0) {
        const double lower = *std::max_element(reports.begin(), reports.begin() + static_cast<std::ptrdiff_t>(mid));
        m = lower + (m - lower) / 2.0;
    }
    return {token, slot, m, static_cast<int>(n)};
}

MedianizedPrice poll(const std::vector<Feed>& feeds, TokenId token, Slot slot, double base_price, Rng& rng) {
    std::vector<double> reports;
    for (const auto& f : feeds)
        if (auto r = report_price(f, token, base_price, rng)) reports.push_back(*r);
    return medianize(token, slot, std::move(reports));
}

void PriceBook::update(const MedianizedPrice& p) { entries_[p.token] = {p.price, p.slot}; }

std::optional<double> PriceBook::price(TokenId token) const {
    auto it = entries_.find(token);
    if (it == entries_.end()) return std::nullopt;
    return it->second.price;
}

bool PriceBook::stale(TokenId token, Slot now) const {
    auto it = entries_.find(token);
    return it == entries_.end() || now - it->second.updated >= kStaleAfter;
}

double tail_bound(int feeds, int corrupt, double sigma, double c) {
    const double honest = feeds - corrupt;
    return std::exp(-honest * c * c / (2.0 * sigma * sigma)) / (c * std::sqrt(2.0 * std::numbers::pi) / sigma);
}

std::vector<TailPoint> tail_probability_experiment(int feeds, int corrupt, double sigma,
                                                   const std::vector<double>& thresholds,
                                                   std::int64_t trials, std::uint64_t seed) {
    if (feeds < 1 || corrupt < 0) fail(Errc::invalid_parameter, "feed counts must be positive");
    if (2 * corrupt >= feeds) fail(Errc::quorum_violation, "corrupt feeds must be fewer than half of all feeds");
    if (!(sigma > 0.0)) fail(Errc::invalid_parameter, "sigma must be positive");
    if (trials <= 0) fail(Errc::invalid_parameter, "trials must be positive");

    // Corrupt feeds sit at a target far above any honest report, which is the
    // worst case for a one-sided push: the median becomes an upper order
    // statistic of the honest reports.
    const double target = 1e12 * sigma;
    std::vector<TailPoint> out;
    for (double c : thresholds) out.push_back({c, trials, 0, 0.0, tail_bound(feeds, corrupt, sigma, c)});

    Rng rng(splitmix64(seed));
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<double> reports(static_cast<std::size_t>(feeds));
    const std::size_t mid = reports.size() / 2;
    for (std::int64_t t = 0; t < trials; ++t) {
        int i = 0;
        for (; i < feeds - corrupt; ++i) reports[static_cast<std::size_t>(i)] = noise(rng);
        for (; i < feeds; ++i) reports[static_cast<std::size_t>(i)] = target;
        std::nth_element(reports.begin(), reports.begin() + static_cast<std::ptrdiff_t>(mid), reports.end());
        double m = reports[mid];
        if (reports.size() % 2 == 0) {
            const double lower = *std::max_element(reports.begin(), reports.begin() + static_cast<std::ptrdiff_t>(mid));
            m = lower + (m - lower) / 2.0;
        }
        const double dev = std::abs(m);
        for (auto& p : out)
            if (dev > p.c) ++p.exceed;
    }
    for (auto& p : out) p.estimate = static_cast<double>(p.exceed) / static_cast<double>(trials);
    return out;
}

std::vector<Feed> feeds_from_json(const nlohmann::json& j) {
    if (!j.is_array()) fail(Errc::schema_error, "feeds must be an array");
    std::vector<Feed> out;
    int next = 0;
    for (const auto& f : j) {
        Feed feed;
        feed.id = f.value("id", next);
        next = feed.id + 1;
        feed.noise.mean = f.value("mean", 0.0);
        feed.noise.variance = f.value("variance", 1e-6);
        if (!(feed.noise.variance > 0.0)) fail(Errc::schema_error, "feed variance must be positive");
        const std::string strategy = f.value("corruption", std::string("none"));
        if (strategy == "none") feed.corruption = Corruption::None;
        else if (strategy == "constant-offset") feed.corruption = Corruption::ConstantOffset;
        else if (strategy == "fixed-target") feed.corruption = Corruption::FixedTarget;
        else if (strategy == "silent") feed.corruption = Corruption::Silent;
        else fail(Errc::schema_error, "unknown corruption strategy '" + strategy + "'");
        feed.corruption_value = f.value("value", 0.0);
        out.push_back(feed);
    }
    return out;
}

}  // namespace crocodai::oracle
