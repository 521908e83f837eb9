#pragma once

// Noisy price feeds, corruption strategies and the medianizer.

#include "crocodai/error.hpp"
#include "crocodai/ledger.hpp"
#include "crocodai/rng.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <vector>

namespace crocodai::oracle {

using ledger::Slot;
using ledger::TokenId;

enum class Corruption { None, ConstantOffset, FixedTarget, Silent };

struct Noise {
    double mean = 0.0;
    double variance = 1e-6;
};

struct Feed {
    int id = 0;
    Noise noise;                         // used for tokens without an entry below
    std::map<TokenId, Noise> per_token;
    Corruption corruption = Corruption::None;
    double corruption_value = 0.0;      // offset or target, by strategy

    bool honest() const { return corruption == Corruption::None; }
    const Noise& noise_for(TokenId t) const;
};

/// Empty for a silent feed. Honest reports are base + N(mean, variance), floored at 0.
std::optional<double> report_price(const Feed& feed, TokenId token, double base_price, Rng& rng);

struct MedianizedPrice {
    TokenId token{};
    Slot slot = 0;
    double price = 0.0;
    int feeds = 0;
};

/// Odd count: middle order statistic. Even count: mean of the two middle values.
/// Throws Errc::stale_price when there are no reports.
MedianizedPrice medianize(TokenId token, Slot slot, std::vector<double> reports);

/// Polls every feed and medianizes whatever was reported.
MedianizedPrice poll(const std::vector<Feed>& feeds, TokenId token, Slot slot, double base_price, Rng& rng);

/// Last good price per token. A token goes stale once kStaleAfter slots pass
/// without a fresh median; consumers keep using the last value.
class PriceBook {
public:
    static constexpr Slot kStaleAfter = 3;

    void update(const MedianizedPrice& p);
    std::optional<double> price(TokenId token) const;
    bool stale(TokenId token, Slot now) const;

private:
    struct Entry {
        double price = 0.0;
        Slot updated = 0;
    };
    std::map<TokenId, Entry> entries_;
};

double tail_bound(int feeds, int corrupt, double sigma, double c);

struct TailPoint {
    double c = 0.0;
    std::int64_t trials = 0;
    std::int64_t exceed = 0;
    double estimate = 0.0;
    double bound = 0.0;
};

/// Monte Carlo estimate of P(|median - p| > c) for O feeds, `corrupt` of which
/// report a fixed target far above the price. Every threshold is evaluated on
/// the same draws, so the estimates are monotone in c by construction.
/// Refuses (Errc::quorum_violation) unless corrupt < O/2.
std::vector<TailPoint> tail_probability_experiment(int feeds, int corrupt, double sigma,
                                                   const std::vector<double>& thresholds,
                                                   std::int64_t trials, std::uint64_t seed);

std::vector<Feed> feeds_from_json(const nlohmann::json& j);

}  // namespace crocodai::oracle
