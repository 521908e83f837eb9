#pragma once

// First-passage failure probability of a static collateral portfolio.
// A run fails when, at some slot t in [0, horizon], the portfolio value
// relative to t=0 drops to theta/gamma' or below.

#include "crocodai/risk_model.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace crocodai::mc {

struct Portfolio {
    std::string name;
    std::vector<std::string> assets;
    std::vector<double> weights;  // value fractions at t=0

    /// Throws Errc::invalid_parameter unless weights are >= 0 and sum to 1 +- 1e-9.
    void validate() const;
    /// Rescales weights to sum to 1.
    Portfolio normalized() const;
};

enum class Method { StudentT, Normal, Historical };
std::string_view to_string(Method m);
Method method_from(const std::string& name);

struct FailureEstimate {
    std::string portfolio;
    double p = 0.0;
    double half_width = 0.0;
    std::int64_t failures = 0;
    std::int64_t runs = 0;
    int horizon = 0;
    Method method = Method::StudentT;
    double gamma_prime = 0.0;
    double theta = 0.0;
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const FailureEstimate& e);

/// Wald 95% half-width 1.96 sqrt(p(1-p)/N).
double confidence_interval(std::int64_t failures, std::int64_t runs);

struct SimConfig {
    double theta = 1.1;
    int horizon = 288;
    std::int64_t runs = 100'000;
    std::uint64_t seed = 7;
    int jobs = 1;
};

/// Failure threshold on the relative portfolio value.
double failure_level(double gamma_prime, double theta);

/// Minimum relative portfolio value of every simulated run (t=0 included, so
/// each entry is <= 1). Run i draws from substream(seed, i), which makes the
/// result independent of `jobs`.
std::vector<double> simulate_minima(const Portfolio& p, const risk::ReturnModel& model, risk::Distribution dist,
                                    const SimConfig& cfg);

/// Counts failures of precomputed minima, the common-random-numbers path.
FailureEstimate estimate_from_minima(const std::vector<double>& minima, double gamma_prime, double theta);

FailureEstimate simulate_failure(const Portfolio& p, const risk::ReturnModel& model, double gamma_prime,
                                 risk::Distribution dist, const SimConfig& cfg);

/// Minimum relative value over every window of horizon+1 consecutive aligned
/// observations that stays inside one period.
std::vector<double> historical_minima(const Portfolio& p, const risk::AlignedPrices& prices, int horizon);

FailureEstimate historical_replay(const Portfolio& p, const risk::AlignedPrices& prices, double gamma_prime,
                                  double theta, int horizon);

struct SweepTable {
    std::vector<std::string> portfolios;
    std::vector<double> gamma_primes;
    std::vector<std::vector<FailureEstimate>> cells;  // [gamma row][portfolio column]

    std::string to_csv(bool with_half_widths = false) const;
    nlohmann::json to_json() const;
};

/// Portfolios x gamma' with shared draws per portfolio. For the historical
/// method pass `prices`; the model-based methods need `model`.
SweepTable table_sweep(const std::vector<Portfolio>& portfolios, const std::vector<double>& gamma_primes, Method method,
                       const SimConfig& cfg, const risk::ReturnModel* model, const risk::PriceSet* prices);

}  // namespace crocodai::mc
