#pragma once

// Price ingestion, log returns, moment and tail estimation, Cholesky
// factorization and the correlated normal / Student-t return sampler.

#include "crocodai/error.hpp"
#include "crocodai/rng.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace crocodai::risk {

inline constexpr std::int64_t kSlotSeconds = 300;
/// Consecutive observations further apart than this start a new period.
inline constexpr std::int64_t kMaxGapSeconds = 2 * kSlotSeconds;

/// Parses ISO-8601 UTC ("2022-11-08T14:05:00Z", optional fraction, "+00:00"
/// suffix or a space instead of 'T') into Unix seconds.
std::int64_t parse_timestamp(const std::string& text);
std::string format_timestamp(std::int64_t unix_seconds);

/// Wide price table as read from CSV; missing cells are empty optionals.
struct PriceSet {
    std::vector<std::string> symbols;
    std::vector<std::int64_t> times;
    std::vector<std::vector<std::optional<double>>> columns;  // [symbol][row]

    std::size_t column(const std::string& symbol) const;
};

PriceSet ingest_prices(std::istream& in);
PriceSet ingest_prices_file(const std::string& path);

struct PriceSeries {
    std::string symbol;
    std::vector<std::int64_t> times;
    std::vector<double> prices;
    std::vector<std::size_t> period_starts;  // indices into times; first is 0

    std::size_t periods() const { return period_starts.size(); }
};

PriceSeries series(const PriceSet& set, const std::string& symbol);

/// Observations where every listed symbol has a price, split into periods.
struct AlignedPrices {
    std::vector<std::string> symbols;
    std::vector<std::int64_t> times;
    Eigen::MatrixXd prices;                  // observations x assets
    std::vector<std::size_t> period_starts;
};

AlignedPrices aligned_prices(const PriceSet& set, const std::vector<std::string>& symbols);
std::vector<std::size_t> split_periods(const std::vector<std::int64_t>& times);

/// ln(p[t+1]/p[t]) for consecutive observations inside a period.
std::vector<double> log_returns(const PriceSeries& s);
/// Returns matrix (observations x assets) with no return spanning a period boundary.
Eigen::MatrixXd log_returns(const AlignedPrices& p);

struct CholeskyResult {
    Eigen::MatrixXd L;
    double jitter = 0.0;  // added to the diagonal, absolute
};

/// Lower-triangular L with L L^T = A for symmetric positive semi-definite A.
/// Zero pivots with a vanishing remainder column yield a zero column. If
/// plain factorization fails, diagonal jitter of 1e-12, 1e-11, ... 1e-8
/// times the largest diagonal entry is tried before Errc::not_positive_definite.
CholeskyResult cholesky(const Eigen::MatrixXd& A, bool allow_jitter = true);

enum class Distribution { Normal, StudentT };
std::string_view to_string(Distribution d);
Distribution distribution_from(const std::string& name);

struct ReturnModel {
    std::vector<std::string> symbols;
    Eigen::VectorXd mu;      // per-slot drift of log returns
    Eigen::MatrixXd cov;     // per-slot covariance of log returns
    Eigen::MatrixXd L;
    std::vector<double> nu;  // Student-t degrees of freedom per asset
    std::size_t observations = 0;
    double jitter = 0.0;

    std::size_t size() const { return symbols.size(); }
    std::size_t index(const std::string& symbol) const;
    /// Sub-model over `symbols`, refactorized.
    ReturnModel subset(const std::vector<std::string>& symbols) const;
    void zero_drift() { mu.setZero(); }
};

inline constexpr double kMinNu = 2.1;
inline constexpr double kMaxNu = 200.0;

/// Maximum-likelihood t degrees of freedom for a centred sample, with the
/// scale profiled out; clamped to [kMinNu, kMaxNu].
double fit_t_dof(const std::vector<double>& centred);

ReturnModel estimate_model(const std::vector<std::string>& symbols, const Eigen::MatrixXd& returns,
                           std::size_t min_observations = 100);

/// Builds a model directly from moments (tests, synthetic scenarios).
ReturnModel make_model(std::vector<std::string> symbols, Eigen::VectorXd mu, Eigen::MatrixXd cov,
                       std::vector<double> nu = {});

nlohmann::json to_json(const ReturnModel& m);
ReturnModel model_from_json(const nlohmann::json& j);

/// Draws assets x slots return matrices R = L T + mu.
class Sampler {
public:
    Sampler(const ReturnModel& model, Distribution dist);
    void sample(Rng& rng, Eigen::MatrixXd& out, Eigen::Index slots) const;
    const ReturnModel& model() const { return model_; }

private:
    ReturnModel model_;
    Distribution dist_;
    std::vector<double> t_scale_;
};

/// Standard log-normal GBM solution S0 exp((mu - sigma^2/2) t + sigma W).
double gbm_terminal(double s0, double mu, double sigma, double t, double w);

}  // namespace crocodai::risk
