#include "crocodai/risk_model.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace crocodai::risk {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

int digits(std::string_view s, std::size_t pos, std::size_t n) {
    if (pos + n > s.size()) throw std::invalid_argument("truncated");
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
        if (s[i] < '0' || s[i] > '9') throw std::invalid_argument("digit expected");
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

}  // namespace

std::int64_t parse_timestamp(const std::string& text) {
    const std::string_view s = trim(text);
    try {
        // YYYY-MM-DD[T ]HH:MM[:SS[.fff]][Z|+00:00]
        const int y = digits(s, 0, 4);
        if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':')
            throw std::invalid_argument("layout");
        const int mo = digits(s, 5, 2), d = digits(s, 8, 2), h = digits(s, 11, 2), mi = digits(s, 14, 2);
        std::size_t pos = 16;
        int sec = 0;
        if (pos < s.size() && s[pos] == ':') {
            sec = digits(s, pos + 1, 2);
            pos += 3;
            if (pos < s.size() && s[pos] == '.') {
                ++pos;
                while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
            }
        }
        const std::string_view zone = s.substr(pos);
        if (!(zone.empty() || zone == "Z" || zone == "+00:00" || zone == "+0000"))
            throw std::invalid_argument("only UTC timestamps are supported");
        const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                              std::chrono::day{static_cast<unsigned>(d)}};
        if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) throw std::invalid_argument("field out of range");
        const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
        return static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + sec;
    } catch (const std::invalid_argument& e) {
        fail(Errc::parse_error, "bad timestamp '" + std::string(s) + "': " + e.what());
    }
}

std::string format_timestamp(std::int64_t t) {
    const auto days = std::chrono::sys_days{std::chrono::days{t >= 0 ? t / 86400 : (t - 86399) / 86400}};
    const std::chrono::year_month_day ymd{days};
    const std::int64_t rem = t - days.time_since_epoch().count() * 86400LL;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                  static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
    return buf;
}

std::size_t PriceSet::column(const std::string& symbol) const {
    auto it = std::find(symbols.begin(), symbols.end(), symbol);
    if (it == symbols.end()) fail(Errc::unknown_token, "no price column for '" + symbol + "'");
    return static_cast<std::size_t>(it - symbols.begin());
}

PriceSet ingest_prices(std::istream& in) {
    PriceSet set;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!trim(line).empty()) break;
    }
    const auto header = split_csv(line);
    if (header.size() < 2 || header[0] != "timestamp")
        fail(Errc::parse_error, "row " + std::to_string(row) + ": header must be 'timestamp,<SYM>,...'");
    for (std::size_t i = 1; i < header.size(); ++i) {
        if (header[i].empty()) fail(Errc::parse_error, "row " + std::to_string(row) + ": empty symbol name");
        set.symbols.emplace_back(header[i]);
    }
    set.columns.resize(set.symbols.size());

    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(line);
        const std::string where = "row " + std::to_string(row);
        if (cells.size() != header.size())
            fail(Errc::parse_error, where + ": expected " + std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
        std::int64_t t;
        try {
            t = parse_timestamp(std::string(cells[0]));
        } catch (const Error& e) {
            fail(Errc::parse_error, where + ": " + e.what());
        }
        if (!set.times.empty() && t <= set.times.back())
            fail(Errc::parse_error, where + ": timestamps must be strictly increasing");
        set.times.push_back(t);
        for (std::size_t i = 1; i < cells.size(); ++i) {
            const auto cell = cells[i];
            if (cell.empty()) {
                set.columns[i - 1].push_back(std::nullopt);
                continue;
            }
            double v = 0.0;
            const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || end != cell.data() + cell.size())
                fail(Errc::parse_error, where + ": bad price '" + std::string(cell) + "' for " + set.symbols[i - 1]);
            if (!(v > 0.0) || !std::isfinite(v))
                fail(Errc::parse_error, where + ": non-positive price " + std::string(cell) + " for " + set.symbols[i - 1]);
            set.columns[i - 1].push_back(v);
        }
    }
    return set;
}

PriceSet ingest_prices_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::parse_error, "cannot open '" + path + "'");
    return ingest_prices(in);
}

std::vector<std::size_t> split_periods(const std::vector<std::int64_t>& times) {
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < times.size(); ++i)
        if (i == 0 || times[i] - times[i - 1] > kMaxGapSeconds) starts.push_back(i);
    return starts;
}

PriceSeries series(const PriceSet& set, const std::string& symbol) {
    const auto& col = set.columns[set.column(symbol)];
    PriceSeries s{symbol, {}, {}, {}};
    for (std::size_t i = 0; i < col.size(); ++i) {
        if (!col[i]) continue;
        s.times.push_back(set.times[i]);
        s.prices.push_back(*col[i]);
    }
    s.period_starts = split_periods(s.times);
    return s;
}

AlignedPrices aligned_prices(const PriceSet& set, const std::vector<std::string>& symbols) {
    std::vector<std::size_t> cols;
    for (const auto& s : symbols) cols.push_back(set.column(s));
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < set.times.size(); ++r)
        if (std::all_of(cols.begin(), cols.end(), [&](std::size_t c) { return set.columns[c][r].has_value(); }))
            rows.push_back(r);
    AlignedPrices a;
    a.symbols = symbols;
    a.prices.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        a.times.push_back(set.times[rows[i]]);
        for (std::size_t j = 0; j < cols.size(); ++j)
            a.prices(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *set.columns[cols[j]][rows[i]];
    }
    a.period_starts = split_periods(a.times);
    return a;
}

namespace {

template <class F>
void for_each_step(const std::vector<std::size_t>& starts, std::size_t n, F&& f) {
    for (std::size_t p = 0; p < starts.size(); ++p) {
        const std::size_t end = p + 1 < starts.size() ? starts[p + 1] : n;
        for (std::size_t i = starts[p]; i + 1 < end; ++i) f(i);
    }
}

}  // namespace

std::vector<double> log_returns(const PriceSeries& s) {
    std::vector<double> out;
    for_each_step(s.period_starts, s.prices.size(), [&](std::size_t i) { out.push_back(std::log(s.prices[i + 1] / s.prices[i])); });
    if (out.empty()) fail(Errc::insufficient_data, "series '" + s.symbol + "' has no period with two observations");
    return out;
}

Eigen::MatrixXd log_returns(const AlignedPrices& p) {
    std::vector<std::size_t> idx;
    for_each_step(p.period_starts, p.times.size(), [&](std::size_t i) { idx.push_back(i); });
    if (idx.empty()) fail(Errc::insufficient_data, "no period with two aligned observations");
    Eigen::MatrixXd r(static_cast<Eigen::Index>(idx.size()), p.prices.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(idx[k]);
        r.row(static_cast<Eigen::Index>(k)) = (p.prices.row(i + 1).array() / p.prices.row(i).array()).log().matrix();
    }
    return r;
}

namespace {

// Returns nullopt when A is not (numerically) positive semi-definite.
std::optional<Eigen::MatrixXd> factor(const Eigen::MatrixXd& A, double scale) {
    const Eigen::Index n = A.rows();
    const double pivot_tol = 1e-13 * scale;
    const double residual_tol = std::sqrt(pivot_tol * scale);
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double d = A(j, j) - L.row(j).head(j).squaredNorm();
        if (d > pivot_tol) {
            const double ljj = std::sqrt(d);
            L(j, j) = ljj;
            for (Eigen::Index i = j + 1; i < n; ++i)
                L(i, j) = (A(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / ljj;
            continue;
        }
        if (d < -pivot_tol) return std::nullopt;
        // Zero pivot: the rest of column j must vanish too.
        for (Eigen::Index i = j + 1; i < n; ++i)
            if (std::abs(A(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) > residual_tol) return std::nullopt;
    }
    return L;
}

}  // namespace

CholeskyResult cholesky(const Eigen::MatrixXd& A, bool allow_jitter) {
    if (A.rows() != A.cols()) fail(Errc::invalid_parameter, "cholesky needs a square matrix");
    if (!A.allFinite()) fail(Errc::invalid_parameter, "matrix has non-finite entries");
    const double scale = A.rows() == 0 ? 0.0 : A.diagonal().maxCoeff();
    if (A.rows() > 0 && (A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, A.cwiseAbs().maxCoeff()))
        fail(Errc::invalid_parameter, "matrix is not symmetric");
    if (A.rows() == 0 || (scale == 0.0 && A.cwiseAbs().maxCoeff() == 0.0))
        return {Eigen::MatrixXd::Zero(A.rows(), A.cols()), 0.0};
    if (!(scale > 0.0)) fail(Errc::not_positive_definite, "matrix has no positive diagonal entry");

    if (auto L = factor(A, scale)) return {*L, 0.0};
    if (allow_jitter) {
        for (double rel : {1e-12, 1e-11, 1e-10, 1e-9, 1e-8}) {
            const double j = rel * scale;
            Eigen::MatrixXd B = A;
            B.diagonal().array() += j;
            if (auto L = factor(B, scale)) return {*L, j};
        }
    }
    fail(Errc::not_positive_definite, "matrix is not positive semi-definite");
}

std::string_view to_string(Distribution d) { return d == Distribution::Normal ? "normal" : "t"; }

Distribution distribution_from(const std::string& name) {
    if (name == "normal" || name == "gbm") return Distribution::Normal;
    if (name == "t" || name == "student-t" || name == "studentt") return Distribution::StudentT;
    fail(Errc::invalid_parameter, "unknown distribution '" + name + "'");
}

std::size_t ReturnModel::index(const std::string& symbol) const {
    auto it = std::find(symbols.begin(), symbols.end(), symbol);
    if (it == symbols.end()) fail(Errc::unknown_token, "asset '" + symbol + "' is not in the model");
    return static_cast<std::size_t>(it - symbols.begin());
}

ReturnModel ReturnModel::subset(const std::vector<std::string>& wanted) const {
    const auto k = static_cast<Eigen::Index>(wanted.size());
    std::vector<Eigen::Index> idx;
    for (const auto& s : wanted) idx.push_back(static_cast<Eigen::Index>(index(s)));
    Eigen::VectorXd m(k);
    Eigen::MatrixXd c(k, k);
    std::vector<double> v;
    for (Eigen::Index a = 0; a < k; ++a) {
        m(a) = mu(idx[static_cast<std::size_t>(a)]);
        v.push_back(nu[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])]);
        for (Eigen::Index b = 0; b < k; ++b) c(a, b) = cov(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    }
    ReturnModel out = make_model(wanted, m, c, v);
    out.observations = observations;
    return out;
}

double fit_t_dof(const std::vector<double>& z) {
    if (z.size() < 2) fail(Errc::insufficient_data, "need at least two observations to fit degrees of freedom");
    const double n = static_cast<double>(z.size());
    double base = 0.0;
    for (double x : z) base += x * x;
    base /= n;
    if (!(base > 0.0)) fail(Errc::zero_variance, "sample has zero variance");

    auto negloglik = [&](double log_nu) {
        const double nu = std::exp(log_nu);
        double s2 = base;
        for (int it = 0; it < 500; ++it) {
            double acc = 0.0;
            for (double x : z) acc += (nu + 1.0) * x * x / (nu + x * x / s2);
            const double next = acc / n;
            const bool done = std::abs(next - s2) <= 1e-12 * s2;
            s2 = next;
            if (done) break;
        }
        double tail = 0.0;
        for (double x : z) tail += std::log1p(x * x / (nu * s2));
        const double ll = n * (std::lgamma((nu + 1.0) / 2.0) - std::lgamma(nu / 2.0) - 0.5 * std::log(nu * std::numbers::pi * s2)) -
                          (nu + 1.0) / 2.0 * tail;
        return -ll;
    };
    const auto [x, _] = boost::math::tools::brent_find_minima(negloglik, std::log(kMinNu), std::log(kMaxNu), 40);
    return std::clamp(std::exp(x), kMinNu, kMaxNu);
}

ReturnModel make_model(std::vector<std::string> symbols, Eigen::VectorXd mu, Eigen::MatrixXd cov, std::vector<double> nu) {
    const auto k = static_cast<Eigen::Index>(symbols.size());
    if (mu.size() != k || cov.rows() != k || cov.cols() != k)
        fail(Errc::invalid_parameter, "model dimensions do not match the asset list");
    if (nu.empty()) nu.assign(symbols.size(), kMaxNu);
    if (nu.size() != symbols.size()) fail(Errc::invalid_parameter, "one degrees-of-freedom value per asset required");
    ReturnModel m;
    m.symbols = std::move(symbols);
    m.mu = std::move(mu);
    m.cov = std::move(cov);
    m.nu = std::move(nu);
    const auto ch = cholesky(m.cov);
    m.L = ch.L;
    m.jitter = ch.jitter;
    return m;
}

ReturnModel estimate_model(const std::vector<std::string>& symbols, const Eigen::MatrixXd& returns,
                           std::size_t min_observations) {
    if (static_cast<std::size_t>(returns.cols()) != symbols.size())
        fail(Errc::invalid_parameter, "return matrix width does not match the asset list");
    const auto n = static_cast<std::size_t>(returns.rows());
    if (n < std::max<std::size_t>(min_observations, 2))
        fail(Errc::insufficient_data, "only " + std::to_string(n) + " return observations, need " + std::to_string(min_observations));
    const Eigen::VectorXd mu = returns.colwise().mean().transpose();
    const Eigen::MatrixXd centred = returns.rowwise() - mu.transpose();
    const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(n - 1);
    std::vector<double> nu;
    for (Eigen::Index j = 0; j < returns.cols(); ++j) {
        const double var = cov(j, j);
        if (!(var > 0.0)) fail(Errc::zero_variance, "asset '" + symbols[static_cast<std::size_t>(j)] + "' has zero variance");
        const double sd = std::sqrt(var);
        std::vector<double> z(n);
        for (std::size_t i = 0; i < n; ++i) z[i] = centred(static_cast<Eigen::Index>(i), j) / sd;
        nu.push_back(fit_t_dof(z));
    }
    ReturnModel m = make_model(symbols, mu, cov, nu);
    m.observations = n;
    return m;
}

nlohmann::json to_json(const ReturnModel& m) {
    nlohmann::json cov = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.cov.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cov.cols(); ++j) row.push_back(m.cov(i, j));
        cov.push_back(row);
    }
    return {{"symbols", m.symbols},
            {"mu", std::vector<double>(m.mu.data(), m.mu.data() + m.mu.size())},
            {"cov", cov},
            {"nu", m.nu},
            {"observations", m.observations},
            {"jitter", m.jitter}};
}

ReturnModel model_from_json(const nlohmann::json& j) {
    try {
        const auto symbols = j.at("symbols").get<std::vector<std::string>>();
        const auto k = static_cast<Eigen::Index>(symbols.size());
        const auto mu_v = j.at("mu").get<std::vector<double>>();
        Eigen::VectorXd mu = Eigen::Map<const Eigen::VectorXd>(mu_v.data(), static_cast<Eigen::Index>(mu_v.size()));
        Eigen::MatrixXd cov(k, k);
        const auto& rows = j.at("cov");
        if (static_cast<Eigen::Index>(rows.size()) != k) fail(Errc::schema_error, "cov must be square over the asset list");
        for (Eigen::Index a = 0; a < k; ++a) {
            if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(a)].size()) != k)
                fail(Errc::schema_error, "cov must be square over the asset list");
            for (Eigen::Index b = 0; b < k; ++b) cov(a, b) = rows[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)].get<double>();
        }
        ReturnModel m = make_model(symbols, mu, cov, j.value("nu", std::vector<double>{}));
        m.observations = j.value("observations", std::size_t{0});
        return m;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::schema_error, std::string("bad model json: ") + e.what());
    }
}

Sampler::Sampler(const ReturnModel& model, Distribution dist) : model_(model), dist_(dist) {
    if (dist_ == Distribution::StudentT) {
        for (double nu : model_.nu) {
            if (!(nu > 2.0)) fail(Errc::invalid_parameter, "Student-t sampling needs nu > 2");
            t_scale_.push_back(1.0 / std::sqrt(nu / (nu - 2.0)));
        }
    }
}

void Sampler::sample(Rng& rng, Eigen::MatrixXd& out, Eigen::Index slots) const {
    const auto m = static_cast<Eigen::Index>(model_.size());
    out.resize(m, slots);
    if (dist_ == Distribution::Normal) {
        std::normal_distribution<double> z;
        for (Eigen::Index t = 0; t < slots; ++t)
            for (Eigen::Index a = 0; a < m; ++a) out(a, t) = z(rng);
    } else {
        std::vector<std::student_t_distribution<double>> d;
        for (double nu : model_.nu) d.emplace_back(nu);
        for (Eigen::Index t = 0; t < slots; ++t)
            for (Eigen::Index a = 0; a < m; ++a)
                out(a, t) = d[static_cast<std::size_t>(a)](rng) * t_scale_[static_cast<std::size_t>(a)];
    }
    out = model_.L.triangularView<Eigen::Lower>() * out;
    out.colwise() += model_.mu;
}

double gbm_terminal(double s0, double mu, double sigma, double t, double w) {
    return s0 * std::exp((mu - sigma * sigma / 2.0) * t + sigma * w);
}

}  // namespace crocodai::risk
