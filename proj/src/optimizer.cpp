#include "crocodai/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace crocodai::opt {
namespace {

constexpr double kBoundTol = 1e-12;

double objective(const Eigen::MatrixXd& c, const Eigen::VectorXd& v) { return v.dot(c * v); }

bool feasible(const Eigen::VectorXd& v, const Eigen::VectorXd& upper, double tol) {
    return std::abs(v.sum() - 1.0) <= tol && (v.array() >= -tol).all() && ((v - upper).array() <= tol).all();
}

// Solve the equality-constrained problem on the free coordinates of v,
// holding the others at their current bound.
std::optional<Eigen::VectorXd> polish(const QpProblem& p, const Eigen::VectorXd& v) {
    const Eigen::Index n = v.size();
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i)
        if (v(i) > kBoundTol && v(i) < p.upper(i) - kBoundTol) free.push_back(i);
    if (free.empty()) return std::nullopt;
    Eigen::VectorXd fixed(n);
    for (Eigen::Index i = 0; i < n; ++i) fixed(i) = v(i) <= kBoundTol ? 0.0 : p.upper(i);
    for (auto i : free) fixed(i) = 0.0;

    const auto k = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k + 1, k + 1);
    Eigen::VectorXd b(k + 1);
    const Eigen::VectorXd cross = 2.0 * p.cov * fixed;
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index c = 0; c < k; ++c) A(a, c) = 2.0 * p.cov(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(c)]);
        A(a, k) = -1.0;
        A(k, a) = 1.0;
        b(a) = -cross(free[static_cast<std::size_t>(a)]);
    }
    b(k) = 1.0 - fixed.sum();
    const Eigen::VectorXd x = A.fullPivLu().solve(b);
    if (!x.allFinite() || (A * x - b).norm() > 1e-9 * (1.0 + b.norm())) return std::nullopt;
    Eigen::VectorXd out = fixed;
    for (Eigen::Index a = 0; a < k; ++a) out(free[static_cast<std::size_t>(a)]) = x(a);
    if (!feasible(out, p.upper, 1e-12)) return std::nullopt;
    return out.cwiseMax(0.0).cwiseMin(p.upper);
}

}  // namespace

void QpProblem::validate() const {
    const Eigen::Index n = cov.rows();
    if (n == 0 || cov.cols() != n || upper.size() != n) fail(Errc::invalid_parameter, "covariance and bounds must agree in size");
    if (!symbols.empty() && static_cast<Eigen::Index>(symbols.size()) != n)
        fail(Errc::invalid_parameter, "one symbol per asset required");
    if (!cov.allFinite() || !upper.allFinite()) fail(Errc::invalid_parameter, "non-finite problem data");
    if ((upper.array() <= 0.0).any() || (upper.array() > 1.0).any()) fail(Errc::invalid_parameter, "caps must lie in (0, 1]");
    if (upper.sum() < 1.0 - 1e-12) fail(Errc::infeasible, "caps sum to less than 1");
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1e-300, cov.cwiseAbs().maxCoeff()))
        fail(Errc::invalid_parameter, "covariance is not symmetric");
    const double low = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    if (low < -1e-10 * std::max(1e-300, cov.diagonal().maxCoeff())) fail(Errc::not_positive_definite, "covariance is not PSD");
}

Eigen::VectorXd project_box_simplex(const Eigen::VectorXd& y, const Eigen::VectorXd& upper) {
    // g(tau) = sum clamp(y_i - tau, 0, u_i) is continuous, non-increasing and
    // piecewise linear with breakpoints y_i - u_i and y_i; find g(tau) = 1.
    const Eigen::Index n = y.size();
    auto g = [&](double tau) { return (y.array() - tau).max(0.0).min(upper.array()).sum(); };
    std::vector<double> bp;
    bp.reserve(static_cast<std::size_t>(2 * n));
    for (Eigen::Index i = 0; i < n; ++i) {
        bp.push_back(y(i) - upper(i));
        bp.push_back(y(i));
    }
    std::sort(bp.begin(), bp.end());
    // g(bp.front()) = sum(upper) >= 1 and g(bp.back()) = 0
    std::size_t lo = 0, hi = bp.size() - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        (g(bp[mid]) >= 1.0 ? lo : hi) = mid;
    }
    const double g_lo = g(bp[lo]), g_hi = g(bp[hi]);
    double tau = bp[lo];
    if (g_lo > g_hi) tau = bp[lo] + (g_lo - 1.0) * (bp[hi] - bp[lo]) / (g_lo - g_hi);
    Eigen::VectorXd v = (y.array() - tau).max(0.0).min(upper.array()).matrix();
    // absorb the last rounding error in the first coordinate with slack
    const double err = 1.0 - v.sum();
    for (Eigen::Index i = 0; i < n && err != 0.0; ++i) {
        const double room = err > 0 ? upper(i) - v(i) : v(i);
        if (room > std::abs(err) && v(i) > 0.0) {
            v(i) += err;
            break;
        }
    }
    return v;
}

double kkt_residual(const Eigen::VectorXd& v, const QpProblem& p) {
    if (v.size() != p.cov.rows()) fail(Errc::invalid_parameter, "weight vector has the wrong size");
    if (!feasible(v, p.upper, 1e-8)) fail(Errc::infeasible, "point is not feasible");
    const Eigen::VectorXd g = 2.0 * p.cov * v;
    // free or at lower bound: g_i >= nu ; free or at upper bound: g_i <= nu
    double a = std::numeric_limits<double>::infinity();
    double b = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const bool at_upper = v(i) >= p.upper(i) - kBoundTol;
        const bool at_lower = v(i) <= kBoundTol;
        if (!at_upper) a = std::min(a, g(i));
        if (!at_lower) b = std::max(b, g(i));
    }
    const double scale = 2.0 * p.cov.diagonal().maxCoeff();
    if (!(scale > 0.0) || a >= b) return 0.0;
    return (b - a) / 2.0 / scale;
}

QpSolution min_variance(const QpProblem& p, const SolverOptions& opt) {
    p.validate();
    const Eigen::Index n = p.cov.rows();
    QpSolution s;
    s.v = project_box_simplex(Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)), p.upper);
    const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p.cov, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    if (!(lmax > 0.0)) {
        s.objective = 0.0;
        s.kkt = 0.0;
        return s;
    }
    const double step = 1.0 / (2.0 * lmax);
    double obj = objective(p.cov, s.v);
    s.kkt = kkt_residual(s.v, p);
    while (s.kkt >= opt.tolerance && s.iterations < opt.max_iterations) {
        s.v = project_box_simplex(s.v - step * 2.0 * (p.cov * s.v), p.upper);
        obj = objective(p.cov, s.v);
        ++s.iterations;
        if (opt.record_history) s.history.push_back(obj);
        if (s.iterations % opt.polish_every == 0 || s.iterations == 1) {
            if (auto q = polish(p, s.v)) {
                const double qobj = objective(p.cov, *q);
                const double qkkt = kkt_residual(*q, p);
                if (qobj <= obj + 1e-15 * std::abs(obj) && qkkt < opt.tolerance) {
                    s.v = *q;
                    obj = qobj;
                    s.polished = true;
                    if (opt.record_history) s.history.push_back(obj);
                }
            }
        }
        s.kkt = kkt_residual(s.v, p);
    }
    s.objective = obj;
    return s;
}

std::vector<double> debt_ceilings_from(const Eigen::VectorXd& v, double beta) {
    if (!(beta > 0.0)) fail(Errc::invalid_parameter, "flexibility margin must be positive");
    std::vector<double> z;
    for (Eigen::Index i = 0; i < v.size(); ++i) z.push_back(std::min(1.0, (1.0 + beta) * v(i)));
    return z;
}

Eigen::VectorXd random_feasible(const Eigen::VectorXd& upper, Rng& rng, long max_tries) {
    if (upper.sum() < 1.0) fail(Errc::infeasible, "caps sum to less than 1");
    std::exponential_distribution<double> e(1.0);
    Eigen::VectorXd v(upper.size());
    for (long t = 0; t < max_tries; ++t) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = e(rng);
        v /= v.sum();
        if (((v - upper).array() <= 0.0).all()) return v;
    }
    fail(Errc::infeasible, "rejection sampling found no point under the caps");
}

nlohmann::json to_json(const QpSolution& s, const QpProblem& p) {
    nlohmann::json w = nlohmann::json::object();
    for (Eigen::Index i = 0; i < s.v.size(); ++i) {
        const std::string key = p.symbols.empty() ? std::to_string(i) : p.symbols[static_cast<std::size_t>(i)];
        w[key] = s.v(i);
    }
    return {{"weights", w}, {"objective", s.objective}, {"kkt_residual", s.kkt}, {"iterations", s.iterations}};
}

}  // namespace crocodai::opt
