#pragma once

// Minimum-variance portfolio under a budget and per-asset caps:
//   min v' C v  s.t.  sum v = 1,  0 <= v_i <= upper_i

#include "crocodai/error.hpp"
#include "crocodai/rng.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <string>
#include <vector>

namespace crocodai::opt {

struct QpProblem {
    Eigen::MatrixXd cov;
    Eigen::VectorXd upper;
    std::vector<std::string> symbols;  // optional, for reporting

    /// Throws Errc::infeasible when sum(upper) < 1 and Errc::invalid_parameter
    /// on malformed input.
    void validate() const;
};

struct QpSolution {
    Eigen::VectorXd v;
    double objective = 0.0;
    double kkt = 0.0;
    int iterations = 0;
    bool polished = false;
    std::vector<double> history;  // objective after each gradient step
};

struct SolverOptions {
    double tolerance = 1e-9;
    int max_iterations = 100'000;
    int polish_every = 25;
    bool record_history = false;
};

/// Euclidean projection of y onto {sum v = 1, 0 <= v <= upper}.
Eigen::VectorXd project_box_simplex(const Eigen::VectorXd& y, const Eigen::VectorXd& upper);

QpSolution min_variance(const QpProblem& p, const SolverOptions& opt = {});

/// Largest stationarity violation over coordinates for the best budget
/// multiplier, divided by 2 max_i C_ii so the value does not depend on the
/// scale of C. Throws Errc::infeasible for points outside the feasible set.
double kkt_residual(const Eigen::VectorXd& v, const QpProblem& p);

/// zeta_m = min(1, (1 + beta) v_m)
std::vector<double> debt_ceilings_from(const Eigen::VectorXd& v, double beta);

/// Uniform draw on the capped simplex by rejection from Dirichlet(1).
Eigen::VectorXd random_feasible(const Eigen::VectorXd& upper, Rng& rng, long max_tries = 100'000'000);

nlohmann::json to_json(const QpSolution& s, const QpProblem& p);

}  // namespace crocodai::opt
