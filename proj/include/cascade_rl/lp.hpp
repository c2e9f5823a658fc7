#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace cascade_rl {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// min cost'x + offset
///   s.t. eq_rows x = eq_rhs
///        ineq_lower <= ineq_rows x <= ineq_upper
///        lower <= x <= upper
struct LpProblem {
    std::vector<double> cost;
    double offset = 0.0;
    std::vector<double> lower;
    std::vector<double> upper;
    Eigen::MatrixXd eq_rows;
    std::vector<double> eq_rhs;
    Eigen::MatrixXd ineq_rows;
    std::vector<double> ineq_lower;
    std::vector<double> ineq_upper;

    std::size_t n_vars() const noexcept { return cost.size(); }

    /// Throws ConfigError when dimensions disagree or a bound pair is inverted.
    void check() const;
};

enum class LpStatus { optimal, infeasible };

/// Lagrange multipliers at an optimum. Sign convention (minimisation):
/// cost - eq_rows' * eq - ineq_rows' * ineq - reduced = 0, with a multiplier
/// >= 0 attached to a lower bound and <= 0 attached to an upper bound.
struct LpDuals {
    std::vector<double> eq;
    std::vector<double> ineq;
    std::vector<double> reduced;
};

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    std::vector<double> x;
    double objective = 0.0; // includes the offset
    LpDuals duals;
    int iterations = 0;
    double infeasibility = 0.0; // phase-1 residual when infeasible
};

struct SimplexOptions {
    double pivot_tol = 1e-9;
    double feasibility_tol = 1e-7;
    double optimality_tol = 1e-9;
    double harris_tol = 1e-10; // bound relaxation in the ratio test
    int max_iterations = 50000;
    int refactor_interval = 64;
    int degenerate_streak_for_bland = 50;
};

/// Bounded-variable revised simplex (phase 1 on artificials, phase 2 on the
/// true cost). Throws NumericalError when the iteration limit is hit.
LpSolution solve_lp(const LpProblem& lp, const SimplexOptions& options = {});

struct KktReport {
    double primal = 0.0;          // worst bound / row violation
    double dual = 0.0;            // worst stationarity residual or multiplier sign violation
    double complementarity = 0.0; // worst |multiplier| x distance to its bound
    std::string worst;            // description of the single largest violation

    bool ok(double tol = 1e-6) const noexcept { return primal < tol && dual < tol && complementarity < tol; }
};

/// Optimality audit of a candidate primal/dual pair.
KktReport check_kkt(const LpProblem& lp, const std::vector<double>& x, const LpDuals& duals);

} // namespace cascade_rl
