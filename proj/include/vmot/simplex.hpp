#pragma once

#include <Eigen/Core>

namespace vmot {

enum class LpStatus { Optimal, Infeasible, Unbounded };

const char* to_string(LpStatus s);

/// minimize c.x  subject to  A x = b, x >= 0
struct StandardLp {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::VectorXd c;
};

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    Eigen::VectorXd x;
    /// Multipliers of the equality rows (zero on rows found redundant).
    Eigen::VectorXd y;
    double value = 0.0;
    int iterations = 0;
};

/// Dense two-phase tableau simplex. Dantzig pricing, switching to Bland's rule
/// after a run of degenerate pivots. The final basic solution is recomputed
/// from the original data with a pivoted LU solve.
LpResult solve_lp(const StandardLp& lp, double tol = 1e-9);

}  // namespace vmot
