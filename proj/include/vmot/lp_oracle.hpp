#pragma once

#include "vmot/coupling.hpp"
#include "vmot/distributions.hpp"
#include "vmot/simplex.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace vmot {

/// Discrete VMOT instance. Rows of `x` and `y` are support points; the
/// marginals are discrete laws on the distinct coordinate values.
struct DiscreteVmot {
    Eigen::MatrixXd x;      // m x d
    Eigen::MatrixXd y;      // n x d
    std::vector<Marginal1D> mu;
    std::vector<Marginal1D> nu;
    Eigen::MatrixXd cost;   // m x n
    std::optional<DiscreteMeasure> fixed_pix;

    std::size_t dim() const { return static_cast<std::size_t>(x.cols()); }

    /// Supports are the products of the marginal atom sets.
    static DiscreteVmot from_marginals(std::vector<Marginal1D> mu, std::vector<Marginal1D> nu,
                                       const CostSpec& c);

    /// Throws DomainError on any shape or atom mismatch.
    void validate() const;

    /// Bundle files x_support.csv, y_support.csv, mu.csv, nu.csv, cost.csv and
    /// optionally fixed_pix.csv in `dir`.
    void save(const std::string& dir) const;
    static DiscreteVmot load(const std::string& dir);
};

enum class Direction { Maximize, Minimize };

StandardLp assemble(const DiscreteVmot& inst, Direction dir = Direction::Maximize);

struct LpSolution {
    Eigen::MatrixXd plan;   // m x n
    double value = 0.0;     // E[c] under the plan, in the original sense
    LpStatus status = LpStatus::Infeasible;
    double marginal_residual = 0.0;
    double martingale_residual = 0.0;

    /// Row sums as a measure on the x support (zero rows dropped).
    DiscreteMeasure x_marginal(const DiscreteVmot& inst) const;
    void save_plan_csv(const std::string& path) const;
};

LpSolution solve(const DiscreteVmot& inst, Direction dir = Direction::Maximize);

/// Largest marginal and martingale constraint residuals of `plan`.
std::pair<double, double> residuals(const DiscreteVmot& inst, const Eigen::MatrixXd& plan);

enum class CouplingTarget { Monotone, AntiMonotone };

struct MonotoneReport {
    LpSolution solution;
    double tv_distance = 0.0;
    Irreducibility pair1 = Irreducibility::Irreducible;
    Irreducibility pair2 = Irreducibility::Irreducible;
    bool irreducible = true;
    /// tv <= 1e-7 (only meaningful when `irreducible`)
    bool passed = false;
};

/// Solves a d = 2 instance and measures the total variation distance between
/// the optimal x-marginal and the (anti-)monotone coupling of mu_1, mu_2.
/// Reducible pairs are flagged, not rejected.
MonotoneReport verify_monotone_d2(const DiscreteVmot& inst, CouplingTarget target = CouplingTarget::Monotone);

/// Random irreducible d = 2 instance with at most 8 atoms per marginal and
/// cost eps x1 x2 + y1 y2, eps in [0.05, 1]. Each mu_i has 2 or 3 atoms in
/// [-1, 4]; the kernel of an atom x mixes the endpoints -2, 5 with x +- 1/2.
DiscreteVmot random_monotone_instance(Rng& rng);

/// Twelve vertices of the stacked cubes, in the order of cube_beta0's grid.
std::vector<std::vector<double>> cube_vertices();

struct CounterexampleReport {
    double free_value = 0.0;
    double fixed_value = 0.0;
    double gap = 0.0;
    /// Smallest slack of the explicit dual over the x-atom grid times the vertex set.
    double dual_min_slack = 0.0;
    /// Largest slack on the support of the constructed plan.
    double dual_max_support_slack = 0.0;
    double dual_value = 0.0;
    double constructed_value = 0.0;
};

/// The three-asset instance with c(y) = y1 y2 + y2 y3 + y3 y1.
DiscreteVmot counterexample_instance();
/// Checks the fixture and throws FixtureError if any assertion fails.
CounterexampleReport counterexample_d3();

}  // namespace vmot
