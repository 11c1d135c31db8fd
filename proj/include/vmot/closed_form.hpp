#pragma once

#include "vmot/coupling.hpp"
#include "vmot/distributions.hpp"
#include "vmot/neural_dual.hpp"

#include <Eigen/Core>

#include <cstdint>

namespace vmot {

/// Centered normal marginals X_i ~ N(0, sigma_i^2), Y_i ~ N(0, rho_i^2) with the
/// covariance payoff sum_{i<j} a_ij x_i x_j + b_ij y_i y_j.
struct GaussianInstance {
    Eigen::VectorXd sigma;
    Eigen::VectorXd rho;
    Eigen::MatrixXd a;   // strict upper triangle read, nonnegative
    Eigen::MatrixXd b;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(sigma.size()); }
    /// sqrt(rho_i^2 - sigma_i^2)
    Eigen::VectorXd lambda() const;
    void validate() const;

    CostSpec cost() const;
    VmotInstance instance() const;

    /// sigma_i in [1,2], rho_i in [2,3], a = 0, b_ij = w_i w_j with w uniform on
    /// [0,1] normalized to sum 1.
    static GaussianInstance random(std::size_t d, Rng& rng);
};

/// sum_{i<j} (a_ij + b_ij) sigma_i sigma_j + b_ij lambda_i lambda_j
double exact_value(const GaussianInstance& g);

struct PathSamples {
    Eigen::MatrixXd x;   // d x n
    Eigen::MatrixXd y;
};

/// X_i = sigma_i U, Y_i = X_i + lambda_i Z with independent standard normals U, Z.
PathSamples sample_optimal_martingale(const GaussianInstance& g, std::size_t n, std::uint64_t seed);

}  // namespace vmot
