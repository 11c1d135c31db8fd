#pragma once

#include "vmot/distributions.hpp"

#include <Eigen/Core>

#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace vmot {

/// Finitely supported probability measure on R^dim. Immutable once built.
class DiscreteMeasure {
public:
    DiscreteMeasure() = default;
    /// `points` is row-major, one atom per row of length `dim`.
    DiscreteMeasure(std::size_t dim, std::vector<double> points, std::vector<double> weights);
    static DiscreteMeasure from_points(const std::vector<std::vector<double>>& points,
                                       std::vector<double> weights);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return weights_.size(); }
    std::span<const double> point(std::size_t k) const {
        return {points_.data() + k * dim_, dim_};
    }
    double weight(std::size_t k) const { return weights_[k]; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    /// Law of coordinate i as a Discrete marginal (atoms merged).
    Marginal1D coordinate_marginal(std::size_t i) const;
    /// Every pair of atoms is componentwise comparable.
    bool is_monotone_support() const;

    /// CSV columns x_1..x_dim,weight.
    void save_csv(const std::string& path) const;
    static DiscreteMeasure load_csv(const std::string& path);

private:
    std::size_t dim_ = 0;
    std::vector<double> points_;
    std::vector<double> weights_;
};

/// Which period a single-period payoff from the derivative catalogue is applied to.
/// Both means f(x) + f(y), the two-period cap c1(x) + c2(y).
enum class Period { X, Y, Both };

/// Payoff c(x, y) on R^{2d}.
class CostSpec {
public:
    /// sum_{i<j} a_ij x_i x_j + b_ij y_i y_j; only the strict upper triangles
    /// are read and must be nonnegative.
    struct Covariance {
        Eigen::MatrixXd a, b;
    };
    /// (sum_i w_i y_i)^2
    struct PortfolioVariance {
        std::vector<double> w;
    };
    struct BasketCall {
        std::vector<double> a;
        double strike;
        Period period;
    };
    struct BasketPut {
        std::vector<double> a;
        double strike;
        Period period;
    };
    struct PutOnMax {
        double strike;
        Period period;
    };
    struct CallOnMin {
        double strike;
        Period period;
    };
    struct Custom {
        std::function<double(std::span<const double>, std::span<const double>)> f;
        bool declared_supermodular = false;
        std::string name = "custom";
    };
    using Kind = std::variant<Covariance, PortfolioVariance, BasketCall, BasketPut, PutOnMax,
                              CallOnMin, Custom>;

    static CostSpec covariance(Eigen::MatrixXd a, Eigen::MatrixXd b);
    /// a = 0, b_ij = w_i w_j for i < j.
    static CostSpec covariance_from_weights(std::span<const double> w);
    static CostSpec portfolio_variance(std::vector<double> w);
    static CostSpec basket_call(std::vector<double> a, double strike, Period p = Period::Y);
    static CostSpec basket_put(std::vector<double> a, double strike, Period p = Period::Y);
    static CostSpec put_on_max(double strike, Period p = Period::Y);
    static CostSpec call_on_min(double strike, Period p = Period::Y);
    static CostSpec custom(Custom c);

    const Kind& kind() const noexcept { return kind_; }
    /// Dimension implied by the coefficients, 0 if the payoff accepts any d.
    std::size_t dim() const;
    double scale() const noexcept { return scale_; }
    /// k * c
    CostSpec scaled(double k) const;
    std::string describe() const;

    double operator()(std::span<const double> x, std::span<const double> y) const;

private:
    explicit CostSpec(Kind k) : kind_(std::move(k)) {}
    Kind kind_;
    double scale_ = 1.0;
};

inline double eval_cost(const CostSpec& c, std::span<const double> x, std::span<const double> y) {
    return c(x, y);
}

struct Estimate {
    double mean = 0.0;
    double std_err = 0.0;
};

/// Pushforward of the midpoint grid u_k = (k - 1/2)/n under (F_1^-1, ..., F_d^-1).
/// Consecutive equal atoms are merged.
DiscreteMeasure monotone_coupling(std::span<const Marginal1D> marginals, std::size_t n_atoms);
/// u -> (F_1^-1(u), F_2^-1(1 - u)) on the same grid.
DiscreteMeasure anti_monotone_coupling(const Marginal1D& m1, const Marginal1D& m2, std::size_t n_atoms);

/// Exact comonotone coupling of discrete laws (merge of cumulative weights).
DiscreteMeasure monotone_coupling_exact(std::span<const Marginal1D> marginals);
DiscreteMeasure anti_monotone_coupling_exact(const Marginal1D& m1, const Marginal1D& m2);
/// Product measure of discrete laws.
DiscreteMeasure independent_coupling(std::span<const Marginal1D> marginals);

/// Exact weighted sum. A measure of dimension 2d is read as (x, y); one of
/// dimension d as the constant path (x, x).
Estimate expectation(const DiscreteMeasure& m, const CostSpec& c);

/// Draws one path (x, y) into the given buffers.
using PathSampler = std::function<void(Rng&, std::span<double>, std::span<double>)>;

/// Independent coupling of mu_1..mu_d, nu_1..nu_d.
PathSampler independent_sampler(std::vector<Marginal1D> mus, std::vector<Marginal1D> nus);

/// Sample mean and standard error over n paths.
Estimate expectation(const PathSampler& sampler, std::size_t d, const CostSpec& c,
                     std::size_t n_samples, Rng& rng);

struct OtBounds {
    double upper;
    double lower;
};

/// Upper bound from the monotone coupling of the nus, lower bound from the
/// anti-monotone one (d = 2 only). Paths are evaluated as (y, y).
OtBounds ot_bounds(std::span<const Marginal1D> nus, const CostSpec& c, std::size_t n_atoms);
double ot_upper(std::span<const Marginal1D> nus, const CostSpec& c, std::size_t n_atoms);

}  // namespace vmot
