#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace vmot {

using Rng = std::mt19937_64;

/// Uniform draw on the open interval (0,1) with 53 bits of resolution.
double open_uniform(Rng& rng);

/// One-dimensional probability law with finite first moment.
///
/// Three representations are supported:
///  - Normal(mean, stddev)
///  - Discrete: strictly increasing atoms with weights on the simplex
///  - Tabulated: a piecewise linear CDF on a strictly increasing grid, i.e.
///    a mixture of uniform laws on consecutive grid cells. This is the form
///    produced from option-implied densities.
class Marginal1D {
public:
    struct Normal {
        double mean;
        double stddev;
    };
    struct Discrete {
        std::vector<double> atoms;
        std::vector<double> weights;
    };
    struct Tabulated {
        std::vector<double> grid;
        std::vector<double> cdf;
    };
    using Kind = std::variant<Normal, Discrete, Tabulated>;

    static Marginal1D normal(double mean, double stddev);
    /// Atoms must be strictly increasing; weights nonnegative summing to 1 (1e-12).
    static Marginal1D discrete(std::vector<double> atoms, std::vector<double> weights);
    /// Equal-weight law on the given values (sorted and merged internally).
    static Marginal1D empirical(std::vector<double> values);
    /// cdf must be nondecreasing, start <= 1e-12 and end >= 1 - 1e-12.
    static Marginal1D tabulated(std::vector<double> grid, std::vector<double> cdf);
    static Marginal1D uniform(double lo, double hi);

    const Kind& kind() const noexcept { return kind_; }
    bool is_discrete() const noexcept { return std::holds_alternative<Discrete>(kind_); }

    /// P(X <= x)
    double cdf(double x) const;
    /// P(X < x)
    double cdf_left(double x) const;
    /// Generalized inverse inf{x : F(x) >= u}; u must lie in (0,1).
    double quantile(double u) const;

    double mean() const;
    double variance() const;
    /// E[X^2]
    double second_moment() const;
    /// E|X - x|, the potential function evaluated at one point.
    double abs_deviation(double x) const;

    double sample(Rng& rng) const { return quantile(open_uniform(rng)); }

    /// Interval carrying all (Discrete, Tabulated) or all but ~1e-15 (Normal,
    /// mean +- 8 sd) of the mass.
    std::pair<double, double> effective_support() const;

private:
    explicit Marginal1D(Kind k) : kind_(std::move(k)) {}
    Kind kind_;
};

/// u_m(x) = integral of |x - y| dm(y) sampled on a grid.
struct PotentialFn {
    Marginal1D source;
    std::vector<double> grid;
    std::vector<double> values;
};

PotentialFn potential(const Marginal1D& m, std::span<const double> grid);

/// Evenly spaced grid over the union of effective supports widened by 10%.
std::vector<double> default_order_grid(const Marginal1D& mu, const Marginal1D& nu,
                                       std::size_t points = 2001);

/// mu <=_c nu certified on the grid: equal means (1e-9) and u_mu <= u_nu + 1e-9.
bool convex_order(const Marginal1D& mu, const Marginal1D& nu, std::span<const double> grid);
bool convex_order(const Marginal1D& mu, const Marginal1D& nu);

enum class Irreducibility {
    Irreducible,
    Degenerate,    // u_mu == u_nu on the whole grid, the set I is empty
    Split,         // {u_mu < u_nu} has more than one component on the grid
    MassOutside,   // one component, but mu puts mass outside of it
};

const char* to_string(Irreducibility r);

/// Classifies the pair on the grid. Throws PreconditionError when the pair
/// is not in convex order.
Irreducibility irreducibility(const Marginal1D& mu, const Marginal1D& nu,
                              std::span<const double> grid);
bool irreducible(const Marginal1D& mu, const Marginal1D& nu, std::span<const double> grid);

/// Two-column CSV (x, cdf) with a one-line header.
Marginal1D load_tabulated_csv(const std::string& path);
void save_tabulated_csv(const Marginal1D& m, const std::string& path);

}  // namespace vmot
