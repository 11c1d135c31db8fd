#pragma once

#include "vmot/distributions.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace vmot {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Function on a rectangular grid. Values are stored row-major with the last
/// axis varying fastest; +inf marks points outside the effective domain.
class GridFn {
public:
    GridFn() = default;
    GridFn(std::vector<std::vector<double>> axes, std::vector<double> values);
    static GridFn tabulate(std::vector<std::vector<double>> axes,
                           const std::function<double(std::span<const double>)>& f);

    std::size_t dim() const noexcept { return axes_.size(); }
    std::size_t size() const noexcept { return values_.size(); }
    const std::vector<std::vector<double>>& axes() const noexcept { return axes_; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::vector<std::size_t> shape() const;

    std::size_t flat_index(std::span<const std::size_t> idx) const;
    std::vector<std::size_t> multi_index(std::size_t flat) const;
    std::vector<double> point(std::size_t flat) const;
    double operator[](std::size_t flat) const { return values_[flat]; }
    double at(std::span<const std::size_t> idx) const { return values_[flat_index(idx)]; }

    GridFn negated() const;

    /// CSV columns x_1..x_d,value. Loading requires every grid point exactly once.
    void save_csv(const std::string& path) const;
    static GridFn load_csv(const std::string& path);

private:
    std::vector<std::vector<double>> axes_;
    std::vector<double> values_;
    std::vector<std::size_t> strides_;
};

struct AffinePiece {
    Eigen::VectorXd slope;
    double intercept = 0.0;
    double operator()(std::span<const double> x) const;
};

enum class Modularity { Submodular, Supermodular, StrictlySub, StrictlySuper, Neither };

const char* to_string(Modularity m);

/// Flags certified on the grid. A modular function carries both
/// `submodular` and `supermodular`.
struct ModularityReport {
    bool submodular = true;
    bool supermodular = true;
    bool strictly_sub = true;
    bool strictly_super = true;
    /// Largest violation of each inequality over all tested rectangles.
    double sub_violation = 0.0;
    double super_violation = 0.0;

    /// Strict classes first, then Submodular before Supermodular.
    Modularity classification() const;
};

/// Tests every elementary 2x2 rectangle in every coordinate pair.
/// Non-strict inequalities use tolerance rel_tol * max(1, |corner values|);
/// strict ones need a margin above 1e-12.
ModularityReport check_modularity(const GridFn& f, double rel_tol = 1e-12);

/// g(y) = max over finite grid points x of x.y - f(x), on the given dual axes.
GridFn legendre(const GridFn& f, std::vector<std::vector<double>> dual_axes);
/// Dual axes default to the bounding box of the primal axes, same resolution.
GridFn legendre(const GridFn& f);

/// Convex envelope at an arbitrary point: the minimum of sum l_k f(x_k) over
/// convex combinations of finite grid points with barycenter x, +inf outside
/// their hull.
double envelope_at(const GridFn& f, std::span<const double> x);

/// Exact envelope on the grid (envelope_at at every grid point).
GridFn convex_envelope(const GridFn& f);
/// legendre(legendre(f, dual_axes), f.axes()).
GridFn convex_envelope(const GridFn& f, const std::vector<std::vector<double>>& dual_axes);

/// Largest negative second divided difference along any axis over finite triples.
double axis_convexity_violation(const GridFn& f);

/// Random submodular function on a random grid: separable terms, negative
/// products of increasing functions and concave functions of positive sums.
GridFn random_submodular(std::size_t d, Rng& rng);
GridFn random_supermodular(std::size_t d, Rng& rng);

struct ConjugateSuiteReport {
    int trials = 0;
    int sub_to_super = 0;      // passes among `trials` cases
    int super_to_sub = 0;
    int envelope_preserved = 0;
    std::vector<std::string> counterexamples;
    bool ok() const { return counterexamples.empty(); }
};

/// Runs the three conjugacy checks `trials` times each; seeds are deterministic.
ConjugateSuiteReport conjugate_modularity_suite(std::uint64_t seed, int trials);

/// The twelve-vertex function on {0,1} x {0,1} x {-1,0,1}.
GridFn cube_beta0();
/// L1 = 0, L2 = y1 + y2 - y3 - 1, L3 = 2 y1 - y3 - 1.
std::vector<AffinePiece> cube_pieces();

struct CubeReport {
    bool beta0_submodular = false;
    bool envelope_matches = false;
    double max_envelope_error = 0.0;
    double lhs = 0.0;   // env(u) + env(u')
    double rhs = 0.0;   // env(ubar) + env(ubar')
    bool strict_gap = false;
};

/// Checks the fixture and throws FixtureError if any assertion fails.
CubeReport verify_cube_counterexample();

}  // namespace vmot
