#include "vmot/distributions.hpp"

#include "vmot/csv.hpp"
#include "vmot/errors.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>

namespace vmot {

namespace {

constexpr double kMassTol = 1e-12;
constexpr double kOrderTol = 1e-9;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double std_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// Index of the first grid cell boundary >= x, clamped.
std::size_t upper_cell(const std::vector<double>& grid, double x) {
    return static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), x) - grid.begin());
}

}  // namespace

double open_uniform(Rng& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

Marginal1D Marginal1D::normal(double mean, double stddev) {
    if (!(stddev > 0.0) || !std::isfinite(mean) || !std::isfinite(stddev)) {
        throw DomainError("normal: stddev must be positive and finite");
    }
    return Marginal1D(Normal{mean, stddev});
}

Marginal1D Marginal1D::discrete(std::vector<double> atoms, std::vector<double> weights) {
    if (atoms.empty() || atoms.size() != weights.size()) {
        throw DomainError("discrete: atoms and weights must be nonempty and of equal length");
    }
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        if (!std::isfinite(atoms[k])) throw DomainError("discrete: non-finite atom");
        if (k > 0 && !(atoms[k] > atoms[k - 1])) {
            throw DomainError("discrete: atoms must be strictly increasing");
        }
        if (!(weights[k] >= 0.0)) throw DomainError("discrete: negative weight");
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(total - 1.0) > kMassTol) {
        throw DomainError("discrete: weights must sum to 1");
    }
    return Marginal1D(Discrete{std::move(atoms), std::move(weights)});
}

Marginal1D Marginal1D::empirical(std::vector<double> values) {
    if (values.empty()) throw DomainError("empirical: no values");
    std::map<double, double> counts;
    for (double v : values) counts[v] += 1.0;
    std::vector<double> atoms, weights;
    const double n = static_cast<double>(values.size());
    for (auto [a, c] : counts) {
        atoms.push_back(a);
        weights.push_back(c / n);
    }
    // Fold rounding residue into the largest atom so the simplex check holds.
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    weights[std::max_element(weights.begin(), weights.end()) - weights.begin()] += 1.0 - total;
    return discrete(std::move(atoms), std::move(weights));
}

Marginal1D Marginal1D::tabulated(std::vector<double> grid, std::vector<double> cdf) {
    if (grid.size() < 2 || grid.size() != cdf.size()) {
        throw DomainError("tabulated: need at least two (x, cdf) points");
    }
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!std::isfinite(grid[k]) || !std::isfinite(cdf[k])) {
            throw DomainError("tabulated: non-finite entry");
        }
        if (k > 0 && !(grid[k] > grid[k - 1])) {
            throw DomainError("tabulated: grid must be strictly increasing");
        }
        if (k > 0 && cdf[k] < cdf[k - 1]) throw DomainError("tabulated: cdf must be nondecreasing");
    }
    if (cdf.front() > kMassTol || cdf.front() < -kMassTol) {
        throw DomainError("tabulated: cdf must start at 0");
    }
    if (cdf.back() < 1.0 - kMassTol || cdf.back() > 1.0 + kMassTol) {
        throw DomainError("tabulated: cdf must end at 1");
    }
    cdf.front() = 0.0;
    cdf.back() = 1.0;
    return Marginal1D(Tabulated{std::move(grid), std::move(cdf)});
}

Marginal1D Marginal1D::uniform(double lo, double hi) {
    if (!(hi > lo)) throw DomainError("uniform: need lo < hi");
    return tabulated({lo, hi}, {0.0, 1.0});
}

double Marginal1D::cdf(double x) const {
    return std::visit(
        overloaded{
            [x](const Normal& n) { return std_normal_cdf((x - n.mean) / n.stddev); },
            [x](const Discrete& d) {
                const auto end = std::upper_bound(d.atoms.begin(), d.atoms.end(), x);
                const auto k = static_cast<std::size_t>(end - d.atoms.begin());
                return std::min(1.0, std::accumulate(d.weights.begin(), d.weights.begin() + k, 0.0));
            },
            [x](const Tabulated& t) {
                if (x <= t.grid.front()) return 0.0;
                if (x >= t.grid.back()) return 1.0;
                const std::size_t k = upper_cell(t.grid, x);
                const double a = t.grid[k - 1], b = t.grid[k];
                return t.cdf[k - 1] + (t.cdf[k] - t.cdf[k - 1]) * (x - a) / (b - a);
            },
        },
        kind_);
}

double Marginal1D::cdf_left(double x) const {
    if (const auto* d = std::get_if<Discrete>(&kind_)) {
        const auto end = std::lower_bound(d->atoms.begin(), d->atoms.end(), x);
        const auto k = static_cast<std::size_t>(end - d->atoms.begin());
        return std::accumulate(d->weights.begin(), d->weights.begin() + k, 0.0);
    }
    return cdf(x);
}

double Marginal1D::quantile(double u) const {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("quantile: u must lie in (0,1)");
    return std::visit(
        overloaded{
            [u](const Normal& n) {
                // erfc_inv keeps full relative accuracy in both tails
                const double z = u < 0.5 ? -boost::math::erfc_inv(2.0 * u) : boost::math::erfc_inv(2.0 * (1.0 - u));
                return n.mean + n.stddev * std::numbers::sqrt2 * z;
            },
            [u](const Discrete& d) {
                double acc = 0.0;
                for (std::size_t k = 0; k + 1 < d.atoms.size(); ++k) {
                    acc += d.weights[k];
                    if (acc >= u) return d.atoms[k];
                }
                return d.atoms.back();
            },
            [u](const Tabulated& t) {
                // first k with cdf[k] >= u; cdf[0] = 0 < u so k >= 1
                const auto it = std::lower_bound(t.cdf.begin(), t.cdf.end(), u);
                const auto k = static_cast<std::size_t>(it - t.cdf.begin());
                if (k >= t.cdf.size()) return t.grid.back();
                const double c0 = t.cdf[k - 1], c1 = t.cdf[k];
                const double a = t.grid[k - 1], b = t.grid[k];
                return a + (u - c0) / (c1 - c0) * (b - a);
            },
        },
        kind_);
}

double Marginal1D::mean() const {
    return std::visit(overloaded{
                          [](const Normal& n) { return n.mean; },
                          [](const Discrete& d) {
                              return std::inner_product(d.atoms.begin(), d.atoms.end(),
                                                        d.weights.begin(), 0.0);
                          },
                          [](const Tabulated& t) {
                              double m = 0.0;
                              for (std::size_t k = 1; k < t.grid.size(); ++k) {
                                  m += (t.cdf[k] - t.cdf[k - 1]) * 0.5 * (t.grid[k] + t.grid[k - 1]);
                              }
                              return m;
                          },
                      },
                      kind_);
}

double Marginal1D::second_moment() const {
    return std::visit(overloaded{
                          [](const Normal& n) { return n.mean * n.mean + n.stddev * n.stddev; },
                          [](const Discrete& d) {
                              double s = 0.0;
                              for (std::size_t k = 0; k < d.atoms.size(); ++k) {
                                  s += d.weights[k] * d.atoms[k] * d.atoms[k];
                              }
                              return s;
                          },
                          [](const Tabulated& t) {
                              double s = 0.0;
                              for (std::size_t k = 1; k < t.grid.size(); ++k) {
                                  const double a = t.grid[k - 1], b = t.grid[k];
                                  s += (t.cdf[k] - t.cdf[k - 1]) * (a * a + a * b + b * b) / 3.0;
                              }
                              return s;
                          },
                      },
                      kind_);
}

double Marginal1D::variance() const {
    const double m = mean();
    return std::max(0.0, second_moment() - m * m);
}

double Marginal1D::abs_deviation(double x) const {
    return std::visit(
        overloaded{
            [x](const Normal& n) {
                const double z = (x - n.mean) / n.stddev;
                return n.stddev * (2.0 * std_normal_pdf(z) + z * (2.0 * std_normal_cdf(z) - 1.0));
            },
            [x](const Discrete& d) {
                double s = 0.0;
                for (std::size_t k = 0; k < d.atoms.size(); ++k) s += d.weights[k] * std::abs(x - d.atoms[k]);
                return s;
            },
            [x](const Tabulated& t) {
                double s = 0.0;
                for (std::size_t k = 1; k < t.grid.size(); ++k) {
                    const double p = t.cdf[k] - t.cdf[k - 1];
                    if (p <= 0.0) continue;
                    const double a = t.grid[k - 1], b = t.grid[k];
                    if (x <= a) {
                        s += p * (0.5 * (a + b) - x);
                    } else if (x >= b) {
                        s += p * (x - 0.5 * (a + b));
                    } else {
                        s += p * ((x - a) * (x - a) + (b - x) * (b - x)) / (2.0 * (b - a));
                    }
                }
                return s;
            },
        },
        kind_);
}

std::pair<double, double> Marginal1D::effective_support() const {
    return std::visit(overloaded{
                          [](const Normal& n) {
                              return std::pair{n.mean - 8.0 * n.stddev, n.mean + 8.0 * n.stddev};
                          },
                          [](const Discrete& d) { return std::pair{d.atoms.front(), d.atoms.back()}; },
                          [](const Tabulated& t) { return std::pair{t.grid.front(), t.grid.back()}; },
                      },
                      kind_);
}

PotentialFn potential(const Marginal1D& m, std::span<const double> grid) {
    if (grid.empty()) throw DomainError("potential: empty grid");
    if (!std::is_sorted(grid.begin(), grid.end())) throw DomainError("potential: grid must be sorted");
    PotentialFn p{m, {grid.begin(), grid.end()}, {}};
    p.values.reserve(grid.size());
    for (double x : grid) p.values.push_back(m.abs_deviation(x));
    return p;
}

std::vector<double> default_order_grid(const Marginal1D& mu, const Marginal1D& nu, std::size_t points) {
    if (points < 2) throw DomainError("default_order_grid: need at least 2 points");
    const auto [a0, b0] = mu.effective_support();
    const auto [a1, b1] = nu.effective_support();
    double lo = std::min(a0, a1), hi = std::max(b0, b1);
    const double pad = 0.1 * std::max(hi - lo, 1e-12);
    lo -= pad;
    hi += pad;
    std::vector<double> g(points);
    for (std::size_t k = 0; k < points; ++k) {
        g[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
    }
    return g;
}

bool convex_order(const Marginal1D& mu, const Marginal1D& nu, std::span<const double> grid) {
    if (std::abs(mu.mean() - nu.mean()) > kOrderTol) return false;
    for (double x : grid) {
        if (mu.abs_deviation(x) > nu.abs_deviation(x) + kOrderTol) return false;
    }
    return true;
}

bool convex_order(const Marginal1D& mu, const Marginal1D& nu) {
    const auto grid = default_order_grid(mu, nu);
    return convex_order(mu, nu, grid);
}

const char* to_string(Irreducibility r) {
    switch (r) {
        case Irreducibility::Irreducible: return "irreducible";
        case Irreducibility::Degenerate: return "reducible/degenerate";
        case Irreducibility::Split: return "reducible/split";
        case Irreducibility::MassOutside: return "reducible/mass-outside";
    }
    return "?";
}

Irreducibility irreducibility(const Marginal1D& mu, const Marginal1D& nu, std::span<const double> grid) {
    if (!convex_order(mu, nu, grid)) {
        throw PreconditionError("irreducible: pair is not in convex order");
    }
    std::size_t runs = 0, first = 0, last = 0;
    bool inside = false;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const bool strict = mu.abs_deviation(grid[k]) < nu.abs_deviation(grid[k]) - kOrderTol;
        if (strict && !inside) {
            ++runs;
            if (runs == 1) first = k;
        }
        if (strict) last = k;
        inside = strict;
    }
    if (runs == 0) return Irreducibility::Degenerate;
    if (runs > 1) return Irreducibility::Split;
    const double mass = mu.cdf(grid[last]) - mu.cdf_left(grid[first]);
    return mass >= 1.0 - kOrderTol ? Irreducibility::Irreducible : Irreducibility::MassOutside;
}

bool irreducible(const Marginal1D& mu, const Marginal1D& nu, std::span<const double> grid) {
    return irreducibility(mu, nu, grid) == Irreducibility::Irreducible;
}

Marginal1D load_tabulated_csv(const std::string& path) {
    const auto table = csv::read(path);
    if (table.header.size() != 2) throw ParseError("tabulated CSV must have two columns (x, cdf)", 1);
    std::vector<double> grid, cdf;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        grid.push_back(csv::to_double(table.rows[r][0], table.lines[r]));
        cdf.push_back(csv::to_double(table.rows[r][1], table.lines[r]));
    }
    try {
        return Marginal1D::tabulated(std::move(grid), std::move(cdf));
    } catch (const DomainError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void save_tabulated_csv(const Marginal1D& m, const std::string& path) {
    const auto* t = std::get_if<Marginal1D::Tabulated>(&m.kind());
    if (!t) throw UnsupportedError("save_tabulated_csv: marginal is not tabulated");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "x,cdf\n";
    for (std::size_t k = 0; k < t->grid.size(); ++k) {
        out << csv::format(t->grid[k]) << ',' << csv::format(t->cdf[k]) << '\n';
    }
}

}  // namespace vmot
