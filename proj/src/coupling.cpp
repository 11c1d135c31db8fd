#include "vmot/coupling.hpp"

#include "vmot/csv.hpp"
#include "vmot/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace vmot {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double positive(double t) { return t > 0.0 ? t : 0.0; }

// Applies a single-period payoff according to the period selector.
template <class F>
double by_period(Period p, std::span<const double> x, std::span<const double> y, F&& f) {
    switch (p) {
        case Period::X: return f(x);
        case Period::Y: return f(y);
        case Period::Both: return f(x) + f(y);
    }
    return 0.0;
}

void check_upper_nonneg(const Eigen::MatrixXd& m, const char* name) {
    if (m.rows() != m.cols()) throw DomainError(std::string("covariance: ") + name + " must be square");
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > i && !(m(i, j) >= 0.0)) {
                throw DomainError(std::string("covariance: ") + name + " coefficients must be >= 0");
            }
            if (j <= i && m(i, j) != 0.0) {
                throw DomainError(std::string("covariance: ") + name + " must be strictly upper triangular");
            }
        }
    }
}

// Breakpoints of the comonotone rearrangement of discrete laws.
std::vector<double> merged_levels(std::span<const Marginal1D> marginals) {
    std::vector<double> levels{0.0, 1.0};
    for (const auto& m : marginals) {
        const auto* d = std::get_if<Marginal1D::Discrete>(&m.kind());
        if (!d) throw DomainError("exact coupling requires discrete marginals");
        double acc = 0.0;
        for (double w : d->weights) {
            acc += w;
            if (acc > 0.0 && acc < 1.0) levels.push_back(acc);
        }
    }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end(),
                             [](double a, double b) { return std::abs(a - b) <= 1e-15; }),
                 levels.end());
    return levels;
}

DiscreteMeasure merge_consecutive(std::size_t dim, const std::vector<double>& pts,
                                  const std::vector<double>& w) {
    std::vector<double> out_pts, out_w;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const bool same = !out_w.empty() &&
                          std::equal(pts.begin() + k * dim, pts.begin() + (k + 1) * dim,
                                     out_pts.end() - static_cast<std::ptrdiff_t>(dim));
        if (same) {
            out_w.back() += w[k];
        } else {
            out_pts.insert(out_pts.end(), pts.begin() + k * dim, pts.begin() + (k + 1) * dim);
            out_w.push_back(w[k]);
        }
    }
    return DiscreteMeasure(dim, std::move(out_pts), std::move(out_w));
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(std::size_t dim, std::vector<double> points, std::vector<double> weights)
    : dim_(dim), points_(std::move(points)), weights_(std::move(weights)) {
    if (dim_ == 0) throw DomainError("DiscreteMeasure: dim must be positive");
    if (weights_.empty() || points_.size() != dim_ * weights_.size()) {
        throw DomainError("DiscreteMeasure: points/weights size mismatch");
    }
    long double total = 0.0L;
    for (double w : weights_) {
        if (!(w >= 0.0)) throw DomainError("DiscreteMeasure: negative weight");
        total += w;
    }
    if (std::abs(static_cast<double>(total) - 1.0) > 1e-12) throw DomainError("DiscreteMeasure: weights must sum to 1");
}

DiscreteMeasure DiscreteMeasure::from_points(const std::vector<std::vector<double>>& points,
                                             std::vector<double> weights) {
    if (points.empty()) throw DomainError("DiscreteMeasure: no points");
    const std::size_t dim = points.front().size();
    std::vector<double> flat;
    flat.reserve(dim * points.size());
    for (const auto& p : points) {
        if (p.size() != dim) throw DomainError("DiscreteMeasure: inconsistent point length");
        flat.insert(flat.end(), p.begin(), p.end());
    }
    return DiscreteMeasure(dim, std::move(flat), std::move(weights));
}

Marginal1D DiscreteMeasure::coordinate_marginal(std::size_t i) const {
    if (i >= dim_) throw DomainError("coordinate_marginal: index out of range");
    std::map<double, double> mass;
    for (std::size_t k = 0; k < size(); ++k) mass[point(k)[i]] += weights_[k];
    std::vector<double> atoms, w;
    for (auto [a, p] : mass) {
        atoms.push_back(a);
        w.push_back(p);
    }
    return Marginal1D::discrete(std::move(atoms), std::move(w));
}

bool DiscreteMeasure::is_monotone_support() const {
    for (std::size_t a = 0; a < size(); ++a) {
        for (std::size_t b = a + 1; b < size(); ++b) {
            bool le = true, ge = true;
            for (std::size_t i = 0; i < dim_; ++i) {
                le = le && point(a)[i] <= point(b)[i];
                ge = ge && point(a)[i] >= point(b)[i];
            }
            if (!le && !ge) return false;
        }
    }
    return true;
}

void DiscreteMeasure::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t i = 0; i < dim_; ++i) out << "x_" << (i + 1) << ',';
    out << "weight\n";
    for (std::size_t k = 0; k < size(); ++k) {
        for (double v : point(k)) out << csv::format(v) << ',';
        out << csv::format(weights_[k]) << '\n';
    }
}

DiscreteMeasure DiscreteMeasure::load_csv(const std::string& path) {
    const auto t = csv::read(path);
    if (t.header.size() < 2 || t.header.back() != "weight") {
        throw ParseError(path + ": expected columns x_1..x_d,weight", 1);
    }
    const std::size_t dim = t.header.size() - 1;
    std::vector<double> pts, w;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (std::size_t i = 0; i < dim; ++i) pts.push_back(csv::to_double(t.rows[r][i], t.lines[r]));
        w.push_back(csv::to_double(t.rows[r][dim], t.lines[r]));
    }
    try {
        return DiscreteMeasure(dim, std::move(pts), std::move(w));
    } catch (const DomainError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

CostSpec CostSpec::covariance(Eigen::MatrixXd a, Eigen::MatrixXd b) {
    check_upper_nonneg(a, "a");
    check_upper_nonneg(b, "b");
    if (a.rows() != b.rows()) throw DomainError("covariance: a and b must have equal size");
    if (a.rows() < 2) throw DomainError("covariance: needs d >= 2");
    return CostSpec(Covariance{std::move(a), std::move(b)});
}

CostSpec CostSpec::covariance_from_weights(std::span<const double> w) {
    const auto d = static_cast<Eigen::Index>(w.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d), b = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j) b(i, j) = w[i] * w[j];
    }
    return covariance(std::move(a), std::move(b));
}

CostSpec CostSpec::portfolio_variance(std::vector<double> w) {
    if (w.empty()) throw DomainError("portfolio_variance: empty weights");
    for (double v : w) {
        if (!(v > 0.0)) throw DomainError("portfolio_variance: weights must be positive");
    }
    return CostSpec(PortfolioVariance{std::move(w)});
}

CostSpec CostSpec::basket_call(std::vector<double> a, double strike, Period p) {
    if (a.empty()) throw DomainError("basket_call: empty coefficients");
    return CostSpec(BasketCall{std::move(a), strike, p});
}

CostSpec CostSpec::basket_put(std::vector<double> a, double strike, Period p) {
    if (a.empty()) throw DomainError("basket_put: empty coefficients");
    return CostSpec(BasketPut{std::move(a), strike, p});
}

CostSpec CostSpec::put_on_max(double strike, Period p) { return CostSpec(PutOnMax{strike, p}); }
CostSpec CostSpec::call_on_min(double strike, Period p) { return CostSpec(CallOnMin{strike, p}); }

CostSpec CostSpec::custom(Custom c) {
    if (!c.f) throw DomainError("custom cost: empty evaluator");
    return CostSpec(std::move(c));
}

std::size_t CostSpec::dim() const {
    return std::visit(overloaded{
                          [](const Covariance& c) { return static_cast<std::size_t>(c.a.rows()); },
                          [](const PortfolioVariance& c) { return c.w.size(); },
                          [](const BasketCall& c) { return c.a.size(); },
                          [](const BasketPut& c) { return c.a.size(); },
                          [](const auto&) { return std::size_t{0}; },
                      },
                      kind_);
}

CostSpec CostSpec::scaled(double k) const {
    CostSpec out = *this;
    out.scale_ *= k;
    return out;
}

std::string CostSpec::describe() const {
    std::ostringstream os;
    std::visit(overloaded{
                   [&](const Covariance&) { os << "covariance"; },
                   [&](const PortfolioVariance&) { os << "portfolio_variance"; },
                   [&](const BasketCall& c) { os << "basket_call(K=" << c.strike << ")"; },
                   [&](const BasketPut& c) { os << "basket_put(K=" << c.strike << ")"; },
                   [&](const PutOnMax& c) { os << "put_on_max(K=" << c.strike << ")"; },
                   [&](const CallOnMin& c) { os << "call_on_min(K=" << c.strike << ")"; },
                   [&](const Custom& c) { os << c.name; },
               },
               kind_);
    if (scale_ != 1.0) os << " x " << scale_;
    return os.str();
}

double CostSpec::operator()(std::span<const double> x, std::span<const double> y) const {
    const double v = std::visit(
        overloaded{
            [&](const Covariance& c) {
                double s = 0.0;
                const auto d = c.a.rows();
                for (Eigen::Index i = 0; i < d; ++i) {
                    for (Eigen::Index j = i + 1; j < d; ++j) {
                        s += c.a(i, j) * x[i] * x[j] + c.b(i, j) * y[i] * y[j];
                    }
                }
                return s;
            },
            [&](const PortfolioVariance& c) {
                double s = 0.0;
                for (std::size_t i = 0; i < c.w.size(); ++i) s += c.w[i] * y[i];
                return s * s;
            },
            [&](const BasketCall& c) {
                return by_period(c.period, x, y, [&](std::span<const double> z) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < c.a.size(); ++i) s += c.a[i] * z[i];
                    return positive(s - c.strike);
                });
            },
            [&](const BasketPut& c) {
                return by_period(c.period, x, y, [&](std::span<const double> z) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < c.a.size(); ++i) s += c.a[i] * z[i];
                    return positive(c.strike - s);
                });
            },
            [&](const PutOnMax& c) {
                return by_period(c.period, x, y, [&](std::span<const double> z) {
                    return positive(c.strike - *std::max_element(z.begin(), z.end()));
                });
            },
            [&](const CallOnMin& c) {
                return by_period(c.period, x, y, [&](std::span<const double> z) {
                    return positive(*std::min_element(z.begin(), z.end()) - c.strike);
                });
            },
            [&](const Custom& c) { return c.f(x, y); },
        },
        kind_);
    return scale_ * v;
}

DiscreteMeasure monotone_coupling(std::span<const Marginal1D> marginals, std::size_t n_atoms) {
    if (marginals.empty()) throw DomainError("monotone_coupling: no marginals");
    if (n_atoms == 0) throw DomainError("monotone_coupling: n_atoms must be positive");
    const std::size_t d = marginals.size();
    std::vector<double> pts(d * n_atoms);
    const std::vector<double> w(n_atoms, 1.0 / static_cast<double>(n_atoms));
    for (std::size_t k = 0; k < n_atoms; ++k) {
        const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(n_atoms);
        for (std::size_t i = 0; i < d; ++i) pts[k * d + i] = marginals[i].quantile(u);
    }
    auto out = merge_consecutive(d, pts, w);
    return out;
}

DiscreteMeasure anti_monotone_coupling(const Marginal1D& m1, const Marginal1D& m2, std::size_t n_atoms) {
    if (n_atoms == 0) throw DomainError("anti_monotone_coupling: n_atoms must be positive");
    std::vector<double> pts(2 * n_atoms);
    const std::vector<double> w(n_atoms, 1.0 / static_cast<double>(n_atoms));
    for (std::size_t k = 0; k < n_atoms; ++k) {
        const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(n_atoms);
        pts[2 * k] = m1.quantile(u);
        pts[2 * k + 1] = m2.quantile(1.0 - u);
    }
    return merge_consecutive(2, pts, w);
}

DiscreteMeasure monotone_coupling_exact(std::span<const Marginal1D> marginals) {
    if (marginals.empty()) throw DomainError("monotone_coupling_exact: no marginals");
    const auto levels = merged_levels(marginals);
    const std::size_t d = marginals.size();
    std::vector<double> pts, w;
    for (std::size_t j = 1; j < levels.size(); ++j) {
        const double mid = 0.5 * (levels[j - 1] + levels[j]);
        for (std::size_t i = 0; i < d; ++i) pts.push_back(marginals[i].quantile(mid));
        w.push_back(levels[j] - levels[j - 1]);
    }
    return merge_consecutive(d, pts, w);
}

DiscreteMeasure anti_monotone_coupling_exact(const Marginal1D& m1, const Marginal1D& m2) {
    // F_2^-1(1 - u) is piecewise constant between the reflected breakpoints of m2.
    const auto* d2 = std::get_if<Marginal1D::Discrete>(&m2.kind());
    if (!d2) throw DomainError("anti_monotone_coupling_exact: discrete marginals required");
    std::vector<double> ratoms(d2->atoms.rbegin(), d2->atoms.rend());
    for (double& a : ratoms) a = -a;
    std::vector<double> rweights(d2->weights.rbegin(), d2->weights.rend());
    const std::array<Marginal1D, 2> pair{m1, Marginal1D::discrete(ratoms, rweights)};
    auto mono = monotone_coupling_exact(pair);
    std::vector<double> pts;
    for (std::size_t k = 0; k < mono.size(); ++k) {
        pts.push_back(mono.point(k)[0]);
        pts.push_back(-mono.point(k)[1]);
    }
    return DiscreteMeasure(2, std::move(pts), mono.weights());
}

DiscreteMeasure independent_coupling(std::span<const Marginal1D> marginals) {
    if (marginals.empty()) throw DomainError("independent_coupling: no marginals");
    std::vector<const Marginal1D::Discrete*> ds;
    for (const auto& m : marginals) {
        const auto* d = std::get_if<Marginal1D::Discrete>(&m.kind());
        if (!d) throw DomainError("independent_coupling: discrete marginals required");
        ds.push_back(d);
    }
    const std::size_t dim = ds.size();
    std::vector<std::size_t> idx(dim, 0);
    std::vector<double> pts, w;
    while (true) {
        double p = 1.0;
        for (std::size_t i = 0; i < dim; ++i) {
            pts.push_back(ds[i]->atoms[idx[i]]);
            p *= ds[i]->weights[idx[i]];
        }
        w.push_back(p);
        std::size_t i = dim;
        while (i > 0) {
            --i;
            if (++idx[i] < ds[i]->atoms.size()) break;
            idx[i] = 0;
            if (i == 0) {
                const double total = std::accumulate(w.begin(), w.end(), 0.0);
                for (double& v : w) v /= total;
                return DiscreteMeasure(dim, std::move(pts), std::move(w));
            }
        }
    }
}

Estimate expectation(const DiscreteMeasure& m, const CostSpec& c) {
    const std::size_t cd = c.dim();
    bool paired = false;
    if (cd != 0) {
        if (m.dim() == 2 * cd) {
            paired = true;
        } else if (m.dim() != cd) {
            throw DomainError("expectation: measure dimension does not match the cost");
        }
    }
    double s = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) {
        const auto p = m.point(k);
        if (paired) {
            const std::size_t d = m.dim() / 2;
            s += m.weight(k) * c(p.first(d), p.subspan(d));
        } else {
            s += m.weight(k) * c(p, p);
        }
    }
    return {s, 0.0};
}

PathSampler independent_sampler(std::vector<Marginal1D> mus, std::vector<Marginal1D> nus) {
    if (mus.size() != nus.size() || mus.empty()) {
        throw DomainError("independent_sampler: need d >= 1 marginals per period");
    }
    return [mus = std::move(mus), nus = std::move(nus)](Rng& rng, std::span<double> x, std::span<double> y) {
        for (std::size_t i = 0; i < mus.size(); ++i) x[i] = mus[i].sample(rng);
        for (std::size_t i = 0; i < nus.size(); ++i) y[i] = nus[i].sample(rng);
    };
}

Estimate expectation(const PathSampler& sampler, std::size_t d, const CostSpec& c,
                     std::size_t n_samples, Rng& rng) {
    if (n_samples == 0) throw DomainError("expectation: n_samples must be positive");
    std::vector<double> x(d), y(d);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t k = 1; k <= n_samples; ++k) {
        sampler(rng, x, y);
        const double v = c(x, y);
        const double delta = v - mean;
        mean += delta / static_cast<double>(k);
        m2 += delta * (v - mean);
    }
    const double n = static_cast<double>(n_samples);
    const double var = n > 1 ? m2 / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

double ot_upper(std::span<const Marginal1D> nus, const CostSpec& c, std::size_t n_atoms) {
    return expectation(monotone_coupling(nus, n_atoms), c).mean;
}

OtBounds ot_bounds(std::span<const Marginal1D> nus, const CostSpec& c, std::size_t n_atoms) {
    if (nus.size() != 2) throw UnsupportedError("ot_bounds: the anti-monotone lower bound needs d = 2");
    const double upper = ot_upper(nus, c, n_atoms);
    const double lower = expectation(anti_monotone_coupling(nus[0], nus[1], n_atoms), c).mean;
    return {upper, lower};
}

}  // namespace vmot
