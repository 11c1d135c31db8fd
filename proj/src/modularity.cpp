#include "vmot/modularity.hpp"

#include "vmot/csv.hpp"
#include "vmot/errors.hpp"
#include "vmot/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

namespace vmot {

namespace {

void check_axes(const std::vector<std::vector<double>>& axes) {
    if (axes.empty()) throw DomainError("GridFn: no axes");
    for (const auto& a : axes) {
        if (a.empty()) throw DomainError("GridFn: empty axis");
        for (std::size_t k = 0; k < a.size(); ++k) {
            if (!std::isfinite(a[k])) throw DomainError("GridFn: non-finite axis value");
            if (k && !(a[k] > a[k - 1])) throw DomainError("GridFn: axes must be strictly increasing");
        }
    }
}

std::size_t grid_size(const std::vector<std::vector<double>>& axes) {
    std::size_t n = 1;
    for (const auto& a : axes) n *= a.size();
    return n;
}

// Lower convex hull of finite (x, f) pairs in 1-d, x increasing.
std::vector<std::pair<double, double>> lower_hull(const GridFn& f) {
    std::vector<std::pair<double, double>> h;
    const auto& ax = f.axes()[0];
    for (std::size_t k = 0; k < ax.size(); ++k) {
        if (f[k] == kInf) continue;
        const std::pair<double, double> p{ax[k], f[k]};
        while (h.size() >= 2) {
            const auto& a = h[h.size() - 2];
            const auto& b = h.back();
            // drop b if it lies on or above the chord a-p
            if ((b.second - a.second) * (p.first - a.first) >= (p.second - a.second) * (b.first - a.first)) {
                h.pop_back();
            } else {
                break;
            }
        }
        h.push_back(p);
    }
    return h;
}

double hull_eval(const std::vector<std::pair<double, double>>& h, double x) {
    if (h.empty() || x < h.front().first || x > h.back().first) return kInf;
    auto it = std::lower_bound(h.begin(), h.end(), x,
                               [](const auto& p, double v) { return p.first < v; });
    if (it->first == x) return it->second;
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double t = (x - a.first) / (b.first - a.first);
    return (1.0 - t) * a.second + t * b.second;
}

// Both sides of an extended-real inequality lhs >= rhs; neither side is -inf.
bool geq(double lhs, double rhs, double tol) {
    if (lhs == kInf) return true;
    if (rhs == kInf) return false;
    return lhs >= rhs - tol;
}

bool strictly_greater(double lhs, double rhs) {
    if (lhs == kInf && rhs == kInf) return false;
    if (lhs == kInf) return true;
    if (rhs == kInf) return false;
    return lhs - rhs > 1e-12;
}

double gap(double lhs, double rhs) {
    if (lhs == kInf) return 0.0;
    if (rhs == kInf) return kInf;
    return std::max(0.0, rhs - lhs);
}

std::vector<double> random_axis(std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> step(0.2, 1.0);
    std::vector<double> a(n);
    a[0] = std::uniform_real_distribution<double>(-2.0, 0.0)(rng);
    for (std::size_t k = 1; k < n; ++k) a[k] = a[k - 1] + step(rng);
    return a;
}

// Random increasing function drawn from a small family.
std::function<double(double)> random_increasing(Rng& rng) {
    std::uniform_real_distribution<double> u(0.2, 1.5);
    const double s = u(rng);
    switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
        case 0: return [s](double x) { return s * x; };
        case 1: return [s](double x) { return std::exp(s * x / 2.0); };
        case 2: return [s](double x) { return std::atan(s * x); };
        default: return [s](double x) { return x + s * x * x * x / 6.0; };
    }
}

std::function<double(double)> random_concave(Rng& rng) {
    std::uniform_real_distribution<double> u(0.2, 1.5);
    const double s = u(rng);
    switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
        case 0: return [s](double t) { return -s * t * t; };
        case 1: return [s](double t) { return -std::exp(s * t / 2.0); };
        default: return [s](double t) { return std::min(0.0, -s * t); };
    }
}

std::string describe_axes(const GridFn& f) {
    std::ostringstream os;
    os << "d=" << f.dim() << " shape=";
    for (std::size_t k : f.shape()) os << k << ' ';
    return os.str();
}

}  // namespace

GridFn::GridFn(std::vector<std::vector<double>> axes, std::vector<double> values)
    : axes_(std::move(axes)), values_(std::move(values)) {
    check_axes(axes_);
    if (values_.size() != grid_size(axes_)) throw DomainError("GridFn: value count does not match axes");
    bool proper = false;
    for (double v : values_) {
        if (std::isnan(v) || v == -kInf) throw DomainError("GridFn: values must be real or +inf");
        proper = proper || v != kInf;
    }
    if (!proper) throw DomainError("GridFn: all values are +inf");
    strides_.assign(axes_.size(), 1);
    for (std::size_t i = axes_.size() - 1; i-- > 0;) strides_[i] = strides_[i + 1] * axes_[i + 1].size();
}

GridFn GridFn::tabulate(std::vector<std::vector<double>> axes,
                        const std::function<double(std::span<const double>)>& f) {
    check_axes(axes);
    const std::size_t n = grid_size(axes);
    std::vector<double> vals(n);
    std::vector<std::size_t> idx(axes.size(), 0);
    std::vector<double> x(axes.size());
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < axes.size(); ++i) x[i] = axes[i][idx[i]];
        vals[k] = f(x);
        for (std::size_t i = axes.size(); i-- > 0;) {
            if (++idx[i] < axes[i].size()) break;
            idx[i] = 0;
        }
    }
    return GridFn(std::move(axes), std::move(vals));
}

std::vector<std::size_t> GridFn::shape() const {
    std::vector<std::size_t> s;
    for (const auto& a : axes_) s.push_back(a.size());
    return s;
}

std::size_t GridFn::flat_index(std::span<const std::size_t> idx) const {
    std::size_t k = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) k += idx[i] * strides_[i];
    return k;
}

std::vector<std::size_t> GridFn::multi_index(std::size_t flat) const {
    std::vector<std::size_t> idx(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
        idx[i] = flat / strides_[i];
        flat %= strides_[i];
    }
    return idx;
}

std::vector<double> GridFn::point(std::size_t flat) const {
    const auto idx = multi_index(flat);
    std::vector<double> x(dim());
    for (std::size_t i = 0; i < dim(); ++i) x[i] = axes_[i][idx[i]];
    return x;
}

GridFn GridFn::negated() const {
    std::vector<double> v(values_.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (values_[k] == kInf) throw DomainError("GridFn::negated: +inf entries cannot be negated");
        v[k] = -values_[k];
    }
    return GridFn(axes_, std::move(v));
}

void GridFn::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t i = 0; i < dim(); ++i) out << "x_" << (i + 1) << ',';
    out << "value\n";
    for (std::size_t k = 0; k < size(); ++k) {
        for (double v : point(k)) out << csv::format(v) << ',';
        out << csv::format(values_[k]) << '\n';
    }
}

GridFn GridFn::load_csv(const std::string& path) {
    const auto t = csv::read(path);
    if (t.header.size() < 2 || t.header.back() != "value") {
        throw ParseError(path + ": expected columns x_1..x_d,value", 1);
    }
    const std::size_t d = t.header.size() - 1;
    std::vector<std::map<double, std::size_t>> coords(d);
    std::vector<std::vector<double>> pts;
    std::vector<double> vals;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        std::vector<double> p(d);
        for (std::size_t i = 0; i < d; ++i) {
            p[i] = csv::to_double(t.rows[r][i], t.lines[r]);
            coords[i][p[i]] = 0;
        }
        pts.push_back(std::move(p));
        vals.push_back(csv::to_double(t.rows[r][d], t.lines[r]));
    }
    std::vector<std::vector<double>> axes(d);
    for (std::size_t i = 0; i < d; ++i) {
        std::size_t k = 0;
        for (auto& [x, pos] : coords[i]) {
            pos = k++;
            axes[i].push_back(x);
        }
    }
    if (pts.size() != grid_size(axes)) throw ParseError(path + ": rows do not form a full grid");
    std::vector<double> grid_vals(pts.size());
    std::vector<bool> seen(pts.size(), false);
    std::vector<std::size_t> strides(d, 1);
    for (std::size_t i = d - 1; i-- > 0;) strides[i] = strides[i + 1] * axes[i + 1].size();
    for (std::size_t r = 0; r < pts.size(); ++r) {
        std::size_t k = 0;
        for (std::size_t i = 0; i < d; ++i) k += coords[i][pts[r][i]] * strides[i];
        if (seen[k]) throw ParseError(path + ": duplicate grid point", t.lines[r]);
        seen[k] = true;
        grid_vals[k] = vals[r];
    }
    try {
        return GridFn(std::move(axes), std::move(grid_vals));
    } catch (const DomainError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

double AffinePiece::operator()(std::span<const double> x) const {
    if (static_cast<Eigen::Index>(x.size()) != slope.size()) throw DomainError("AffinePiece: dimension mismatch");
    double s = intercept;
    for (std::size_t i = 0; i < x.size(); ++i) s += slope(static_cast<Eigen::Index>(i)) * x[i];
    return s;
}

const char* to_string(Modularity m) {
    switch (m) {
        case Modularity::Submodular: return "submodular";
        case Modularity::Supermodular: return "supermodular";
        case Modularity::StrictlySub: return "strictly submodular";
        case Modularity::StrictlySuper: return "strictly supermodular";
        case Modularity::Neither: return "neither";
    }
    return "?";
}

Modularity ModularityReport::classification() const {
    if (strictly_sub) return Modularity::StrictlySub;
    if (strictly_super) return Modularity::StrictlySuper;
    if (submodular) return Modularity::Submodular;
    if (supermodular) return Modularity::Supermodular;
    return Modularity::Neither;
}

ModularityReport check_modularity(const GridFn& f, double rel_tol) {
    const std::size_t d = f.dim();
    if (d < 2) throw DomainError("check_modularity: needs d >= 2");
    ModularityReport rep;
    const auto shape = f.shape();
    bool any_rect = false;
    for (std::size_t k = 0; k < f.size(); ++k) {
        auto idx = f.multi_index(k);
        for (std::size_t i = 0; i < d; ++i) {
            if (idx[i] + 1 >= shape[i]) continue;
            for (std::size_t j = i + 1; j < d; ++j) {
                if (idx[j] + 1 >= shape[j]) continue;
                any_rect = true;
                auto c = idx;
                const double lo = f.at(c);
                c[i] += 1;
                const double hi_lo = f.at(c);
                c[j] += 1;
                const double hi = f.at(c);
                c[i] -= 1;
                const double lo_hi = f.at(c);

                const double off = hi_lo + lo_hi;   // f(a) + f(b)
                const double diag = lo + hi;        // f(a v b) + f(a ^ b)
                double scale = 1.0;
                for (double v : {lo, hi_lo, hi, lo_hi}) {
                    if (v != kInf) scale = std::max(scale, std::abs(v));
                }
                const double tol = rel_tol * scale;
                if (!geq(off, diag, tol)) rep.submodular = false;
                if (!geq(diag, off, tol)) rep.supermodular = false;
                rep.sub_violation = std::max(rep.sub_violation, gap(off, diag));
                rep.super_violation = std::max(rep.super_violation, gap(diag, off));
                if (!strictly_greater(off, diag)) rep.strictly_sub = false;
                if (!strictly_greater(diag, off)) rep.strictly_super = false;
            }
        }
    }
    if (!any_rect) {
        rep.strictly_sub = false;
        rep.strictly_super = false;
    }
    return rep;
}

GridFn legendre(const GridFn& f, std::vector<std::vector<double>> dual_axes) {
    if (dual_axes.size() != f.dim()) throw DomainError("legendre: dual axes dimension mismatch");
    std::vector<std::vector<double>> pts;
    std::vector<double> fv;
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (f[k] == kInf) continue;
        pts.push_back(f.point(k));
        fv.push_back(f[k]);
    }
    return GridFn::tabulate(std::move(dual_axes), [&](std::span<const double> y) {
        double best = -kInf;
        for (std::size_t k = 0; k < pts.size(); ++k) {
            double s = -fv[k];
            for (std::size_t i = 0; i < y.size(); ++i) s += pts[k][i] * y[i];
            best = std::max(best, s);
        }
        return best;
    });
}

GridFn legendre(const GridFn& f) {
    std::vector<std::vector<double>> dual;
    for (const auto& a : f.axes()) {
        std::vector<double> g(a.size());
        const double lo = a.front(), hi = a.back();
        for (std::size_t k = 0; k < a.size(); ++k) {
            g[k] = a.size() == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(a.size() - 1);
        }
        dual.push_back(std::move(g));
    }
    return legendre(f, std::move(dual));
}

double envelope_at(const GridFn& f, std::span<const double> x) {
    if (x.size() != f.dim()) throw DomainError("envelope_at: dimension mismatch");
    if (f.dim() == 1) return hull_eval(lower_hull(f), x[0]);
    const auto d = static_cast<Eigen::Index>(f.dim());
    std::vector<std::size_t> finite;
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (f[k] != kInf) finite.push_back(k);
    }
    StandardLp lp;
    const auto n = static_cast<Eigen::Index>(finite.size());
    lp.A.resize(d + 1, n);
    lp.b.resize(d + 1);
    lp.c.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto p = f.point(finite[k]);
        for (Eigen::Index i = 0; i < d; ++i) lp.A(i, k) = p[i];
        lp.A(d, k) = 1.0;
        lp.c(k) = f[finite[k]];
    }
    for (Eigen::Index i = 0; i < d; ++i) lp.b(i) = x[i];
    lp.b(d) = 1.0;
    const auto r = solve_lp(lp);
    if (r.status != LpStatus::Optimal) return kInf;
    return r.value;
}

GridFn convex_envelope(const GridFn& f) {
    if (f.dim() == 1) {
        const auto h = lower_hull(f);
        return GridFn::tabulate(f.axes(), [&](std::span<const double> x) { return hull_eval(h, x[0]); });
    }
    return GridFn::tabulate(f.axes(), [&](std::span<const double> x) { return envelope_at(f, x); });
}

GridFn convex_envelope(const GridFn& f, const std::vector<std::vector<double>>& dual_axes) {
    return legendre(legendre(f, dual_axes), f.axes());
}

double axis_convexity_violation(const GridFn& f) {
    double worst = 0.0;
    const auto shape = f.shape();
    for (std::size_t k = 0; k < f.size(); ++k) {
        const auto idx = f.multi_index(k);
        for (std::size_t i = 0; i < f.dim(); ++i) {
            if (idx[i] + 2 >= shape[i]) continue;
            auto c = idx;
            const double a = f.at(c);
            c[i] += 1;
            const double b = f.at(c);
            c[i] += 1;
            const double e = f.at(c);
            if (a == kInf || b == kInf || e == kInf) continue;
            const auto& ax = f.axes()[i];
            const double s1 = (b - a) / (ax[idx[i] + 1] - ax[idx[i]]);
            const double s2 = (e - b) / (ax[idx[i] + 2] - ax[idx[i] + 1]);
            worst = std::max(worst, s1 - s2);
        }
    }
    return worst;
}

GridFn random_submodular(std::size_t d, Rng& rng) {
    if (d < 2) throw DomainError("random_submodular: needs d >= 2");
    std::uniform_int_distribution<std::size_t> len(3, d == 2 ? 7 : 5);
    std::vector<std::vector<double>> axes;
    for (std::size_t i = 0; i < d; ++i) axes.push_back(random_axis(len(rng), rng));

    std::uniform_real_distribution<double> coef(-1.0, 1.0), pos(0.1, 1.0);
    std::vector<std::function<double(double)>> sep(d);
    for (auto& g : sep) {
        const double a = coef(rng), b = coef(rng);
        g = [a, b](double x) { return a * x + b * x * x; };
    }
    struct Pair {
        std::size_t i, j;
        double s;
        std::function<double(double)> mi, mj;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            if (std::bernoulli_distribution(0.7)(rng)) {
                pairs.push_back({i, j, pos(rng), random_increasing(rng), random_increasing(rng)});
            }
        }
    }
    std::vector<double> w(d);
    for (auto& v : w) v = pos(rng);
    const bool use_sum = std::bernoulli_distribution(0.6)(rng);
    const auto phi = random_concave(rng);
    const double sum_sign = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;

    return GridFn::tabulate(std::move(axes), [=](std::span<const double> x) {
        double v = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) v += sep[i](x[i]);
        for (const auto& p : pairs) v -= p.s * p.mi(x[p.i]) * p.mj(x[p.j]);
        if (use_sum) {
            double t = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) t += w[i] * x[i];
            v += phi(sum_sign * t);
        }
        return v;
    });
}

GridFn random_supermodular(std::size_t d, Rng& rng) { return random_submodular(d, rng).negated(); }

ConjugateSuiteReport conjugate_modularity_suite(std::uint64_t seed, int trials) {
    if (trials < 1) throw DomainError("conjugate_modularity_suite: trials must be >= 1");
    ConjugateSuiteReport rep;
    rep.trials = trials;
    Rng rng(seed);
    for (int t = 0; t < trials; ++t) {
        const std::size_t d = (t % 2 == 0) ? 2 : 3;
        const auto f = random_submodular(d, rng);
        if (!check_modularity(f).submodular) {
            rep.counterexamples.push_back("generator produced a non-submodular function, " + describe_axes(f));
            continue;
        }
        const auto g = legendre(f);
        const auto r = check_modularity(g);
        if (r.supermodular) {
            ++rep.sub_to_super;
        } else {
            rep.counterexamples.push_back("conjugate of submodular not supermodular, trial " + std::to_string(t) +
                                          ", " + describe_axes(f) + "violation " +
                                          std::to_string(r.super_violation));
        }
    }
    for (int t = 0; t < trials; ++t) {
        const auto f = random_supermodular(2, rng);
        const auto g = legendre(f);
        const auto r = check_modularity(g);
        if (r.submodular) {
            ++rep.super_to_sub;
        } else {
            rep.counterexamples.push_back("conjugate of supermodular not submodular, trial " + std::to_string(t) +
                                          ", violation " + std::to_string(r.sub_violation));
        }
    }
    for (int t = 0; t < trials; ++t) {
        const bool sub = t % 2 == 0;
        const auto f = sub ? random_submodular(2, rng) : random_supermodular(2, rng);
        const auto r = check_modularity(convex_envelope(f), 1e-9);
        if (sub ? r.submodular : r.supermodular) {
            ++rep.envelope_preserved;
        } else {
            rep.counterexamples.push_back(std::string("envelope lost ") + (sub ? "submodularity" : "supermodularity") +
                                          ", trial " + std::to_string(t));
        }
    }
    return rep;
}

GridFn cube_beta0() {
    // axes y1 in {0,1}, y2 in {0,1}, y3 in {-1,0,1}; last index fastest
    std::map<std::tuple<int, int, int>, double> v{
        {{0, 0, 1}, 0}, {{1, 0, 1}, 0}, {{0, 1, 1}, 0}, {{1, 1, 1}, 0},
        {{0, 0, 0}, 0}, {{1, 0, 0}, 1}, {{0, 1, 0}, 0}, {{1, 1, 0}, 1},
        {{0, 0, -1}, 0}, {{1, 0, -1}, 2}, {{0, 1, -1}, 1}, {{1, 1, -1}, 2},
    };
    return GridFn::tabulate({{0.0, 1.0}, {0.0, 1.0}, {-1.0, 0.0, 1.0}}, [&](std::span<const double> y) {
        return v.at({static_cast<int>(y[0]), static_cast<int>(y[1]), static_cast<int>(y[2])});
    });
}

std::vector<AffinePiece> cube_pieces() {
    AffinePiece l1{Eigen::Vector3d(0, 0, 0), 0.0};
    AffinePiece l2{Eigen::Vector3d(1, 1, -1), -1.0};
    AffinePiece l3{Eigen::Vector3d(2, 0, -1), -1.0};
    return {l1, l2, l3};
}

CubeReport verify_cube_counterexample() {
    CubeReport rep;
    const auto beta0 = cube_beta0();
    const auto pieces = cube_pieces();
    auto max_l = [&](std::span<const double> y) {
        double m = -kInf;
        for (const auto& l : pieces) m = std::max(m, l(y));
        return m;
    };

    rep.beta0_submodular = check_modularity(beta0).submodular;

    const auto env = convex_envelope(beta0);
    for (std::size_t k = 0; k < env.size(); ++k) {
        const auto y = beta0.point(k);
        rep.max_envelope_error = std::max({rep.max_envelope_error, std::abs(env[k] - max_l(y)),
                                           std::abs(env[k] - beta0[k])});
    }
    rep.envelope_matches = rep.max_envelope_error <= 1e-9;

    const std::vector<double> u{0.5, 0.75, 0.25}, up{0.4, 0.8, 0.2};
    const std::vector<double> ub{0.4, 0.75, 0.2}, ubp{0.5, 0.8, 0.25};
    rep.lhs = envelope_at(beta0, u) + envelope_at(beta0, up);
    rep.rhs = envelope_at(beta0, ub) + envelope_at(beta0, ubp);
    const double lhs_pieces = max_l(u) + max_l(up);
    const double rhs_pieces = max_l(ub) + max_l(ubp);
    rep.strict_gap = rep.lhs < rep.rhs - 1e-9 && std::abs(rep.lhs - lhs_pieces) <= 1e-9 &&
                     std::abs(rep.rhs - rhs_pieces) <= 1e-9;

    if (!rep.beta0_submodular) throw FixtureError("cube fixture: beta0 is not submodular");
    if (!rep.envelope_matches) throw FixtureError("cube fixture: envelope differs from max of affine pieces");
    if (!rep.strict_gap) throw FixtureError("cube fixture: envelope is not strictly non-submodular at u, u'");
    return rep;
}

}  // namespace vmot
