#include "vmot/market_data.hpp"

#include "vmot/csv.hpp"
#include "vmot/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace vmot {

namespace {

std::string fmt(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

struct Curve {
    std::vector<double> k;
    std::vector<double> p;
};

/// Drops quotes breaking monotonicity (sign +1 nondecreasing, -1 nonincreasing)
/// or convexity, worst violation first.
void clean_curve(Curve& c, int sign, double slack, const std::string& side, std::vector<std::string>& diag) {
    bool changed = true;
    while (changed && c.k.size() >= 2) {
        changed = false;
        std::size_t worst = 0;
        double worst_v = slack;
        for (std::size_t j = 1; j < c.k.size(); ++j) {
            const double v = -sign * (c.p[j] - c.p[j - 1]);
            if (v > worst_v) {
                worst_v = v;
                worst = j;
            }
        }
        if (worst) {
            const std::size_t drop = sign > 0 ? worst - 1 : worst;
            diag.push_back(side + " K=" + fmt(c.k[drop]) + " dropped: monotonicity violation " + fmt(worst_v));
            c.k.erase(c.k.begin() + static_cast<std::ptrdiff_t>(drop));
            c.p.erase(c.p.begin() + static_cast<std::ptrdiff_t>(drop));
            changed = true;
            continue;
        }
        double worst_c = slack;
        for (std::size_t j = 1; j + 1 < c.k.size(); ++j) {
            const double s1 = (c.p[j] - c.p[j - 1]) / (c.k[j] - c.k[j - 1]);
            const double s2 = (c.p[j + 1] - c.p[j]) / (c.k[j + 1] - c.k[j]);
            const double v = s1 - s2;
            if (v > worst_c) {
                worst_c = v;
                worst = j;
            }
        }
        if (worst) {
            diag.push_back(side + " K=" + fmt(c.k[worst]) + " dropped: convexity violation " + fmt(worst_c));
            c.k.erase(c.k.begin() + static_cast<std::ptrdiff_t>(worst));
            c.p.erase(c.p.begin() + static_cast<std::ptrdiff_t>(worst));
            changed = true;
        }
    }
}

std::map<double, double> second_differences(const Curve& c) {
    std::map<double, double> out;
    for (std::size_t j = 1; j + 1 < c.k.size(); ++j) {
        const double s1 = (c.p[j] - c.p[j - 1]) / (c.k[j] - c.k[j - 1]);
        const double s2 = (c.p[j + 1] - c.p[j]) / (c.k[j + 1] - c.k[j]);
        out[c.k[j]] = 2.0 * (s2 - s1) / (c.k[j + 1] - c.k[j - 1]);
    }
    return out;
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& f) {
    double m = 0.0;
    for (std::size_t j = 1; j < x.size(); ++j) m += 0.5 * (f[j] + f[j - 1]) * (x[j] - x[j - 1]);
    return m;
}

}  // namespace

void OptionChain::validate() const {
    if (!(spot > 0.0) || !std::isfinite(spot)) throw DomainError("OptionChain: spot must be positive");
    for (std::size_t j = 0; j < rows.size(); ++j) {
        const auto& r = rows[j];
        if (!(r.strike > 0.0) || !std::isfinite(r.strike)) throw DomainError("OptionChain: strikes must be positive");
        if (j > 0 && !(r.strike > rows[j - 1].strike))
            throw DomainError("OptionChain: strikes must be strictly increasing");
        if ((r.call && !(*r.call >= 0.0 && std::isfinite(*r.call))) ||
            (r.put && !(*r.put >= 0.0 && std::isfinite(*r.put))))
            throw DomainError("OptionChain: prices must be finite and nonnegative at K=" + fmt(r.strike));
    }
}

OptionChain load_chain(const std::string& path, double spot, std::string asset, std::string as_of,
                       std::string expiry) {
    const csv::Table t = csv::read(path);
    if (t.header != std::vector<std::string>{"strike", "call", "put"})
        throw ParseError(path + ": expected header strike,call,put", 1);
    OptionChain ch;
    ch.asset = std::move(asset);
    ch.as_of = std::move(as_of);
    ch.expiry = std::move(expiry);
    ch.spot = spot;
    std::vector<std::size_t> lines;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::size_t line = t.lines[r];
        OptionQuote q;
        q.strike = csv::to_double(t.rows[r][0], line);
        q.call = csv::to_optional_double(t.rows[r][1], line);
        q.put = csv::to_optional_double(t.rows[r][2], line);
        if (!(q.strike > 0.0) || !std::isfinite(q.strike)) throw ParseError("strike must be positive", line);
        if ((q.call && !(*q.call >= 0.0 && std::isfinite(*q.call))) ||
            (q.put && !(*q.put >= 0.0 && std::isfinite(*q.put))))
            throw ParseError("prices must be finite and nonnegative", line);
        ch.rows.push_back(q);
        lines.push_back(line);
    }
    std::vector<std::size_t> order(ch.rows.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ch.rows[a].strike < ch.rows[b].strike; });
    if (!std::is_sorted(order.begin(), order.end())) ch.warnings.push_back(path + ": strikes were not sorted");
    std::vector<OptionQuote> sorted;
    for (std::size_t j = 0; j < order.size(); ++j) {
        const auto& q = ch.rows[order[j]];
        if (!sorted.empty() && sorted.back().strike == q.strike)
            throw ParseError("duplicate strike " + fmt(q.strike), lines[order[j]]);
        sorted.push_back(q);
    }
    ch.rows = std::move(sorted);
    ch.validate();
    return ch;
}

void save_chain(const OptionChain& chain, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "strike,call,put\n";
    for (const auto& r : chain.rows) {
        out << csv::format(r.strike) << ',' << (r.call ? csv::format(*r.call) : "") << ','
            << (r.put ? csv::format(*r.put) : "") << "\n";
    }
}

ImpliedDensity implied_density(const OptionChain& chain, const ExtractionOptions& opt) {
    chain.validate();
    const double slack = opt.arbitrage_slack * chain.spot;
    ImpliedDensity res;
    // The put curve runs up to the first strike at or above spot, the call curve
    // starts at the last strike at or below spot, so both estimate the strikes
    // adjacent to spot.
    double k_lo = -1.0, k_hi = -1.0;
    for (const auto& r : chain.rows) {
        if (r.strike <= chain.spot) k_lo = r.strike;
        if (r.strike >= chain.spot && k_hi < 0.0) k_hi = r.strike;
    }
    Curve puts, calls;
    for (const auto& r : chain.rows) {
        if (r.put && (r.strike < chain.spot || (k_hi > 0.0 && r.strike <= k_hi))) {
            puts.k.push_back(r.strike);
            puts.p.push_back(*r.put);
        }
        if (r.call && (r.strike > chain.spot || (k_lo > 0.0 && r.strike >= k_lo))) {
            calls.k.push_back(r.strike);
            calls.p.push_back(*r.call);
        }
    }
    clean_curve(puts, +1, slack, "put", res.diagnostics);
    clean_curve(calls, -1, slack, "call", res.diagnostics);
    if (puts.k.size() < 3)
        throw ExtractionError("fewer than 3 usable put quotes (" + std::to_string(puts.k.size()) + ")");
    if (calls.k.size() < 3)
        throw ExtractionError("fewer than 3 usable call quotes (" + std::to_string(calls.k.size()) + ")");

    const auto dp = second_differences(puts);
    const auto dc = second_differences(calls);
    std::map<double, double> merged(dp.begin(), dp.end());
    for (const auto& [k, v] : dc) {
        const auto it = merged.find(k);
        if (it == merged.end()) {
            merged[k] = v;
        } else {
            it->second = 0.5 * (it->second + v);
        }
    }
    for (auto& [k, v] : merged) {
        if (v < 0.0) {
            if (v < -opt.clip_tol) res.diagnostics.push_back("K=" + fmt(k) + " negative density " + fmt(v) + " clipped");
            v = 0.0;
        }
        res.strikes.push_back(k);
        res.density.push_back(v);
    }
    if (res.strikes.size() < 2) throw ExtractionError("fewer than 2 strikes carry a density estimate");
    res.raw_mass = trapezoid(res.strikes, res.density);
    if (!(res.raw_mass > 0.0)) throw ExtractionError("extracted density has zero mass");
    for (double& v : res.density) v /= res.raw_mass;
    res.normalized = true;
    return res;
}

double ImpliedDensity::mass() const { return trapezoid(strikes, density); }

double ImpliedDensity::call_price(double k) const {
    double total = 0.0;
    for (std::size_t j = 1; j < strikes.size(); ++j) {
        const double a = strikes[j - 1], b = strikes[j];
        if (b <= k) continue;
        const double fa = density[j - 1], fb = density[j];
        auto f = [&](double x) { return fa + (fb - fa) * (x - a) / (b - a); };
        const double lo = std::max(a, k);
        // Simpson is exact for the quadratic integrand (x - k) f(x).
        const double mid = 0.5 * (lo + b);
        total += (b - lo) / 6.0 * ((lo - k) * f(lo) + 4.0 * (mid - k) * f(mid) + (b - k) * f(b));
    }
    return total;
}

void ImpliedDensity::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "strike,density\n";
    for (std::size_t j = 0; j < strikes.size(); ++j)
        out << csv::format(strikes[j]) << ',' << csv::format(density[j]) << "\n";
}

ImpliedDensity ImpliedDensity::load_csv(const std::string& path) {
    const csv::Table t = csv::read(path);
    if (t.header != std::vector<std::string>{"strike", "density"})
        throw ParseError(path + ": expected header strike,density", 1);
    ImpliedDensity d;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const double k = csv::to_double(t.rows[r][0], t.lines[r]);
        const double v = csv::to_double(t.rows[r][1], t.lines[r]);
        if (!d.strikes.empty() && !(k > d.strikes.back())) throw ParseError("strikes must increase", t.lines[r]);
        if (v < 0.0) throw ParseError("negative density", t.lines[r]);
        d.strikes.push_back(k);
        d.density.push_back(v);
    }
    d.raw_mass = d.mass();
    d.normalized = std::abs(d.raw_mass - 1.0) <= 1e-6;
    return d;
}

Marginal1D to_return_marginal(const ImpliedDensity& dens, double ref_price) {
    if (!(ref_price > 0.0) || !std::isfinite(ref_price)) throw DomainError("to_return_marginal: ref_price must be positive");
    if (dens.strikes.size() < 2) throw DomainError("to_return_marginal: need at least two strikes");
    const double m = dens.mass();
    if (!(m > 0.0)) throw DomainError("to_return_marginal: density has zero mass");
    std::vector<double> grid, cdf;
    double acc = 0.0;
    for (std::size_t j = 0; j < dens.strikes.size(); ++j) {
        if (j > 0) acc += 0.5 * (dens.density[j] + dens.density[j - 1]) * (dens.strikes[j] - dens.strikes[j - 1]);
        grid.push_back((dens.strikes[j] - ref_price) / ref_price);
        cdf.push_back(acc / m);
    }
    cdf.back() = 1.0;
    return Marginal1D::tabulated(std::move(grid), std::move(cdf));
}

Marginal1D recenter(const Marginal1D& m, double target) {
    if (!std::isfinite(target)) throw DomainError("recenter: target must be finite");
    const double shift = target - m.mean();
    if (const auto* t = std::get_if<Marginal1D::Tabulated>(&m.kind())) {
        std::vector<double> grid = t->grid;
        for (double& x : grid) x += shift;
        return Marginal1D::tabulated(std::move(grid), t->cdf);
    }
    if (const auto* d = std::get_if<Marginal1D::Discrete>(&m.kind())) {
        std::vector<double> atoms = d->atoms;
        for (double& x : atoms) x += shift;
        return Marginal1D::discrete(std::move(atoms), d->weights);
    }
    const auto& n = std::get<Marginal1D::Normal>(m.kind());
    return Marginal1D::normal(target, n.stddev);
}

}  // namespace vmot
