#include "vmot/lp_oracle.hpp"

#include "vmot/csv.hpp"
#include "vmot/errors.hpp"
#include "vmot/modularity.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

namespace vmot {

namespace {

constexpr double kAtomTol = 1e-12;

const Marginal1D::Discrete& as_discrete(const Marginal1D& m, const char* what) {
    const auto* d = std::get_if<Marginal1D::Discrete>(&m.kind());
    if (!d) throw DomainError(std::string(what) + ": marginals must be discrete");
    return *d;
}

std::vector<double> distinct_values(const Eigen::MatrixXd& pts, Eigen::Index col) {
    std::vector<double> v(pts.rows());
    for (Eigen::Index k = 0; k < pts.rows(); ++k) v[k] = pts(k, col);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

// Weight of each distinct support value under the marginal; every atom of the
// marginal must appear among the support values.
std::vector<double> weights_on(const std::vector<double>& values, const Marginal1D& m, const char* what) {
    const auto& d = as_discrete(m, what);
    std::vector<double> w(values.size(), 0.0);
    for (std::size_t a = 0; a < d.atoms.size(); ++a) {
        auto it = std::lower_bound(values.begin(), values.end(), d.atoms[a] - kAtomTol);
        if (it == values.end() || std::abs(*it - d.atoms[a]) > kAtomTol) {
            if (d.weights[a] == 0.0) continue;
            throw DomainError(std::string(what) + ": marginal atom " + csv::format(d.atoms[a]) +
                              " is not a support coordinate");
        }
        w[static_cast<std::size_t>(it - values.begin())] += d.weights[a];
    }
    return w;
}

std::size_t value_index(const std::vector<double>& values, double v) {
    return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), v) - values.begin());
}

std::vector<std::vector<double>> product(const std::vector<std::vector<double>>& axes) {
    std::vector<std::vector<double>> out{{}};
    for (const auto& a : axes) {
        std::vector<std::vector<double>> next;
        for (const auto& p : out) {
            for (double v : a) {
                auto q = p;
                q.push_back(v);
                next.push_back(std::move(q));
            }
        }
        out = std::move(next);
    }
    return out;
}

Eigen::MatrixXd rows_to_matrix(const std::vector<std::vector<double>>& pts) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(pts.front().size()));
    for (std::size_t k = 0; k < pts.size(); ++k) {
        for (std::size_t i = 0; i < pts[k].size(); ++i) m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = pts[k][i];
    }
    return m;
}

void write_points(const std::string& path, const Eigen::MatrixXd& p) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (Eigen::Index i = 0; i < p.cols(); ++i) out << (i ? "," : "") << "x_" << (i + 1);
    out << '\n';
    for (Eigen::Index k = 0; k < p.rows(); ++k) {
        for (Eigen::Index i = 0; i < p.cols(); ++i) out << (i ? "," : "") << csv::format(p(k, i));
        out << '\n';
    }
}

Eigen::MatrixXd read_points(const std::string& path) {
    const auto t = csv::read(path);
    if (t.rows.empty()) throw ParseError(path + ": no points");
    Eigen::MatrixXd p(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (std::size_t i = 0; i < t.header.size(); ++i) {
            p(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = csv::to_double(t.rows[r][i], t.lines[r]);
        }
    }
    return p;
}

void write_marginals(const std::string& path, const std::vector<Marginal1D>& ms) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "coordinate,atom,weight\n";
    for (std::size_t i = 0; i < ms.size(); ++i) {
        const auto& d = as_discrete(ms[i], "save");
        for (std::size_t a = 0; a < d.atoms.size(); ++a) {
            out << (i + 1) << ',' << csv::format(d.atoms[a]) << ',' << csv::format(d.weights[a]) << '\n';
        }
    }
}

std::vector<Marginal1D> read_marginals(const std::string& path) {
    const auto t = csv::read(path);
    if (t.header.size() != 3) throw ParseError(path + ": expected coordinate,atom,weight", 1);
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> by;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const double c = csv::to_double(t.rows[r][0], t.lines[r]);
        if (c < 1 || c != std::floor(c)) throw ParseError(path + ": bad coordinate index", t.lines[r]);
        auto& e = by[static_cast<int>(c)];
        e.first.push_back(csv::to_double(t.rows[r][1], t.lines[r]));
        e.second.push_back(csv::to_double(t.rows[r][2], t.lines[r]));
    }
    std::vector<Marginal1D> out;
    int expect = 1;
    for (auto& [c, aw] : by) {
        if (c != expect++) throw ParseError(path + ": coordinates must be 1..d");
        try {
            out.push_back(Marginal1D::discrete(std::move(aw.first), std::move(aw.second)));
        } catch (const DomainError& e) {
            throw ParseError(path + ": " + e.what());
        }
    }
    return out;
}

}  // namespace

DiscreteVmot DiscreteVmot::from_marginals(std::vector<Marginal1D> mu, std::vector<Marginal1D> nu,
                                          const CostSpec& c) {
    if (mu.empty() || mu.size() != nu.size()) throw DomainError("from_marginals: need d mu and d nu marginals");
    if (c.dim() != 0 && c.dim() != mu.size()) throw DomainError("from_marginals: cost dimension mismatch");
    std::vector<std::vector<double>> xa, ya;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        xa.push_back(as_discrete(mu[i], "from_marginals").atoms);
        ya.push_back(as_discrete(nu[i], "from_marginals").atoms);
    }
    DiscreteVmot inst;
    inst.x = rows_to_matrix(product(xa));
    inst.y = rows_to_matrix(product(ya));
    inst.mu = std::move(mu);
    inst.nu = std::move(nu);
    inst.cost.resize(inst.x.rows(), inst.y.rows());
    std::vector<double> xv(inst.dim()), yv(inst.dim());
    for (Eigen::Index k = 0; k < inst.x.rows(); ++k) {
        for (std::size_t i = 0; i < inst.dim(); ++i) xv[i] = inst.x(k, static_cast<Eigen::Index>(i));
        for (Eigen::Index l = 0; l < inst.y.rows(); ++l) {
            for (std::size_t i = 0; i < inst.dim(); ++i) yv[i] = inst.y(l, static_cast<Eigen::Index>(i));
            inst.cost(k, l) = c(xv, yv);
        }
    }
    return inst;
}

void DiscreteVmot::validate() const {
    const auto d = x.cols();
    if (x.rows() == 0 || y.rows() == 0) throw DomainError("DiscreteVmot: empty support");
    if (d == 0 || y.cols() != d) throw DomainError("DiscreteVmot: support dimension mismatch");
    if (static_cast<Eigen::Index>(mu.size()) != d || static_cast<Eigen::Index>(nu.size()) != d) {
        throw DomainError("DiscreteVmot: need one mu and one nu marginal per coordinate");
    }
    if (cost.rows() != x.rows() || cost.cols() != y.rows()) throw DomainError("DiscreteVmot: cost shape mismatch");
    if (!cost.allFinite()) throw DomainError("DiscreteVmot: cost must be finite");
    for (Eigen::Index i = 0; i < d; ++i) {
        weights_on(distinct_values(x, i), mu[static_cast<std::size_t>(i)], "DiscreteVmot");
        weights_on(distinct_values(y, i), nu[static_cast<std::size_t>(i)], "DiscreteVmot");
    }
    if (fixed_pix) {
        if (fixed_pix->dim() != static_cast<std::size_t>(d)) throw DomainError("DiscreteVmot: fixed_pix dimension mismatch");
    }
}

StandardLp assemble(const DiscreteVmot& inst, Direction dir) {
    inst.validate();
    const Eigen::Index m = inst.x.rows(), n = inst.y.rows(), d = inst.x.cols();
    const Eigen::Index nv = m * n;

    std::vector<std::vector<double>> xv(d), yv(d), xw(d), yw(d);
    Eigen::Index rows = 0;
    for (Eigen::Index i = 0; i < d; ++i) {
        xv[i] = distinct_values(inst.x, i);
        yv[i] = distinct_values(inst.y, i);
        xw[i] = weights_on(xv[i], inst.mu[i], "assemble");
        yw[i] = weights_on(yv[i], inst.nu[i], "assemble");
        rows += static_cast<Eigen::Index>(xv[i].size() + yv[i].size());
    }
    const Eigen::Index mart0 = rows;
    rows += m * d;
    const Eigen::Index fix0 = rows;
    std::vector<double> fixed_w;
    if (inst.fixed_pix) {
        fixed_w.assign(static_cast<std::size_t>(m), 0.0);
        const auto& fp = *inst.fixed_pix;
        for (std::size_t a = 0; a < fp.size(); ++a) {
            bool found = false;
            for (Eigen::Index k = 0; k < m && !found; ++k) {
                bool eq = true;
                for (Eigen::Index i = 0; i < d; ++i) eq = eq && std::abs(inst.x(k, i) - fp.point(a)[i]) <= kAtomTol;
                if (eq) {
                    fixed_w[k] += fp.weight(a);
                    found = true;
                }
            }
            if (!found && fp.weight(a) > 0.0) throw DomainError("assemble: fixed_pix atom outside the x support");
        }
        rows += m;
    }

    StandardLp lp;
    lp.A = Eigen::MatrixXd::Zero(rows, nv);
    lp.b = Eigen::VectorXd::Zero(rows);
    lp.c.resize(nv);
    const double sign = dir == Direction::Maximize ? -1.0 : 1.0;
    for (Eigen::Index k = 0; k < m; ++k) {
        for (Eigen::Index l = 0; l < n; ++l) lp.c(k * n + l) = sign * inst.cost(k, l);
    }

    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < d; ++i) {
        for (std::size_t a = 0; a < xv[i].size(); ++a) lp.b(r + static_cast<Eigen::Index>(a)) = xw[i][a];
        for (Eigen::Index k = 0; k < m; ++k) {
            const auto row = r + static_cast<Eigen::Index>(value_index(xv[i], inst.x(k, i)));
            for (Eigen::Index l = 0; l < n; ++l) lp.A(row, k * n + l) = 1.0;
        }
        r += static_cast<Eigen::Index>(xv[i].size());
        for (std::size_t a = 0; a < yv[i].size(); ++a) lp.b(r + static_cast<Eigen::Index>(a)) = yw[i][a];
        for (Eigen::Index l = 0; l < n; ++l) {
            const auto row = r + static_cast<Eigen::Index>(value_index(yv[i], inst.y(l, i)));
            for (Eigen::Index k = 0; k < m; ++k) lp.A(row, k * n + l) = 1.0;
        }
        r += static_cast<Eigen::Index>(yv[i].size());
    }
    for (Eigen::Index k = 0; k < m; ++k) {
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index l = 0; l < n; ++l) lp.A(mart0 + k * d + i, k * n + l) = inst.y(l, i) - inst.x(k, i);
        }
    }
    if (inst.fixed_pix) {
        for (Eigen::Index k = 0; k < m; ++k) {
            lp.b(fix0 + k) = fixed_w[k];
            for (Eigen::Index l = 0; l < n; ++l) lp.A(fix0 + k, k * n + l) = 1.0;
        }
    }
    return lp;
}

std::pair<double, double> residuals(const DiscreteVmot& inst, const Eigen::MatrixXd& plan) {
    const Eigen::Index d = inst.x.cols();
    double marg = 0.0, mart = 0.0;
    const Eigen::VectorXd rs = plan.rowwise().sum();
    const Eigen::VectorXd cs = plan.colwise().sum().transpose();
    for (Eigen::Index i = 0; i < d; ++i) {
        const auto xv = distinct_values(inst.x, i), yv = distinct_values(inst.y, i);
        const auto xw = weights_on(xv, inst.mu[i], "residuals"), yw = weights_on(yv, inst.nu[i], "residuals");
        std::vector<double> xs(xv.size(), 0.0), ys(yv.size(), 0.0);
        for (Eigen::Index k = 0; k < plan.rows(); ++k) xs[value_index(xv, inst.x(k, i))] += rs(k);
        for (Eigen::Index l = 0; l < plan.cols(); ++l) ys[value_index(yv, inst.y(l, i))] += cs(l);
        for (std::size_t a = 0; a < xs.size(); ++a) marg = std::max(marg, std::abs(xs[a] - xw[a]));
        for (std::size_t a = 0; a < ys.size(); ++a) marg = std::max(marg, std::abs(ys[a] - yw[a]));
    }
    for (Eigen::Index k = 0; k < plan.rows(); ++k) {
        for (Eigen::Index i = 0; i < d; ++i) {
            double s = 0.0;
            for (Eigen::Index l = 0; l < plan.cols(); ++l) s += plan(k, l) * (inst.y(l, i) - inst.x(k, i));
            mart = std::max(mart, std::abs(s));
        }
    }
    return {marg, mart};
}

LpSolution solve(const DiscreteVmot& inst, Direction dir) {
    const auto lp = assemble(inst, dir);
    const auto r = solve_lp(lp);
    LpSolution sol;
    sol.status = r.status;
    if (r.status != LpStatus::Optimal) return sol;
    const Eigen::Index m = inst.x.rows(), n = inst.y.rows();
    sol.plan.resize(m, n);
    for (Eigen::Index k = 0; k < m; ++k) {
        for (Eigen::Index l = 0; l < n; ++l) sol.plan(k, l) = r.x(k * n + l);
    }
    sol.value = (sol.plan.array() * inst.cost.array()).sum();
    std::tie(sol.marginal_residual, sol.martingale_residual) = residuals(inst, sol.plan);
    return sol;
}

DiscreteMeasure LpSolution::x_marginal(const DiscreteVmot& inst) const {
    if (status != LpStatus::Optimal) throw PreconditionError("x_marginal: no optimal plan");
    std::vector<double> pts, w;
    const Eigen::VectorXd rs = plan.rowwise().sum();
    const double total = rs.sum();
    for (Eigen::Index k = 0; k < plan.rows(); ++k) {
        if (rs(k) <= 0.0) continue;
        for (Eigen::Index i = 0; i < inst.x.cols(); ++i) pts.push_back(inst.x(k, i));
        w.push_back(rs(k) / total);
    }
    return DiscreteMeasure(inst.dim(), std::move(pts), std::move(w));
}

void LpSolution::save_plan_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "x_index,y_index,mass\n";
    for (Eigen::Index k = 0; k < plan.rows(); ++k) {
        for (Eigen::Index l = 0; l < plan.cols(); ++l) {
            if (plan(k, l) > 0.0) out << k << ',' << l << ',' << csv::format(plan(k, l)) << '\n';
        }
    }
}

void DiscreteVmot::save(const std::string& dir) const {
    validate();
    std::filesystem::create_directories(dir);
    write_points(dir + "/x_support.csv", x);
    write_points(dir + "/y_support.csv", y);
    write_marginals(dir + "/mu.csv", mu);
    write_marginals(dir + "/nu.csv", nu);
    std::ofstream out(dir + "/cost.csv");
    if (!out) throw std::runtime_error("cannot write " + dir + "/cost.csv");
    out << "x_index,y_index,cost\n";
    for (Eigen::Index k = 0; k < cost.rows(); ++k) {
        for (Eigen::Index l = 0; l < cost.cols(); ++l) out << k << ',' << l << ',' << csv::format(cost(k, l)) << '\n';
    }
    const std::string fp = dir + "/fixed_pix.csv";
    if (fixed_pix) {
        fixed_pix->save_csv(fp);
    } else if (std::filesystem::exists(fp)) {
        std::filesystem::remove(fp);
    }
}

DiscreteVmot DiscreteVmot::load(const std::string& dir) {
    DiscreteVmot inst;
    inst.x = read_points(dir + "/x_support.csv");
    inst.y = read_points(dir + "/y_support.csv");
    inst.mu = read_marginals(dir + "/mu.csv");
    inst.nu = read_marginals(dir + "/nu.csv");
    const std::string cpath = dir + "/cost.csv";
    const auto t = csv::read(cpath);
    if (t.header.size() != 3) throw ParseError(cpath + ": expected x_index,y_index,cost", 1);
    inst.cost = Eigen::MatrixXd::Constant(inst.x.rows(), inst.y.rows(), std::nan(""));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const double k = csv::to_double(t.rows[r][0], t.lines[r]);
        const double l = csv::to_double(t.rows[r][1], t.lines[r]);
        if (k < 0 || l < 0 || k >= inst.x.rows() || l >= inst.y.rows() || k != std::floor(k) || l != std::floor(l)) {
            throw ParseError(cpath + ": index out of range", t.lines[r]);
        }
        inst.cost(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = csv::to_double(t.rows[r][2], t.lines[r]);
    }
    if (!inst.cost.allFinite()) throw ParseError(cpath + ": missing or non-finite cost entries");
    if (std::filesystem::exists(dir + "/fixed_pix.csv")) inst.fixed_pix = DiscreteMeasure::load_csv(dir + "/fixed_pix.csv");
    try {
        inst.validate();
    } catch (const DomainError& e) {
        throw ParseError(dir + ": " + e.what());
    }
    return inst;
}

MonotoneReport verify_monotone_d2(const DiscreteVmot& inst, CouplingTarget target) {
    if (inst.dim() != 2) throw UnsupportedError("verify_monotone_d2: needs d = 2");
    MonotoneReport rep;
    for (std::size_t i = 0; i < 2; ++i) {
        const auto grid = default_order_grid(inst.mu[i], inst.nu[i]);
        if (!convex_order(inst.mu[i], inst.nu[i], grid)) {
            throw PreconditionError("verify_monotone_d2: marginals not in convex order");
        }
        (i == 0 ? rep.pair1 : rep.pair2) = irreducibility(inst.mu[i], inst.nu[i], grid);
    }
    rep.irreducible = rep.pair1 == Irreducibility::Irreducible && rep.pair2 == Irreducibility::Irreducible;
    rep.solution = solve(inst, Direction::Maximize);
    if (rep.solution.status != LpStatus::Optimal) return rep;

    const std::vector<Marginal1D> mus{inst.mu[0], inst.mu[1]};
    const auto chi = target == CouplingTarget::Monotone ? monotone_coupling_exact(mus)
                                                        : anti_monotone_coupling_exact(mus[0], mus[1]);
    const Eigen::VectorXd rs = rep.solution.plan.rowwise().sum();
    Eigen::VectorXd ref = Eigen::VectorXd::Zero(rs.size());
    for (std::size_t a = 0; a < chi.size(); ++a) {
        for (Eigen::Index k = 0; k < inst.x.rows(); ++k) {
            if (std::abs(inst.x(k, 0) - chi.point(a)[0]) <= kAtomTol &&
                std::abs(inst.x(k, 1) - chi.point(a)[1]) <= kAtomTol) {
                ref(k) += chi.weight(a);
                break;
            }
        }
    }
    rep.tv_distance = 0.5 * (rs - ref).cwiseAbs().sum() + 0.5 * std::abs(1.0 - ref.sum());
    rep.passed = rep.tv_distance <= 1e-7;
    return rep;
}

DiscreteVmot random_monotone_instance(Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> count(2, 3), slot(0, 20);
    std::vector<Marginal1D> mu, nu;
    for (int i = 0; i < 2; ++i) {
        const int k = count(rng);
        std::map<double, double> atoms;
        while (static_cast<int>(atoms.size()) < k) atoms[-1.0 + 0.25 * slot(rng)] = 0.0;
        double total = 0.0;
        for (auto& [x, w] : atoms) total += (w = 0.2 + unit(rng));
        std::map<double, double> kernel;
        std::vector<double> xs, ws;
        for (auto& [x, w] : atoms) {
            w /= total;
            xs.push_back(x);
            ws.push_back(w);
            const double alpha = 0.2 + 0.6 * unit(rng);
            kernel[-2.0] += w * alpha * (5.0 - x) / 7.0;
            kernel[5.0] += w * alpha * (x + 2.0) / 7.0;
            kernel[x - 0.5] += w * (1.0 - alpha) * 0.5;
            kernel[x + 0.5] += w * (1.0 - alpha) * 0.5;
        }
        std::vector<double> ys, vs;
        for (const auto& [y, v] : kernel) {
            ys.push_back(y);
            vs.push_back(v);
        }
        const double vsum = std::accumulate(vs.begin(), vs.end(), 0.0);
        for (double& v : vs) v /= vsum;
        const double wsum = std::accumulate(ws.begin(), ws.end(), 0.0);
        for (double& w : ws) w /= wsum;
        mu.push_back(Marginal1D::discrete(xs, ws));
        nu.push_back(Marginal1D::discrete(ys, vs));
    }
    const double eps = 0.05 + 0.95 * unit(rng);
    const auto c = CostSpec::custom({[eps](std::span<const double> x, std::span<const double> y) {
                                         return eps * x[0] * x[1] + y[0] * y[1];
                                     },
                                     true, "eps x1 x2 + y1 y2"});
    return DiscreteVmot::from_marginals(std::move(mu), std::move(nu), c);
}

std::vector<std::vector<double>> cube_vertices() {
    const auto g = cube_beta0();
    std::vector<std::vector<double>> v;
    for (std::size_t k = 0; k < g.size(); ++k) v.push_back(g.point(k));
    return v;
}

namespace {

double cx_cost(std::span<const double> y) { return y[0] * y[1] + y[1] * y[2] + y[2] * y[0]; }

const std::vector<double> kU{0.5, 0.75, 0.25}, kUp{0.4, 0.8, 0.2};
const std::vector<double> kUbar{0.4, 0.75, 0.2}, kUbarp{0.5, 0.8, 0.25};

}  // namespace

DiscreteVmot counterexample_instance() {
    // kernels on Z = {(0,0,-1), (0,1,0), (1,1,1)} with barycenters u and u'
    const std::vector<std::vector<double>> z{{0, 0, -1}, {0, 1, 0}, {1, 1, 1}};
    const std::vector<double> ku{0.25, 0.25, 0.5}, kup{0.2, 0.4, 0.4};
    std::vector<Marginal1D> mu, nu;
    for (std::size_t i = 0; i < 3; ++i) {
        std::map<double, double> mx{{kU[i], 0.0}, {kUp[i], 0.0}}, my;
        mx[kU[i]] += 0.5;
        mx[kUp[i]] += 0.5;
        for (std::size_t a = 0; a < 3; ++a) my[z[a][i]] += 0.5 * ku[a] + 0.5 * kup[a];
        std::vector<double> xa, xw, ya, yw;
        for (auto [a, w] : mx) {
            xa.push_back(a);
            xw.push_back(w);
        }
        for (auto [a, w] : my) {
            ya.push_back(a);
            yw.push_back(w);
        }
        mu.push_back(Marginal1D::discrete(xa, xw));
        nu.push_back(Marginal1D::discrete(ya, yw));
    }
    auto c = CostSpec::custom({[](std::span<const double>, std::span<const double> y) { return cx_cost(y); },
                               false, "y1 y2 + y2 y3 + y3 y1"});
    auto inst = DiscreteVmot::from_marginals(std::move(mu), std::move(nu), c);
    // the y grid of the product of nu atoms is exactly the twelve cube vertices
    return inst;
}

CounterexampleReport counterexample_d3() {
    CounterexampleReport rep;
    auto inst = counterexample_instance();

    const auto free = solve(inst);
    if (free.status != LpStatus::Optimal) throw FixtureError("counterexample: free LP not optimal");
    rep.free_value = free.value;

    auto fixed = inst;
    fixed.fixed_pix = DiscreteMeasure::from_points({kUbar, kUbarp}, {0.5, 0.5});
    const auto fs = solve(fixed);
    if (fs.status == LpStatus::Unbounded) throw FixtureError("counterexample: fixed LP unbounded");
    rep.fixed_value = fs.status == LpStatus::Optimal ? fs.value : -kInf;
    rep.gap = rep.free_value - rep.fixed_value;

    // explicit dual: c(y) <= sum psi_i(y_i) - sum phi_i(x_i) - h(x).(y - x)
    auto phi_i = [](std::size_t i, double x) {
        return i == 0 ? 0.5 * x : i == 1 ? 0.5 * x : -0.5 * x - 0.5;
    };
    auto psi_i = [](std::size_t i, double y) {
        if (i == 0) return y == 1.0 ? 2.0 : 0.0;
        if (i == 2) return y == 1.0 ? 1.0 : 0.0;
        return 0.0;
    };
    auto phi = [&](std::span<const double> x) { return phi_i(0, x[0]) + phi_i(1, x[1]) + phi_i(2, x[2]); };
    auto psi = [&](std::span<const double> y) { return psi_i(0, y[0]) + psi_i(1, y[1]) + psi_i(2, y[2]); };
    const auto pieces = cube_pieces();
    auto h = [&](std::span<const double> x) -> Eigen::Vector3d {
        const double l1 = pieces[0](x), l2 = pieces[1](x);
        if (std::abs(l1 - l2) <= 1e-12) return Eigen::Vector3d(0.5, 0.5, -0.5);
        return l1 > l2 ? Eigen::Vector3d(0, 0, 0) : Eigen::Vector3d(1, 1, -1);
    };
    auto slack = [&](std::span<const double> x, std::span<const double> y) {
        const Eigen::Vector3d hx = h(x);
        double hedge = psi(y) - phi(x);
        for (int i = 0; i < 3; ++i) hedge -= hx(i) * (y[i] - x[i]);
        return hedge - cx_cost(y);
    };

    rep.dual_min_slack = kInf;
    std::vector<double> xv(3), yv(3);
    for (Eigen::Index k = 0; k < inst.x.rows(); ++k) {
        for (int i = 0; i < 3; ++i) xv[i] = inst.x(k, i);
        for (Eigen::Index l = 0; l < inst.y.rows(); ++l) {
            for (int i = 0; i < 3; ++i) yv[i] = inst.y(l, i);
            rep.dual_min_slack = std::min(rep.dual_min_slack, slack(xv, yv));
        }
    }
    const std::vector<std::vector<double>> z{{0, 0, -1}, {0, 1, 0}, {1, 1, 1}};
    const std::vector<double> ku{0.25, 0.25, 0.5}, kup{0.2, 0.4, 0.4};
    for (const auto* x : {&kU, &kUp}) {
        for (const auto& y : z) rep.dual_max_support_slack = std::max(rep.dual_max_support_slack, std::abs(slack(*x, y)));
    }
    for (std::size_t a = 0; a < 3; ++a) {
        rep.constructed_value += 0.5 * ku[a] * cx_cost(z[a]) + 0.5 * kup[a] * cx_cost(z[a]);
    }
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& n = std::get<Marginal1D::Discrete>(inst.nu[i].kind());
        for (std::size_t a = 0; a < n.atoms.size(); ++a) rep.dual_value += n.weights[a] * psi_i(i, n.atoms[a]);
        const auto& m = std::get<Marginal1D::Discrete>(inst.mu[i].kind());
        for (std::size_t a = 0; a < m.atoms.size(); ++a) rep.dual_value -= m.weights[a] * phi_i(i, m.atoms[a]);
    }

    if (std::abs(rep.free_value - 1.35) > 1e-8) throw FixtureError("counterexample: free optimum differs from 27/20");
    if (!(rep.gap > 1e-6)) throw FixtureError("counterexample: fixing the monotone x-marginal does not lower the optimum");
    if (rep.dual_min_slack < -1e-12) throw FixtureError("counterexample: explicit dual is infeasible");
    if (rep.dual_max_support_slack > 1e-12) throw FixtureError("counterexample: explicit dual is not tight on the plan");
    if (std::abs(rep.dual_value - rep.free_value) > 1e-8) throw FixtureError("counterexample: dual value differs from primal");
    return rep;
}

}  // namespace vmot
