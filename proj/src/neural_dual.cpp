#include "vmot/neural_dual.hpp"

#include "vmot/errors.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

namespace vmot {

namespace {

double normal_score(double u) {
    using boost::math::erfc_inv;
    return u < 0.5 ? -std::sqrt(2.0) * erfc_inv(2.0 * u) : std::sqrt(2.0) * erfc_inv(2.0 * (1.0 - u));
}

std::size_t u_rows(Formulation f, std::size_t d) { return f == Formulation::Full ? d : 1; }

Rng stream(std::uint64_t seed, std::uint64_t k) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(k)};
    return Rng(seq);
}

void check_gamma(double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("gamma must be positive and finite");
}

Batch slice(const Batch& b, const std::vector<Eigen::Index>& perm, Eigen::Index start, Eigen::Index n) {
    Batch s;
    s.zu.resize(b.zu.rows(), n);
    s.zv.resize(b.zv.rows(), n);
    s.x.resize(b.x.rows(), n);
    s.y.resize(b.y.rows(), n);
    s.c.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index j = perm[static_cast<std::size_t>(start + k)];
        s.zu.col(k) = b.zu.col(j);
        s.zv.col(k) = b.zv.col(j);
        s.x.col(k) = b.x.col(j);
        s.y.col(k) = b.y.col(j);
        s.c(k) = b.c(j);
    }
    return s;
}

Eigen::MatrixXd net_input(const DualState& s, const Batch& b, std::size_t k) {
    const std::size_t np = s.n_phi(), d = s.dim();
    if (k < np) {
        if (s.formulation() == Formulation::Full) return b.zu.row(static_cast<Eigen::Index>(k));
        return b.zu;
    }
    if (k < np + d) return b.zv.row(static_cast<Eigen::Index>(k - np));
    return b.zu;
}

void check_batch(const DualState& s, const Batch& b) {
    const auto d = static_cast<Eigen::Index>(s.dim());
    if (b.zu.rows() != static_cast<Eigen::Index>(u_rows(s.formulation(), s.dim())) || b.zv.rows() != d ||
        b.x.rows() != d || b.y.rows() != d)
        throw DomainError("batch shape does not match the formulation");
}

struct Forward {
    std::vector<Eigen::RowVectorXd> out;
    std::vector<Mlp::Tape> tapes;
    Eigen::RowVectorXd linear;   // phi + sum psi per point
    Eigen::RowVectorXd payoff;
};

Forward forward_all(const DualState& s, const Batch& b, bool keep_tapes) {
    check_batch(s, b);
    const std::size_t np = s.n_phi(), d = s.dim();
    const double sc = s.output_scale();
    Forward f;
    f.out.resize(s.n_nets());
    if (keep_tapes) f.tapes.resize(s.n_nets());
    f.linear = Eigen::RowVectorXd::Zero(b.size());
    f.payoff = Eigen::RowVectorXd::Zero(b.size());
    for (std::size_t k = 0; k < s.n_nets(); ++k) {
        f.out[k] = sc * s.net(k).forward(s.params().data() + s.net_offset(k), net_input(s, b, k),
                                         keep_tapes ? &f.tapes[k] : nullptr);
        if (k < np + d) {
            f.linear += f.out[k];
        } else {
            const auto i = static_cast<Eigen::Index>(k - np - d);
            f.payoff += f.out[k].cwiseProduct(b.y.row(i) - b.x.row(i));
        }
    }
    f.payoff += f.linear;
    return f;
}

}  // namespace

const char* to_string(Formulation f) {
    switch (f) {
        case Formulation::Full: return "full";
        case Formulation::Reduced: return "reduced";
        case Formulation::ReducedAnti: return "reduced-anti";
    }
    return "?";
}

Formulation parse_formulation(const std::string& s) {
    if (s == "full") return Formulation::Full;
    if (s == "reduced") return Formulation::Reduced;
    if (s == "reduced-anti") return Formulation::ReducedAnti;
    throw DomainError("unknown formulation '" + s + "'");
}

void VmotInstance::validate() const {
    if (mu.empty() || mu.size() != nu.size()) throw DomainError("VmotInstance: need d >= 1 pairs of marginals");
    if (cost.dim() != 0 && cost.dim() != mu.size())
        throw DomainError("VmotInstance: cost dimension " + std::to_string(cost.dim()) + " does not match d = " +
                          std::to_string(mu.size()));
}

Batch batch_at(const VmotInstance& inst, Formulation f, const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) {
    const std::size_t d = inst.dim();
    if (f == Formulation::ReducedAnti && d != 2) throw DomainError("reduced-anti formulation needs d = 2");
    if (u.rows() != static_cast<Eigen::Index>(u_rows(f, d)) || v.rows() != static_cast<Eigen::Index>(d) ||
        u.cols() != v.cols())
        throw DomainError("quantile levels do not match the formulation");
    const Eigen::Index n = u.cols();
    const auto di = static_cast<Eigen::Index>(d);
    Batch b;
    b.zu = u.unaryExpr([](double t) {
        if (!(t > 0.0 && t < 1.0)) throw DomainError("quantile level outside (0,1)");
        return normal_score(t);
    });
    b.zv = v.unaryExpr([](double t) {
        if (!(t > 0.0 && t < 1.0)) throw DomainError("quantile level outside (0,1)");
        return normal_score(t);
    });
    b.x.resize(di, n);
    b.y.resize(di, n);
    b.c.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index i = 0; i < di; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            double ui = f == Formulation::Full ? u(i, k) : u(0, k);
            if (f == Formulation::ReducedAnti && i == 1) ui = 1.0 - ui;
            b.x(i, k) = inst.mu[iu].quantile(ui);
            b.y(i, k) = inst.nu[iu].quantile(v(i, k));
        }
        b.c(k) = inst.cost(std::span<const double>(b.x.col(k).data(), d),
                           std::span<const double>(b.y.col(k).data(), d));
    }
    return b;
}

Batch sample_batch(const VmotInstance& inst, Formulation f, Eigen::Index n, Rng& rng) {
    const std::size_t d = inst.dim();
    Eigen::MatrixXd u(static_cast<Eigen::Index>(u_rows(f, d)), n), v(static_cast<Eigen::Index>(d), n);
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index i = 0; i < u.rows(); ++i) u(i, k) = open_uniform(rng);
        for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, k) = open_uniform(rng);
    }
    return batch_at(inst, f, u, v);
}

DualState::DualState(Formulation f, std::size_t d, double gamma, std::vector<int> hidden)
    : formulation_(f), d_(d), gamma_(gamma), hidden_(std::move(hidden)) {
    check_gamma(gamma);
    if (d == 0) throw DomainError("DualState: d must be positive");
    if (f == Formulation::ReducedAnti && d != 2) throw DomainError("reduced-anti formulation needs d = 2");
    const int hin = f == Formulation::Full ? static_cast<int>(d) : 1;
    for (std::size_t i = 0; i < n_phi(); ++i) nets_.emplace_back(1, hidden_);
    for (std::size_t i = 0; i < d; ++i) nets_.emplace_back(1, hidden_);
    for (std::size_t i = 0; i < d; ++i) nets_.emplace_back(hin, hidden_);
    Eigen::Index total = 0;
    for (const auto& m : nets_) {
        offsets_.push_back(total);
        total += m.n_params();
    }
    params_ = Eigen::VectorXd::Zero(total);
}

void DualState::set_output_scale(double s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("output scale must be positive");
    scale_ = s;
}

void DualState::init(Rng& rng) {
    for (std::size_t k = 0; k < nets_.size(); ++k) nets_[k].init(params_.data() + offsets_[k], rng);
}

std::string DualState::net_name(std::size_t k) const {
    const std::size_t np = n_phi();
    if (k < np) return np == 1 ? "phi" : "phi_" + std::to_string(k + 1);
    if (k < np + d_) return "psi_" + std::to_string(k - np + 1);
    return "h_" + std::to_string(k - np - d_ + 1);
}

void DualState::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << std::setprecision(17);
    out << "vmot-dual-state 1\n";
    out << "formulation " << to_string(formulation_) << "\n";
    out << "dim " << d_ << "\n";
    out << "gamma " << gamma_ << "\n";
    out << "output_scale " << scale_ << "\n";
    out << "hidden";
    for (int h : hidden_) out << ' ' << h;
    out << "\n";
    out << "adam " << adam_.lr() << ' ' << adam_.beta1() << ' ' << adam_.beta2() << ' ' << adam_.eps() << ' '
        << adam_.steps() << "\n";
    out << "params " << params_.size() << "\n";
    for (Eigen::Index k = 0; k < params_.size(); ++k) out << params_[k] << "\n";
    const Eigen::Index nm = adam_.first_moment().size();
    out << "moments " << nm << "\n";
    for (Eigen::Index k = 0; k < nm; ++k) out << adam_.first_moment()[k] << ' ' << adam_.second_moment()[k] << "\n";
}

DualState DualState::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::size_t line_no = 0;
    auto next = [&](const std::string& key) {
        std::string line;
        if (!std::getline(in, line)) throw ParseError("unexpected end of file, expected '" + key + "'", line_no + 1);
        ++line_no;
        std::istringstream ss(line);
        std::string k;
        ss >> k;
        if (k != key) throw ParseError("expected '" + key + "'", line_no);
        std::string rest;
        std::getline(ss, rest);
        return std::istringstream(rest);
    };
    {
        auto s = next("vmot-dual-state");
        int v = 0;
        s >> v;
        if (v != 1) throw ParseError("unsupported version", line_no);
    }
    std::string fname;
    next("formulation") >> fname;
    std::size_t d = 0;
    next("dim") >> d;
    double gamma = 0, scale = 0;
    next("gamma") >> gamma;
    next("output_scale") >> scale;
    std::vector<int> hidden;
    {
        auto s = next("hidden");
        int h;
        while (s >> h) hidden.push_back(h);
    }
    double lr = 0, b1 = 0, b2 = 0, eps = 0;
    long long steps = 0;
    {
        auto s = next("adam");
        if (!(s >> lr >> b1 >> b2 >> eps >> steps)) throw ParseError("malformed adam line", line_no);
    }
    DualState st(parse_formulation(fname), d, gamma, hidden);
    st.set_output_scale(scale);
    st.adam_ = Adam(lr, b1, b2, eps);
    st.adam_.set_steps(steps);
    Eigen::Index np = 0;
    next("params") >> np;
    if (np != st.params_.size()) throw ParseError("parameter count does not match the architecture", line_no);
    for (Eigen::Index k = 0; k < np; ++k) {
        if (!(in >> st.params_[k])) throw ParseError("malformed parameter", line_no + 1);
        ++line_no;
    }
    in >> std::ws;
    Eigen::Index nm = 0;
    next("moments") >> nm;
    if (nm != 0 && nm != np) throw ParseError("moment count does not match", line_no);
    st.adam_.first_moment().resize(nm);
    st.adam_.second_moment().resize(nm);
    for (Eigen::Index k = 0; k < nm; ++k) {
        if (!(in >> st.adam_.first_moment()[k] >> st.adam_.second_moment()[k]))
            throw ParseError("malformed moment", line_no + 1);
        ++line_no;
    }
    return st;
}

double penalty(double gamma, double t) {
    const double p = std::max(t, 0.0);
    return 0.5 * gamma * p * p;
}

double penalty_derivative(double gamma, double t) { return gamma * std::max(t, 0.0); }

Eigen::RowVectorXd dual_payoff(const DualState& s, const Batch& b) { return forward_all(s, b, false).payoff; }

double dual_payoff(const DualState& s, const VmotInstance& inst, std::span<const double> u,
                   std::span<const double> v) {
    if (inst.dim() != s.dim()) throw DomainError("dual_payoff: instance dimension mismatch");
    if (u.size() != u_rows(s.formulation(), s.dim()) || v.size() != s.dim())
        throw DomainError("dual_payoff: inputs do not match the formulation");
    Eigen::MatrixXd um(static_cast<Eigen::Index>(u.size()), 1), vm(static_cast<Eigen::Index>(v.size()), 1);
    for (std::size_t i = 0; i < u.size(); ++i) um(static_cast<Eigen::Index>(i), 0) = u[i];
    for (std::size_t i = 0; i < v.size(); ++i) vm(static_cast<Eigen::Index>(i), 0) = v[i];
    return dual_payoff(s, batch_at(inst, s.formulation(), um, vm))(0);
}

LossParts loss(const DualState& s, const Batch& b, Eigen::VectorXd* grad) {
    check_gamma(s.gamma());
    const Eigen::Index n = b.size();
    if (n == 0) throw DomainError("loss: empty batch");
    Forward f = forward_all(s, b, grad != nullptr);
    const double g = s.gamma();
    const Eigen::RowVectorXd r = (b.c - f.payoff).cwiseMax(0.0);
    LossParts parts;
    parts.linear = f.linear.mean();
    parts.penalty = 0.5 * g * r.squaredNorm() / static_cast<double>(n);
    if (grad) {
        if (grad->size() != s.params().size()) *grad = Eigen::VectorXd::Zero(s.params().size());
        const std::size_t np = s.n_phi(), d = s.dim();
        const double sc = s.output_scale();
        const double inv_n = 1.0 / static_cast<double>(n);
        const Eigen::RowVectorXd dpay = (-g * inv_n) * r;
        for (std::size_t k = 0; k < s.n_nets(); ++k) {
            Eigen::RowVectorXd dout;
            if (k < np + d) {
                dout = sc * (dpay.array() + inv_n).matrix();
            } else {
                const auto i = static_cast<Eigen::Index>(k - np - d);
                dout = sc * dpay.cwiseProduct(b.y.row(i) - b.x.row(i));
            }
            s.net(k).backward(s.params().data() + s.net_offset(k), f.tapes[k], dout,
                              grad->data() + s.net_offset(k));
        }
    }
    return parts;
}

std::size_t TrainConfig::summary_window() const {
    const std::size_t total = total_epochs();
    std::size_t w = window ? window : std::min<std::size_t>(100, (total + 2) / 3);
    return std::max<std::size_t>(1, std::min(w, total));
}

void TrainReport::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << std::setprecision(12) << "epoch,dual_value,std_err\n";
    for (std::size_t e = 0; e < epoch_values.size(); ++e)
        out << e + 1 << ',' << epoch_values[e] << ',' << epoch_std_err[e] << "\n";
}

namespace {

Estimate evaluate(const DualState& s, const VmotInstance& inst, std::size_t n_points, Rng& rng) {
    const Eigen::Index chunk = 10000;
    long double sum = 0.0L, sum2 = 0.0L;
    std::size_t done = 0;
    while (done < n_points) {
        const auto m = static_cast<Eigen::Index>(std::min<std::size_t>(chunk, n_points - done));
        const Batch b = sample_batch(inst, s.formulation(), m, rng);
        const Forward f = forward_all(s, b, false);
        for (Eigen::Index k = 0; k < m; ++k) {
            const double w = f.linear(k) + penalty(s.gamma(), b.c(k) - f.payoff(k));
            sum += w;
            sum2 += static_cast<long double>(w) * w;
        }
        done += static_cast<std::size_t>(m);
    }
    Estimate e;
    const auto n = static_cast<long double>(n_points);
    e.mean = static_cast<double>(sum / n);
    if (n_points > 1) {
        const long double var = std::max(0.0L, (sum2 - sum * sum / n) / (n - 1));
        e.std_err = static_cast<double>(std::sqrt(var / n));
    }
    return e;
}

}  // namespace

Estimate dual_value(const DualState& s, const VmotInstance& inst, std::size_t n_points, std::uint64_t seed) {
    if (n_points == 0) throw DomainError("dual_value: need at least one point");
    if (inst.dim() != s.dim()) throw DomainError("dual_value: instance dimension mismatch");
    Rng rng = stream(seed, 3);
    return evaluate(s, inst, n_points, rng);
}

TrainResult train(const VmotInstance& inst, Formulation f, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    inst.validate();
    check_gamma(cfg.gamma);
    if (cfg.n_batches == 0 || cfg.points_per_batch == 0 || cfg.epochs_per_batch == 0 || cfg.minibatch == 0 ||
        cfg.n_eval == 0)
        throw DomainError("train: budget entries must be positive");
    if (!(cfg.learning_rate > 0.0)) throw DomainError("train: learning rate must be positive");
    for (std::size_t i = 0; i < inst.dim(); ++i) {
        if (!convex_order(inst.mu[i], inst.nu[i]))
            std::cerr << "warning: marginal pair " << i + 1 << " fails the numeric convex order check\n";
    }
    const auto t0 = std::chrono::steady_clock::now();
    Rng init_rng = stream(cfg.seed, 0);
    Rng train_rng = stream(cfg.seed, 1);
    Rng eval_rng = stream(cfg.seed, 2);

    TrainResult res{DualState(f, inst.dim(), cfg.gamma, cfg.hidden), {}};
    DualState& s = res.state;
    s.init(init_rng);
    s.optimizer() = Adam(cfg.learning_rate);

    TrainReport& rep = res.report;
    rep.config = cfg;
    rep.formulation = f;
    const auto npts = static_cast<Eigen::Index>(cfg.points_per_batch);
    const auto mb = static_cast<Eigen::Index>(cfg.minibatch);
    std::vector<Eigen::Index> perm(cfg.points_per_batch);
    Eigen::VectorXd grad(s.params().size());
    std::size_t epoch = 0;
    for (std::size_t bi = 0; bi < cfg.n_batches; ++bi) {
        const Batch batch = sample_batch(inst, f, npts, train_rng);
        if (bi == 0 && cfg.normalize_output) {
            const double rms = std::sqrt(batch.c.squaredNorm() / static_cast<double>(npts));
            if (rms > 0.0 && std::isfinite(rms)) s.set_output_scale(rms);
        }
        for (std::size_t e = 0; e < cfg.epochs_per_batch; ++e) {
            std::iota(perm.begin(), perm.end(), Eigen::Index{0});
            for (std::size_t k = perm.size(); k > 1; --k) {
                std::uniform_int_distribution<std::size_t> pick(0, k - 1);
                std::swap(perm[k - 1], perm[pick(train_rng)]);
            }
            for (Eigen::Index start = 0; start < npts; start += mb) {
                const Batch sub = slice(batch, perm, start, std::min(mb, npts - start));
                grad.setZero();
                const LossParts lp = loss(s, sub, &grad);
                if (!std::isfinite(lp.total()) || !grad.allFinite()) {
                    std::ostringstream msg;
                    msg << "training diverged at epoch " << epoch + 1 << " (loss " << lp.total() << ", linear "
                        << lp.linear << ", penalty " << lp.penalty << ")";
                    throw TrainingError(msg.str());
                }
                s.optimizer().step(s.params(), grad);
            }
            const Estimate est = evaluate(s, inst, cfg.n_eval, eval_rng);
            if (!std::isfinite(est.mean)) {
                throw TrainingError("dual estimate is not finite at epoch " + std::to_string(epoch + 1));
            }
            rep.epoch_values.push_back(est.mean);
            rep.epoch_std_err.push_back(est.std_err);
            ++epoch;
            if (on_epoch) on_epoch(epoch, est.mean);
            s.optimizer().set_lr(s.optimizer().lr() * cfg.lr_decay);
        }
    }
    rep.window = cfg.summary_window();
    const auto first = rep.epoch_values.end() - static_cast<std::ptrdiff_t>(rep.window);
    rep.mean = std::accumulate(first, rep.epoch_values.end(), 0.0) / static_cast<double>(rep.window);
    double ss = 0.0;
    for (auto it = first; it != rep.epoch_values.end(); ++it) ss += (*it - rep.mean) * (*it - rep.mean);
    rep.std = rep.window > 1 ? std::sqrt(ss / static_cast<double>(rep.window - 1)) : 0.0;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

DensityResult primal_density(const DualState& s, const VmotInstance& inst, std::size_t n_grid,
                             std::size_t n_inner, std::uint64_t seed) {
    const std::size_t d = s.dim();
    if (d < 2) throw UnsupportedError("primal_density needs d >= 2");
    if (inst.dim() != d) throw DomainError("primal_density: instance dimension mismatch");
    if (n_grid == 0 || n_inner == 0) throw DomainError("primal_density: grid and inner sizes must be positive");
    Rng rng = stream(seed, 4);
    const Formulation f = s.formulation();
    std::vector<double> axis(n_grid);
    for (std::size_t i = 0; i < n_grid; ++i) axis[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n_grid);
    std::vector<double> values(n_grid * n_grid, 0.0);
    const auto ni = static_cast<Eigen::Index>(n_inner);
    const auto ur = static_cast<Eigen::Index>(u_rows(f, d));
    auto cell_mean = [&](double u1, double u2) {
        Eigen::MatrixXd u(ur, ni), v(static_cast<Eigen::Index>(d), ni);
        for (Eigen::Index k = 0; k < ni; ++k) {
            u(0, k) = u1;
            if (f == Formulation::Full) {
                u(1, k) = u2;
                for (Eigen::Index i = 2; i < ur; ++i) u(i, k) = open_uniform(rng);
            }
            for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, k) = open_uniform(rng);
        }
        const Batch b = batch_at(inst, f, u, v);
        const Eigen::RowVectorXd pay = dual_payoff(s, b);
        double acc = 0.0;
        for (Eigen::Index k = 0; k < ni; ++k) acc += penalty_derivative(s.gamma(), b.c(k) - pay(k));
        return acc / static_cast<double>(ni);
    };
    for (std::size_t i = 0; i < n_grid; ++i) {
        if (f == Formulation::Full) {
            for (std::size_t j = 0; j < n_grid; ++j) values[i * n_grid + j] = cell_mean(axis[i], axis[j]);
        } else if (f == Formulation::Reduced) {
            values[i * n_grid + i] = cell_mean(axis[i], axis[i]);
        } else {
            values[i * n_grid + (n_grid - 1 - i)] = cell_mean(axis[i], axis[n_grid - 1 - i]);
        }
    }
    const double cell = 1.0 / static_cast<double>(n_grid * n_grid);
    const double mass = std::accumulate(values.begin(), values.end(), 0.0) * cell;
    DensityResult res;
    if (!(mass > 0.0) || !std::isfinite(mass)) {
        res.uniform_fallback = true;
        std::fill(values.begin(), values.end(), 1.0);
    } else {
        for (double& v : values) v /= mass;
    }
    res.density = GridFn({axis, axis}, std::move(values));
    return res;
}

}  // namespace vmot
