#include "vmot/closed_form.hpp"

#include "vmot/errors.hpp"

#include <cmath>
#include <random>

namespace vmot {

Eigen::VectorXd GaussianInstance::lambda() const {
    validate();
    return (rho.array().square() - sigma.array().square()).sqrt().matrix();
}

void GaussianInstance::validate() const {
    const Eigen::Index d = sigma.size();
    if (d < 1 || rho.size() != d) throw DomainError("GaussianInstance: sigma and rho must have equal positive length");
    if (a.rows() != d || a.cols() != d || b.rows() != d || b.cols() != d)
        throw DomainError("GaussianInstance: a and b must be d x d");
    for (Eigen::Index i = 0; i < d; ++i) {
        if (!(sigma[i] > 0.0)) throw DomainError("GaussianInstance: sigma must be positive");
        if (!(rho[i] > sigma[i])) throw DomainError("GaussianInstance: need rho_i > sigma_i");
        for (Eigen::Index j = i + 1; j < d; ++j) {
            if (a(i, j) < 0.0 || b(i, j) < 0.0) throw DomainError("GaussianInstance: a and b must be nonnegative");
        }
    }
}

CostSpec GaussianInstance::cost() const { return CostSpec::covariance(a, b); }

VmotInstance GaussianInstance::instance() const {
    validate();
    VmotInstance inst{{}, {}, cost()};
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        inst.mu.push_back(Marginal1D::normal(0.0, sigma[i]));
        inst.nu.push_back(Marginal1D::normal(0.0, rho[i]));
    }
    return inst;
}

GaussianInstance GaussianInstance::random(std::size_t d, Rng& rng) {
    if (d < 2) throw DomainError("GaussianInstance::random: need d >= 2");
    const auto n = static_cast<Eigen::Index>(d);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    GaussianInstance g;
    g.sigma.resize(n);
    g.rho.resize(n);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) g.sigma[i] = 1.0 + unit(rng);
    for (Eigen::Index i = 0; i < n; ++i) g.rho[i] = 2.0 + unit(rng);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = unit(rng);
    w /= w.sum();
    g.a = Eigen::MatrixXd::Zero(n, n);
    g.b = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) g.b(i, j) = w[i] * w[j];
    return g;
}

double exact_value(const GaussianInstance& g) {
    const Eigen::VectorXd lam = g.lambda();
    double v = 0.0;
    for (Eigen::Index i = 0; i < g.sigma.size(); ++i)
        for (Eigen::Index j = i + 1; j < g.sigma.size(); ++j)
            v += (g.a(i, j) + g.b(i, j)) * g.sigma[i] * g.sigma[j] + g.b(i, j) * lam[i] * lam[j];
    return v;
}

PathSamples sample_optimal_martingale(const GaussianInstance& g, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw DomainError("sample_optimal_martingale: n must be positive");
    const Eigen::VectorXd lam = g.lambda();
    const auto d = g.sigma.size();
    Rng rng(seed);
    std::normal_distribution<double> z;
    PathSamples s{Eigen::MatrixXd(d, static_cast<Eigen::Index>(n)), Eigen::MatrixXd(d, static_cast<Eigen::Index>(n))};
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(n); ++k) {
        const double u = z(rng), w = z(rng);
        s.x.col(k) = g.sigma * u;
        s.y.col(k) = s.x.col(k) + lam * w;
    }
    return s;
}

}  // namespace vmot
