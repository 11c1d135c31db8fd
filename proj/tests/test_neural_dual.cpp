#include "vmot/neural_dual.hpp"

#include "grad_check.hpp"
#include "oracles.hpp"
#include "vmot/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace vmot;

namespace {

CostSpec constant_cost(double k) {
    return CostSpec::custom({[k](std::span<const double>, std::span<const double>) { return k; }, false, "const"});
}

CostSpec y_product() {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2), b = Eigen::MatrixXd::Zero(2, 2);
    b(0, 1) = 1.0;
    return CostSpec::covariance(a, b);
}

VmotInstance normal_instance(CostSpec c, std::size_t d = 2) {
    VmotInstance inst{{}, {}, std::move(c)};
    for (std::size_t i = 0; i < d; ++i) {
        inst.mu.push_back(Marginal1D::normal(0.0, 1.0 + 0.2 * static_cast<double>(i)));
        inst.nu.push_back(Marginal1D::normal(0.0, 2.0));
    }
    return inst;
}

DualState random_state(Formulation f, std::size_t d, double gamma, std::uint64_t seed) {
    DualState s(f, d, gamma, {8, 8});
    Rng rng(seed);
    s.init(rng);
    return s;
}

TrainConfig small_config(std::uint64_t seed) {
    TrainConfig c;
    c.n_batches = 1;
    c.points_per_batch = 4000;
    c.epochs_per_batch = 4;
    c.minibatch = 500;
    c.n_eval = 2000;
    c.hidden = {16, 16};
    c.seed = seed;
    return c;
}

}  // namespace

TEST(Formulation, NamesRoundTrip) {
    for (auto f : {Formulation::Full, Formulation::Reduced, Formulation::ReducedAnti})
        EXPECT_EQ(parse_formulation(to_string(f)), f);
    EXPECT_THROW(parse_formulation("half"), DomainError);
}

TEST(Batch, SampleDimensions) {
    for (std::size_t d : {2u, 3u, 5u}) {
        const VmotInstance inst = normal_instance(constant_cost(0.0), d);
        Rng rng(1);
        const Batch full = sample_batch(inst, Formulation::Full, 10, rng);
        const Batch red = sample_batch(inst, Formulation::Reduced, 10, rng);
        EXPECT_EQ(full.zu.rows() + full.zv.rows(), static_cast<Eigen::Index>(2 * d));
        EXPECT_EQ(red.zu.rows() + red.zv.rows(), static_cast<Eigen::Index>(d + 1));
        EXPECT_EQ(full.size(), 10);
    }
}

TEST(Batch, ReducedUsesCommonQuantile) {
    const VmotInstance inst = normal_instance(constant_cost(0.0), 3);
    Rng rng(2);
    const Batch b = sample_batch(inst, Formulation::Reduced, 50, rng);
    for (Eigen::Index k = 0; k < b.size(); ++k) {
        const double u = oracle::normal_cdf(b.zu(0, k));
        for (Eigen::Index i = 0; i < 3; ++i)
            EXPECT_NEAR(b.x(i, k), inst.mu[static_cast<std::size_t>(i)].quantile(u), 1e-9);
    }
}

TEST(Batch, ReducedAntiReversesSecondCoordinate) {
    const VmotInstance inst = normal_instance(constant_cost(0.0), 2);
    Rng rng(3);
    const Batch b = sample_batch(inst, Formulation::ReducedAnti, 50, rng);
    for (Eigen::Index k = 0; k < b.size(); ++k) {
        EXPECT_NEAR(b.x(0, k) / 1.0, -b.x(1, k) / 1.2, 1e-9);
    }
    EXPECT_THROW(sample_batch(normal_instance(constant_cost(0.0), 3), Formulation::ReducedAnti, 5, rng), DomainError);
}

TEST(Batch, ScoresAreNormalQuantiles) {
    const VmotInstance inst = normal_instance(constant_cost(0.0), 2);
    Eigen::MatrixXd u(2, 3), v(2, 3);
    u << 0.1, 0.5, 0.999, 0.3, 0.7, 1e-6;
    v << 0.2, 0.4, 0.6, 0.8, 0.9, 0.95;
    const Batch b = batch_at(inst, Formulation::Full, u, v);
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index k = 0; k < 3; ++k) {
            EXPECT_NEAR(b.zu(i, k), oracle::normal_quantile(u(i, k)), 1e-9);
            EXPECT_NEAR(b.zv(i, k), oracle::normal_quantile(v(i, k)), 1e-9);
        }
    Eigen::MatrixXd bad = u;
    bad(0, 0) = 1.0;
    EXPECT_THROW(batch_at(inst, Formulation::Full, bad, v), DomainError);
    EXPECT_THROW(batch_at(inst, Formulation::Reduced, u, v), DomainError);
}

TEST(DualState, Shapes) {
    DualState full(Formulation::Full, 3, 1000.0);
    DualState red(Formulation::Reduced, 3, 1000.0);
    EXPECT_EQ(full.n_nets(), 9u);
    EXPECT_EQ(red.n_nets(), 7u);
    EXPECT_EQ(full.h_net(0).input_dim(), 3);
    EXPECT_EQ(red.h_net(0).input_dim(), 1);
    EXPECT_EQ(full.phi_net(2).input_dim(), 1);
    EXPECT_EQ(red.psi_net(2).input_dim(), 1);
    EXPECT_EQ(full.net_name(0), "phi_1");
    EXPECT_EQ(red.net_name(0), "phi");
    EXPECT_EQ(red.net_name(6), "h_3");
    EXPECT_EQ(full.params().size(), full.net_offset(8) + full.net(8).n_params());
    EXPECT_EQ(full.hidden(), (std::vector<int>{64, 64}));
    EXPECT_THROW(DualState(Formulation::Full, 2, 0.0), DomainError);
    EXPECT_THROW(DualState(Formulation::Full, 2, -1.0), DomainError);
    EXPECT_THROW(DualState(Formulation::ReducedAnti, 3, 1.0), DomainError);
}

TEST(DualPayoff, ZeroNetsGiveZero) {
    const VmotInstance inst = normal_instance(y_product());
    DualState s(Formulation::Full, 2, 1000.0);
    Rng rng(4);
    const Batch b = sample_batch(inst, Formulation::Full, 100, rng);
    EXPECT_EQ(dual_payoff(s, b).cwiseAbs().maxCoeff(), 0.0);
    const std::vector<double> u{0.3, 0.6}, v{0.2, 0.9};
    EXPECT_EQ(dual_payoff(s, inst, u, v), 0.0);
}

TEST(DualPayoff, FullWithoutHedgeIsSeparable) {
    const VmotInstance inst = normal_instance(y_product());
    DualState s = random_state(Formulation::Full, 2, 1000.0, 5);
    for (std::size_t i = 0; i < 2; ++i) s.params().segment(s.h_offset(i), s.h_net(i).n_params()).setZero();
    auto P = [&](double u1, double u2, double v1, double v2) {
        const std::vector<double> u{u1, u2}, v{v1, v2};
        return dual_payoff(s, inst, u, v);
    };
    const double d1 = P(0.2, 0.4, 0.3, 0.7) - P(0.8, 0.4, 0.3, 0.7);
    const double d2 = P(0.2, 0.9, 0.6, 0.1) - P(0.8, 0.9, 0.6, 0.1);
    EXPECT_NEAR(d1, d2, 1e-12);
    const double e1 = P(0.2, 0.4, 0.3, 0.7) - P(0.2, 0.4, 0.3, 0.2);
    const double e2 = P(0.5, 0.1, 0.9, 0.7) - P(0.5, 0.1, 0.9, 0.2);
    EXPECT_NEAR(e1, e2, 1e-12);
}

TEST(DualPayoff, ReducedIncrementVanishesOnMatchingQuantiles) {
    VmotInstance inst{{Marginal1D::normal(0, 1), Marginal1D::normal(0, 1)},
                      {Marginal1D::normal(0, 1), Marginal1D::normal(0, 1)},
                      y_product()};
    DualState s = random_state(Formulation::Reduced, 2, 1000.0, 6);
    s.params().segment(s.phi_offset(0), s.phi_net(0).n_params()).setZero();
    for (std::size_t i = 0; i < 2; ++i) s.params().segment(s.psi_offset(i), s.psi_net(i).n_params()).setZero();
    for (double u : {0.1, 0.37, 0.5, 0.93}) {
        const std::vector<double> uu{u}, vv{u, u};
        EXPECT_NEAR(dual_payoff(s, inst, uu, vv), 0.0, 1e-12);
    }
    const std::vector<double> uu{0.2}, vv{0.9, 0.9};
    EXPECT_GT(std::abs(dual_payoff(s, inst, uu, vv)), 1e-6);
}

TEST(DualPayoff, OutputScaleMultipliesPayoff) {
    const VmotInstance inst = normal_instance(y_product());
    DualState s = random_state(Formulation::Full, 2, 1000.0, 7);
    const std::vector<double> u{0.3, 0.6}, v{0.2, 0.9};
    const double p1 = dual_payoff(s, inst, u, v);
    s.set_output_scale(2.5);
    EXPECT_NEAR(dual_payoff(s, inst, u, v), 2.5 * p1, 1e-12);
    EXPECT_THROW(s.set_output_scale(0.0), DomainError);
}

TEST(DualPayoff, InputMismatchThrows) {
    const VmotInstance inst = normal_instance(y_product());
    DualState s(Formulation::Reduced, 2, 1000.0);
    const std::vector<double> u2{0.3, 0.6}, v{0.2, 0.9};
    EXPECT_THROW(dual_payoff(s, inst, u2, v), DomainError);
}

TEST(Penalty, Values) {
    EXPECT_EQ(penalty(1000.0, -1.0), 0.0);
    EXPECT_DOUBLE_EQ(penalty(1000.0, 1.0), 500.0);
    EXPECT_DOUBLE_EQ(penalty(10.0, 0.5), 1.25);
    EXPECT_EQ(penalty_derivative(10.0, -0.5), 0.0);
    EXPECT_DOUBLE_EQ(penalty_derivative(10.0, 0.5), 5.0);
}

TEST(Loss, ZeroNetsZeroCost) {
    const VmotInstance inst = normal_instance(constant_cost(0.0));
    DualState s(Formulation::Reduced, 2, 1000.0);
    Rng rng(8);
    const Batch b = sample_batch(inst, Formulation::Reduced, 64, rng);
    Eigen::VectorXd g;
    const LossParts lp = loss(s, b, &g);
    EXPECT_EQ(lp.total(), 0.0);
    // with zero weights every hidden activation vanishes, so only the output
    // bias of phi and psi sees the unit linear coefficient
    for (std::size_t k = 0; k < s.n_nets(); ++k) {
        const Eigen::Index off = s.net_offset(k), n = s.net(k).n_params();
        const bool linear = k < s.n_phi() + s.dim();
        EXPECT_NEAR(g[off + n - 1], linear ? 1.0 : 0.0, 1e-15) << s.net_name(k);
        EXPECT_EQ(g.segment(off, n - 1).cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Loss, ZeroNetsUnitCost) {
    const VmotInstance inst = normal_instance(constant_cost(1.0));
    for (auto f : {Formulation::Full, Formulation::Reduced}) {
        DualState s(f, 2, 1000.0);
        Rng rng(9);
        const Batch b = sample_batch(inst, f, 64, rng);
        EXPECT_DOUBLE_EQ(loss(s, b).total(), 500.0);
    }
}

TEST(Loss, LinearPartExcludesHedge) {
    const VmotInstance inst = normal_instance(constant_cost(-1e6));
    DualState s = random_state(Formulation::Full, 2, 1000.0, 10);
    Rng rng(11);
    const Batch b = sample_batch(inst, Formulation::Full, 200, rng);
    const LossParts lp = loss(s, b);
    EXPECT_EQ(lp.penalty, 0.0);
    double expect = 0.0;
    for (std::size_t k = 0; k < s.n_phi() + s.dim(); ++k) {
        Eigen::MatrixXd in = k < s.n_phi() ? Eigen::MatrixXd(b.zu.row(static_cast<Eigen::Index>(k)))
                                           : Eigen::MatrixXd(b.zv.row(static_cast<Eigen::Index>(k - s.n_phi())));
        expect += s.net(k).forward(s.params().data() + s.net_offset(k), in).mean();
    }
    EXPECT_NEAR(lp.linear, expect, 1e-12);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
    const VmotInstance inst = normal_instance(y_product());
    for (auto f : {Formulation::Full, Formulation::Reduced, Formulation::ReducedAnti}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            DualState s = random_state(f, 2, 50.0, 100 + seed);
            s.set_output_scale(1.7);
            Rng rng(200 + seed);
            const Batch b = sample_batch(inst, f, 40, rng);
            for (const auto& e : oracle::gradient_check(s, b)) EXPECT_LE(e.rel_error, 1e-5) << to_string(f) << ' ' << e.name;
        }
    }
}

TEST(Loss, GammaMustBePositive) {
    EXPECT_THROW(DualState(Formulation::Full, 2, 0.0), DomainError);
}

TEST(DualValue, ZeroNetsZeroCost) {
    const VmotInstance inst = normal_instance(constant_cost(0.0));
    DualState s(Formulation::Full, 2, 1000.0);
    const Estimate e = dual_value(s, inst, 1000, 1);
    EXPECT_EQ(e.mean, 0.0);
    EXPECT_EQ(e.std_err, 0.0);
}

TEST(DualValue, MatchesLossOnSameSample) {
    const VmotInstance inst = normal_instance(y_product());
    DualState s = random_state(Formulation::Reduced, 2, 1000.0, 12);
    const Estimate e = dual_value(s, inst, 500, 3);
    const Estimate again = dual_value(s, inst, 500, 3);
    EXPECT_EQ(e.mean, again.mean);
    EXPECT_GT(e.std_err, 0.0);
}

TEST(DualValue, SeedInvarianceWithinStdErr) {
    const VmotInstance inst = normal_instance(y_product());
    TrainResult r = train(inst, Formulation::Reduced, small_config(13));
    const Estimate a = dual_value(r.state, inst, 20000, 1);
    const Estimate b = dual_value(r.state, inst, 20000, 2);
    EXPECT_LE(std::abs(a.mean - b.mean), 3.0 * std::hypot(a.std_err, b.std_err));
}

TEST(Train, DeterministicGivenSeed) {
    const VmotInstance inst = normal_instance(y_product());
    const TrainResult a = train(inst, Formulation::Full, small_config(14));
    const TrainResult b = train(inst, Formulation::Full, small_config(14));
    ASSERT_EQ(a.report.epoch_values.size(), 4u);
    EXPECT_EQ(a.report.epoch_values, b.report.epoch_values);
    EXPECT_EQ(a.state.params(), b.state.params());
    const TrainResult c = train(inst, Formulation::Full, small_config(15));
    EXPECT_NE(a.report.epoch_values, c.report.epoch_values);
}

TEST(Train, ReportSummary) {
    const VmotInstance inst = normal_instance(y_product());
    TrainConfig cfg = small_config(16);
    cfg.epochs_per_batch = 6;
    const TrainResult r = train(inst, Formulation::Reduced, cfg);
    const auto& v = r.report.epoch_values;
    ASSERT_EQ(v.size(), 6u);
    EXPECT_EQ(r.report.epoch_std_err.size(), 6u);
    EXPECT_EQ(r.report.window, 2u);
    EXPECT_NEAR(r.report.mean, 0.5 * (v[4] + v[5]), 1e-12);
    EXPECT_NEAR(r.report.std, std::abs(v[4] - v[5]) / std::sqrt(2.0), 1e-12);
    EXPECT_GE(r.report.std, 0.0);
    TrainConfig big;
    big.n_batches = 30;
    EXPECT_EQ(big.summary_window(), 100u);
    big.n_batches = 3;
    EXPECT_EQ(big.summary_window(), 10u);
    big.window = 7;
    EXPECT_EQ(big.summary_window(), 7u);
}

TEST(Train, OutputScaleIsCostRms) {
    const VmotInstance inst = normal_instance(constant_cost(3.0));
    const TrainResult r = train(inst, Formulation::Reduced, small_config(17));
    EXPECT_NEAR(r.state.output_scale(), 3.0, 1e-12);
    const TrainResult z = train(normal_instance(constant_cost(0.0)), Formulation::Reduced, small_config(17));
    EXPECT_EQ(z.state.output_scale(), 1.0);
}

TEST(Train, DegenerateMarginalsGiveZero) {
    const Marginal1D delta = Marginal1D::discrete({0.0}, {1.0});
    VmotInstance inst{{delta, delta}, {delta, delta}, y_product()};
    TrainConfig cfg = small_config(18);
    cfg.epochs_per_batch = 10;
    const TrainResult r = train(inst, Formulation::Full, cfg);
    EXPECT_NEAR(r.report.epoch_values.back(), 0.0, 2e-2);
}

TEST(Train, DivergenceRaisesTrainingError) {
    const VmotInstance inst = normal_instance(constant_cost(std::nan("")));
    TrainConfig cfg = small_config(19);
    cfg.normalize_output = false;
    EXPECT_THROW(train(inst, Formulation::Reduced, cfg), TrainingError);
}

TEST(Train, ValidatesInputs) {
    VmotInstance inst = normal_instance(y_product());
    TrainConfig cfg = small_config(20);
    cfg.gamma = 0.0;
    EXPECT_THROW(train(inst, Formulation::Reduced, cfg), DomainError);
    cfg = small_config(20);
    cfg.minibatch = 0;
    EXPECT_THROW(train(inst, Formulation::Reduced, cfg), DomainError);
    inst.nu.pop_back();
    EXPECT_THROW(train(inst, Formulation::Reduced, small_config(20)), DomainError);
}

TEST(DualState, SaveLoadRoundTrip) {
    const VmotInstance inst = normal_instance(y_product());
    const TrainResult r = train(inst, Formulation::Full, small_config(21));
    const auto path = std::filesystem::temp_directory_path() / "vmot_state_test.txt";
    r.state.save(path.string());
    const DualState s = DualState::load(path.string());
    EXPECT_EQ(s.formulation(), Formulation::Full);
    EXPECT_EQ(s.dim(), 2u);
    EXPECT_EQ(s.gamma(), r.state.gamma());
    EXPECT_EQ(s.output_scale(), r.state.output_scale());
    EXPECT_EQ(s.hidden(), r.state.hidden());
    EXPECT_EQ(s.params(), r.state.params());
    EXPECT_EQ(s.optimizer().steps(), r.state.optimizer().steps());
    EXPECT_EQ(s.optimizer().first_moment(), r.state.optimizer().first_moment());
    EXPECT_EQ(s.optimizer().second_moment(), r.state.optimizer().second_moment());
    EXPECT_EQ(dual_value(s, inst, 1000, 5).mean, dual_value(r.state, inst, 1000, 5).mean);
    std::filesystem::remove(path);
}

TEST(DualState, LoadRejectsMalformed) {
    const auto path = std::filesystem::temp_directory_path() / "vmot_state_bad.txt";
    {
        std::ofstream out(path);
        out << "vmot-dual-state 1\nformulation full\ndim 2\ngamma 10\noutput_scale 1\nhidden 4 4\n"
               "adam 0.001 0.9 0.999 1e-08 0\nparams 3\n1\n2\n3\nmoments 0\n";
    }
    EXPECT_THROW(DualState::load(path.string()), ParseError);
    std::filesystem::remove(path);
}

TEST(PrimalDensity, UntrainedIsUniform) {
    const VmotInstance inst = normal_instance(constant_cost(0.0));
    DualState s(Formulation::Full, 2, 1000.0);
    const DensityResult d = primal_density(s, inst, 8, 10, 1);
    EXPECT_TRUE(d.uniform_fallback);
    for (double v : d.density.values()) EXPECT_EQ(v, 1.0);
}

TEST(PrimalDensity, ReducedLivesOnDiagonal) {
    const VmotInstance inst = normal_instance(y_product());
    DualState s(Formulation::Reduced, 2, 1000.0);
    const DensityResult d = primal_density(s, inst, 10, 50, 2);
    ASSERT_FALSE(d.uniform_fallback);
    double mass = 0.0;
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j) {
            const double v = d.density.values()[i * 10 + j];
            if (i != j) {
                EXPECT_EQ(v, 0.0);
            }
            mass += v / 100.0;
        }
    EXPECT_NEAR(mass, 1.0, 1e-12);
}

TEST(PrimalDensity, ReducedAntiLivesOnAntiDiagonal) {
    const VmotInstance inst = normal_instance(y_product());
    DualState s(Formulation::ReducedAnti, 2, 1000.0);
    const DensityResult d = primal_density(s, inst, 6, 20, 3);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j)
            if (i + j != 5) {
                EXPECT_EQ(d.density.values()[i * 6 + j], 0.0);
            }
}

TEST(PrimalDensity, FullTrainedConcentratesNearDiagonal) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2), b = Eigen::MatrixXd::Zero(2, 2);
    a(0, 1) = 1.0;
    b(0, 1) = 1.0;
    const VmotInstance inst = normal_instance(CostSpec::covariance(a, b));
    TrainConfig cfg;
    cfg.n_batches = 1;
    cfg.points_per_batch = 30000;
    cfg.epochs_per_batch = 8;
    cfg.n_eval = 2000;
    cfg.seed = 22;
    const TrainResult r = train(inst, Formulation::Full, cfg);
    const std::size_t n = 10;
    const DensityResult d = primal_density(r.state, inst, n, 200, 4);
    ASSERT_FALSE(d.uniform_fallback);
    double band = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if ((i > j ? i - j : j - i) <= 1) band += d.density.values()[i * n + j] / double(n * n);
    // the band |i - j| <= 1 holds 28% of the cells
    EXPECT_GT(band, 0.5);
}
