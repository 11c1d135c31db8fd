#include "vmot/modularity.hpp"

#include "vmot/errors.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace vmot;

namespace {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    return v;
}

GridFn quadratic(const Eigen::MatrixXd& a, std::vector<std::vector<double>> axes) {
    return GridFn::tabulate(std::move(axes), [&](std::span<const double> x) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
        for (std::size_t i = 0; i < x.size(); ++i) v(static_cast<Eigen::Index>(i)) = x[i];
        return 0.5 * v.dot(a * v);
    });
}

}  // namespace

TEST(GridFn, RejectsBadInput) {
    EXPECT_THROW(GridFn({{0.0, 0.0}}, {1.0, 2.0}), DomainError);
    EXPECT_THROW(GridFn({{0.0, 1.0}}, {1.0}), DomainError);
    EXPECT_THROW(GridFn({{0.0, 1.0}}, {kInf, kInf}), DomainError);
}

TEST(GridFn, CsvRoundTripWithInfinity) {
    auto f = GridFn({{0.0, 1.0}, {-1.0, 0.5, 2.0}}, {0, 1, kInf, 3, 4.25, -5});
    const auto path = (std::filesystem::temp_directory_path() / "vmot_gridfn.csv").string();
    f.save_csv(path);
    const auto g = GridFn::load_csv(path);
    EXPECT_EQ(g.axes(), f.axes());
    EXPECT_EQ(g.values(), f.values());
}

TEST(Modularity, SumOfProductsIsStrictlySuper) {
    const auto ax = linspace(-1, 1, 5);
    const auto f = GridFn::tabulate({ax, ax, ax}, [](std::span<const double> x) {
        return x[0] * x[1] + x[1] * x[2] + x[0] * x[2];
    });
    EXPECT_EQ(check_modularity(f).classification(), Modularity::StrictlySuper);
}

TEST(Modularity, NegativeProductIsStrictlySub) {
    const auto ax = linspace(-1, 2, 4);
    const auto f = GridFn::tabulate({ax, ax}, [](std::span<const double> x) { return -x[0] * x[1]; });
    EXPECT_EQ(check_modularity(f).classification(), Modularity::StrictlySub);
}

TEST(Modularity, SeparableIsBoth) {
    const auto ax = linspace(0, 1, 4);
    const auto r = check_modularity(GridFn::tabulate({ax, ax}, [](std::span<const double> x) { return x[0] + x[1]; }));
    EXPECT_TRUE(r.submodular);
    EXPECT_TRUE(r.supermodular);
    EXPECT_FALSE(r.strictly_sub);
    EXPECT_FALSE(r.strictly_super);
}

TEST(Modularity, OneDimensionIsRejected) {
    EXPECT_THROW(check_modularity(GridFn({{0.0, 1.0}}, {0, 1})), DomainError);
}

TEST(Modularity, InfinityConventions) {
    // +inf on the off-diagonal corner: the submodular inequality holds, supermodular fails
    const auto f = GridFn({{0.0, 1.0}, {0.0, 1.0}}, {0, kInf, 0, 0});
    const auto r = check_modularity(f);
    EXPECT_TRUE(r.submodular);
    EXPECT_FALSE(r.supermodular);
    // +inf on both sides is never strict
    const auto g = GridFn({{0.0, 1.0}, {0.0, 1.0}}, {kInf, kInf, 0, 0});
    EXPECT_FALSE(check_modularity(g).strictly_sub);
    EXPECT_FALSE(check_modularity(g).strictly_super);
}

TEST(Modularity, NegationSwapsClassesExactly) {
    Rng rng(3);
    for (int t = 0; t < 30; ++t) {
        const auto f = random_submodular(2 + t % 2, rng);
        const auto a = check_modularity(f), b = check_modularity(f.negated());
        EXPECT_EQ(a.submodular, b.supermodular);
        EXPECT_EQ(a.supermodular, b.submodular);
        EXPECT_TRUE(a.submodular);
    }
}

// Mixed second differences of smooth functions computed independently.
TEST(Modularity, AgreesWithMixedDifferenceSign) {
    Rng rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        const double a = u(rng), b = u(rng), s = u(rng);
        auto fn = [=](double x, double y) { return a * x * x + b * std::sin(y) + s * std::exp(0.3 * x) * y; };
        const auto ax = linspace(-1, 1, 6);
        const auto f = GridFn::tabulate({ax, ax}, [&](std::span<const double> x) { return fn(x[0], x[1]); });
        bool all_pos = true, all_neg = true;
        for (std::size_t i = 0; i + 1 < ax.size(); ++i) {
            for (std::size_t j = 0; j + 1 < ax.size(); ++j) {
                const double mixed = fn(ax[i + 1], ax[j + 1]) - fn(ax[i + 1], ax[j]) - fn(ax[i], ax[j + 1]) + fn(ax[i], ax[j]);
                all_pos = all_pos && mixed > 1e-12;
                all_neg = all_neg && mixed < -1e-12;
            }
        }
        const auto r = check_modularity(f);
        EXPECT_EQ(r.strictly_super, all_pos);
        EXPECT_EQ(r.strictly_sub, all_neg);
    }
}

TEST(Legendre, QuadraticIsSelfConjugate) {
    const auto f = GridFn::tabulate({linspace(-5, 5, 10001)}, [](std::span<const double> x) { return 0.5 * x[0] * x[0]; });
    const auto g = legendre(f, {{1.0}});
    EXPECT_NEAR(g[0], 0.5, 1e-6);
}

TEST(Legendre, CubicPower) {
    const auto f = GridFn::tabulate({linspace(-2, 2, 4001)}, [](std::span<const double> x) {
        return std::pow(std::abs(x[0]), 3) / 3.0;
    });
    const auto ys = linspace(-2, 2, 81);
    const auto g = legendre(f, {ys});
    for (std::size_t k = 0; k < ys.size(); ++k) {
        EXPECT_NEAR(g[k], 2.0 / 3.0 * std::pow(std::abs(ys[k]), 1.5), 1e-3);
    }
    EXPECT_LE(axis_convexity_violation(g), 1e-9);
}

TEST(Legendre, PositiveDefiniteQuadratic) {
    Eigen::Matrix2d a;
    a << 2, 1,
         1, 2;
    const Eigen::Matrix2d inv = a.inverse();
    const auto ax = linspace(-3, 3, 241);
    const auto f = quadratic(a, {ax, ax});
    const auto ys = linspace(-1, 1, 5);
    const auto g = legendre(f, {ys, ys});
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto y = g.point(k);
        const Eigen::Vector2d z(y[0], y[1]);
        EXPECT_NEAR(g[k], 0.5 * z.dot(inv * z), 2e-3);
    }
}

TEST(Legendre, OrderReversing) {
    Rng rng(5);
    for (int t = 0; t < 10; ++t) {
        const auto f = random_submodular(2, rng);
        auto bumped = f.values();
        for (auto& v : bumped) v += std::uniform_real_distribution<double>(0.0, 0.5)(rng);
        const GridFn g(f.axes(), bumped);
        const auto fs = legendre(f), gs = legendre(g);
        for (std::size_t k = 0; k < fs.size(); ++k) EXPECT_GE(fs[k], gs[k]);
    }
}

TEST(Legendre, AllInfiniteIsRejected) {
    EXPECT_THROW(legendre(GridFn({{0.0}}, {kInf})), DomainError);
}

TEST(Envelope, ConvexFunctionIsFixed) {
    const auto ax = linspace(-1, 2, 7);
    const auto f = GridFn::tabulate({ax, ax}, [](std::span<const double> x) {
        return x[0] * x[0] + 0.5 * x[0] * x[1] + x[1] * x[1] + std::abs(x[0] - 0.5);
    });
    const auto g = convex_envelope(f);
    for (std::size_t k = 0; k < f.size(); ++k) EXPECT_NEAR(g[k], f[k], 1e-9);
}

TEST(Envelope, ChordInOneDimension) {
    const GridFn f({{0.0, 0.5, 1.0}}, {0.0, 1.0, 0.0});
    EXPECT_NEAR(convex_envelope(f)[1], 0.0, 1e-15);
}

TEST(Envelope, IdempotentAndBelow) {
    Rng rng(9);
    for (int t = 0; t < 10; ++t) {
        const auto f = random_submodular(2, rng);
        const auto g = convex_envelope(f);
        const auto gg = convex_envelope(g);
        for (std::size_t k = 0; k < f.size(); ++k) {
            EXPECT_LE(g[k], f[k] + 1e-12);
            EXPECT_NEAR(gg[k], g[k], 1e-9);
        }
        EXPECT_LE(axis_convexity_violation(g), 1e-9);
    }
}

TEST(Envelope, DualGridVersionBoundsExact) {
    const auto ax = linspace(-1, 1, 9);
    const auto f = GridFn::tabulate({ax, ax}, [](std::span<const double> x) { return std::cos(3 * x[0]) + x[1] * x[1]; });
    const auto exact = convex_envelope(f);
    const auto approx = convex_envelope(f, {linspace(-20, 20, 161), linspace(-20, 20, 161)});
    for (std::size_t k = 0; k < f.size(); ++k) {
        EXPECT_LE(approx[k], f[k] + 1e-12);
        EXPECT_LE(approx[k], exact[k] + 1e-9);
        EXPECT_NEAR(approx[k], exact[k], 0.05);
    }
}

TEST(Conjugacy, SupermodularQuadraticHasSubmodularConjugate) {
    Eigen::Matrix2d a;
    a << 2, 1,
         1, 2;
    const auto ax = linspace(-2, 2, 17);
    const auto f = quadratic(a, {ax, ax});
    EXPECT_TRUE(check_modularity(f).supermodular);
    EXPECT_TRUE(check_modularity(legendre(f)).submodular);
}

TEST(Conjugacy, SeparableStaysSeparable) {
    const auto ax = linspace(-2, 2, 9);
    const auto f = GridFn::tabulate({ax, ax}, [](std::span<const double> x) { return x[0] * x[0] + std::abs(x[1]); });
    const auto r = check_modularity(legendre(f));
    EXPECT_TRUE(r.submodular);
    EXPECT_TRUE(r.supermodular);
}

TEST(Conjugacy, ThreeDimensionalSupermodularQuadraticLosesClass) {
    Eigen::Matrix3d a;
    a << 10, 1, 7,
         1, 10, 7,
         7, 7, 10;
    const Eigen::Matrix3d inv = a.inverse();
    // positive off-diagonal entry of the inverse
    EXPECT_GT(inv(0, 1), 0.0);
    const auto ax = linspace(-3, 3, 25);
    const auto f = quadratic(a, {ax, ax, ax});
    EXPECT_TRUE(check_modularity(f).supermodular);
    const auto ys = linspace(-1, 1, 9);
    EXPECT_FALSE(check_modularity(legendre(f, {ys, ys, ys})).submodular);
}

TEST(Conjugacy, SuiteHasNoCounterexamples) {
    const auto rep = conjugate_modularity_suite(1, 20);
    EXPECT_TRUE(rep.ok()) << (rep.counterexamples.empty() ? "" : rep.counterexamples.front());
    EXPECT_EQ(rep.sub_to_super, 20);
    EXPECT_EQ(rep.super_to_sub, 20);
    EXPECT_EQ(rep.envelope_preserved, 20);
}

TEST(Cube, FixtureValues) {
    const auto b = cube_beta0();
    const std::vector<std::size_t> n1m{1, 0, 0}, n2m{0, 1, 0}, n0{0, 0, 1};
    EXPECT_EQ(b.at(n1m), 2.0);
    EXPECT_EQ(b.at(n2m), 1.0);
    const auto l = cube_pieces();
    const std::vector<double> u{0.5, 0.75, 0.25};
    EXPECT_EQ(l[0](u), 0.0);
    EXPECT_EQ(l[1](u), 0.0);
    EXPECT_NEAR(convex_envelope(b).at(n0), 0.0, 1e-12);
    EXPECT_NEAR(convex_envelope(b).at(n1m), 2.0, 1e-12);
}

TEST(Cube, EnvelopeIsNotSubmodular) {
    const auto r = verify_cube_counterexample();
    EXPECT_TRUE(r.beta0_submodular);
    EXPECT_TRUE(r.envelope_matches);
    EXPECT_NEAR(r.lhs, 0.0, 1e-12);
    // by hand: max(L) is 0 at ubar (L1) and 0.05 at ubar' (L2)
    EXPECT_NEAR(r.rhs, 0.05, 1e-12);
}
