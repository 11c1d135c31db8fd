// One PASS/FAIL line per acceptance criterion. Optional arguments select
// criteria by number, e.g. `vmot_acceptance 3 4 5`.

#include "fixtures.hpp"
#include "grad_check.hpp"
#include "oracles.hpp"
#include "vmot/closed_form.hpp"
#include "vmot/errors.hpp"
#include "vmot/experiments.hpp"
#include "vmot/lp_oracle.hpp"
#include "vmot/market_data.hpp"
#include "vmot/modularity.hpp"
#include "vmot/neural_dual.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace vmot;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

Outcome gaussian_oracle_match() {
    std::ostringstream det;
    bool pass = true;
    for (std::uint64_t k = 1; k <= 5; ++k) {
        Rng rng(1000 + k);
        const GaussianInstance g = GaussianInstance::random(2, rng);
        const double exact = exact_value(g);
        TrainConfig cfg;
        cfg.seed = k;
        const TrainResult r = train(g.instance(), Formulation::Reduced, cfg);
        const double rel = std::abs(r.report.mean - exact) / exact;
        const bool ok = rel <= 0.05 && r.report.seconds <= 600.0;
        pass = pass && ok;
        det << " [" << k << ": exact " << exact << " mean " << r.report.mean << " rel " << rel << " "
            << static_cast<int>(r.report.seconds) << "s]";
        std::clog << "  c1 instance " << k << ": exact " << exact << " mean " << r.report.mean << " rel " << rel
                  << "\n";
    }
    return {pass, det.str()};
}

Outcome reduction_advantage() {
    std::ostringstream det;
    int wins = 0;
    for (std::uint64_t k = 1; k <= 5; ++k) {
        Rng rng(2000 + k);
        const GaussianInstance g = GaussianInstance::random(3, rng);
        const double exact = exact_value(g);
        TrainConfig cfg;
        cfg.seed = k;
        const TrainResult red = train(g.instance(), Formulation::Reduced, cfg);
        const TrainResult full = train(g.instance(), Formulation::Full, cfg);
        const double er = std::abs(red.report.mean - exact), ef = std::abs(full.report.mean - exact);
        wins += er <= ef;
        det << " [" << k << ": exact " << exact << " reduced " << red.report.mean << " full " << full.report.mean << "]";
        std::clog << "  c2 instance " << k << ": exact " << exact << " reduced " << red.report.mean << " full "
                  << full.report.mean << "\n";
    }
    det << " reduced closer on " << wins << "/5";
    return {wins >= 4, det.str()};
}

Outcome lp_monotonicity() {
    const auto t0 = Clock::now();
    Rng rng(3000);
    int ok = 0;
    double worst = 0.0;
    bool shapes = true;
    for (int k = 0; k < 20; ++k) {
        const DiscreteVmot inst = random_monotone_instance(rng);
        for (const auto& m : inst.mu) shapes = shapes && std::get<Marginal1D::Discrete>(m.kind()).atoms.size() <= 8;
        for (const auto& m : inst.nu) shapes = shapes && std::get<Marginal1D::Discrete>(m.kind()).atoms.size() <= 8;
        const MonotoneReport r = verify_monotone_d2(inst);
        worst = std::max(worst, r.tv_distance);
        ok += r.passed && r.irreducible;
    }
    const double secs = seconds_since(t0);
    std::ostringstream det;
    det << ok << "/20 monotone, max tv " << worst << ", " << secs << " s";
    return {ok == 20 && shapes && secs <= 30.0, det.str()};
}

Outcome counterexample() {
    try {
        const CounterexampleReport r = counterexample_d3();
        std::ostringstream det;
        det << "free " << r.free_value << " fixed " << r.fixed_value << " gap " << r.gap << " dual " << r.dual_value
            << " min slack " << r.dual_min_slack << " support slack " << r.dual_max_support_slack;
        const bool pass = std::abs(r.free_value - 1.35) <= 1e-8 && r.gap > 1e-6 && r.dual_min_slack >= -1e-12 &&
                          r.dual_max_support_slack <= 1e-12 && std::abs(r.dual_value - 1.35) <= 1e-8;
        return {pass, det.str()};
    } catch (const FixtureError& e) {
        return {false, e.what()};
    }
}

Outcome conjugacy() {
    const ConjugateSuiteReport s = conjugate_modularity_suite(5000, 100);
    std::ostringstream det;
    det << "sub->super " << s.sub_to_super << "/" << s.trials << ", super->sub " << s.super_to_sub << "/" << s.trials
        << ", envelope " << s.envelope_preserved << "/" << s.trials;
    bool cube = false;
    try {
        const CubeReport c = verify_cube_counterexample();
        cube = c.beta0_submodular && c.envelope_matches && c.strict_gap;
        det << ", cube lhs " << c.lhs << " rhs " << c.rhs;
    } catch (const FixtureError& e) {
        det << ", cube: " << e.what();
    }
    const bool pass = s.ok() && s.trials == 100 && s.sub_to_super == 100 && s.super_to_sub == 100 &&
                      s.envelope_preserved == 100 && cube;
    return {pass, det.str()};
}

Outcome gradient_checks() {
    double worst = 0.0;
    std::size_t groups = 0;
    for (int k = 0; k < 10; ++k) {
        const Formulation f = k % 3 == 0 ? Formulation::Full : (k % 3 == 1 ? Formulation::Reduced : Formulation::ReducedAnti);
        const std::size_t d = f == Formulation::ReducedAnti ? 2 : 2 + static_cast<std::size_t>(k % 2);
        Rng rng(6000 + static_cast<std::uint64_t>(k));
        DualState s(f, d, 100.0, {16, 16});
        s.init(rng);
        s.set_output_scale(0.5 + k * 0.3);
        VmotInstance inst{{}, {}, CostSpec::portfolio_variance(std::vector<double>(d, 1.0))};
        for (std::size_t i = 0; i < d; ++i) {
            inst.mu.push_back(Marginal1D::normal(0.0, 1.0 + 0.1 * i));
            inst.nu.push_back(Marginal1D::normal(0.0, 2.0));
        }
        const Batch b = sample_batch(inst, f, 64, rng);
        for (const auto& e : oracle::gradient_check(s, b)) {
            worst = std::max(worst, e.rel_error);
            ++groups;
        }
    }
    std::ostringstream det;
    det << groups << " parameter groups, max relative error " << worst;
    return {worst <= 1e-5, det.str()};
}

Outcome breeden_litzenberger() {
    const double s = 100.0, vol = 0.3, t = 0.5;
    const OptionChain ch = fixture::bs_chain(s, vol, t, fixture::linspace(30, 250, 100));
    const ImpliedDensity d = implied_density(ch);
    const double v = vol * std::sqrt(t);
    const double lo = s * std::exp(-0.5 * v * v + v * oracle::normal_quantile(0.05));
    const double hi = s * std::exp(-0.5 * v * v + v * oracle::normal_quantile(0.95));
    double dens_err = 0.0;
    for (std::size_t j = 0; j < d.strikes.size(); ++j) {
        if (d.strikes[j] < lo || d.strikes[j] > hi) continue;
        const double f = oracle::lognormal_pdf(d.strikes[j], s, vol, t);
        dens_err = std::max(dens_err, std::abs(d.density[j] - f) / f);
    }
    double price_err = 0.0, tail_err = 0.0;
    for (std::size_t j = 1; j + 1 < ch.rows.size(); ++j) {
        const double k = ch.rows[j].strike;
        const double e = std::abs(d.call_price(k) - *ch.rows[j].call) / *ch.rows[j].call;
        if (k < lo || k > hi) {
            tail_err = std::max(tail_err, e);
        } else {
            price_err = std::max(price_err, e);
        }
    }
    std::ostringstream det;
    det << "density sup rel error " << dens_err << " on [" << lo << ", " << hi << "], call round trip " << price_err
        << " (outside that range, where the truncated tail dominates: " << tail_err << ")";
    return {dens_err <= 0.02 && price_err <= 0.01 && std::abs(d.mass() - 1.0) <= 1e-6, det.str()};
}

Outcome empirical_ordering() {
    const auto dir = std::filesystem::temp_directory_path() / "vmot_acceptance_empirical";
    std::filesystem::create_directories(dir);
    const double spot1 = 100.0, spot2 = 50.0;
    // total return volatility vol * sqrt(t): asset 1 0.05 -> 0.15, asset 2 0.10 -> 0.12
    struct Leg {
        double spot, vol, t;
    };
    const std::vector<Leg> legs{{spot1, 0.10, 0.25}, {spot1, 0.15, 1.0}, {spot2, 0.20, 0.25}, {spot2, 0.12, 1.0}};
    ExperimentConfig cfg;
    cfg.name = "synthetic";
    cfg.out_dir = (dir / "out").string();
    cfg.spots = {spot1, spot2};
    cfg.formulations = {Formulation::Reduced, Formulation::Full};
    cfg.seed = 8;
    for (std::size_t k = 0; k < legs.size(); ++k) {
        const Leg& l = legs[k];
        const double sd = l.vol * std::sqrt(l.t);
        const auto strikes = fixture::linspace(l.spot * std::exp(-6 * sd), l.spot * std::exp(6 * sd), 100);
        const std::string p = (dir / ("chain" + std::to_string(k) + ".csv")).string();
        save_chain(fixture::bs_chain(l.spot, l.vol, l.t, strikes), p);
        cfg.chains.push_back(p);
    }
    std::ostringstream log;
    try {
        const RunResult r = run_empirical_bounds(cfg, log);
        write_summary(cfg, r);
        std::ostringstream det;
        det << "OT [" << r.summary["ot_lower"].get<double>() << ", " << r.summary["ot_upper"].get<double>()
            << "] mean " << r.summary["sample_mean"].get<double>();
        for (const auto& run : r.summary["runs"])
            det << " " << run["formulation"].get<std::string>() << " [" << run["vmot_lower"].get<double>() << ", "
                << run["vmot_upper"].get<double>() << "]";
        for (const auto& c : r.checks)
            if (!c.passed) det << " FAILED " << c.detail;
        std::clog << log.str();
        return {r.passed(), det.str()};
    } catch (const std::exception& e) {
        std::clog << log.str();
        return {false, e.what()};
    }
}

Outcome weak_duality() {
    Rng rng(9000);
    std::ostringstream det;
    bool pass = true;
    double worst = 1e300;
    for (int k = 0; k < 10; ++k) {
        const DiscreteVmot shape = random_monotone_instance(rng);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2), b = Eigen::MatrixXd::Zero(2, 2);
        a(0, 1) = unit(rng);
        b(0, 1) = 0.2 + unit(rng);
        const CostSpec c = CostSpec::covariance(a, b);
        const DiscreteVmot inst = DiscreteVmot::from_marginals(shape.mu, shape.nu, c);
        const LpSolution lp = solve(inst);
        TrainConfig cfg;
        cfg.gamma = 1e5;
        cfg.n_batches = 1;
        cfg.points_per_batch = 50000;
        cfg.epochs_per_batch = 10;
        cfg.seed = 9000 + static_cast<std::uint64_t>(k);
        const TrainResult tr = train(VmotInstance{inst.mu, inst.nu, c}, Formulation::Full, cfg);
        const Estimate dv = dual_value(tr.state, VmotInstance{inst.mu, inst.nu, c}, 200000, 100 + k);
        const double margin = dv.mean + 1e-2 - lp.value;
        worst = std::min(worst, margin);
        pass = pass && lp.status == LpStatus::Optimal && margin >= 0.0;
        std::clog << "  c9 instance " << k << ": LP " << lp.value << " neural " << dv.mean << " +- " << dv.std_err
                  << "\n";
    }
    det << "10 instances, smallest margin (dual + 0.01 - LP) " << worst;
    return {pass, det.str()};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"Gaussian oracle match (d=2 reduced, 5 instances, 5%)", gaussian_oracle_match},
        {"Dimensional reduction advantage (d=3, >= 4 of 5)", reduction_advantage},
        {"LP monotonicity suite (20 instances, tv <= 1e-7, <= 30 s)", lp_monotonicity},
        {"Counterexample replication (27/20, strict gap, explicit dual)", counterexample},
        {"Conjugacy property suite and cube example", conjugacy},
        {"Gradient checks (10 random states, rel error <= 1e-5)", gradient_checks},
        {"Breeden-Litzenberger recovery (2% density, 1% prices)", breeden_litzenberger},
        {"Empirical ordering on synthetic chains", empirical_ordering},
        {"Weak duality against the LP maximum (10 instances)", weak_duality},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << criteria[i].first << " | "
                  << o.detail << " (" << static_cast<int>(seconds_since(t0)) << " s)" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
