#include "vmot/errors.hpp"
#include "vmot/experiments.hpp"
#include "vmot/market_data.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string budget;
    std::string formulation;
    std::string out;
    std::vector<std::string> sets;
};

void add_common(CLI::App* sub, Common& c, bool neural) {
    sub->add_option("--config", c.config, "Experiment config file (key = value lines)")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "Base seed");
    sub->add_option("--out", c.out, "Output directory");
    sub->add_option("--set", c.sets, "Extra key=value override, repeatable");
    if (neural) {
        sub->add_option("--budget", c.budget, "Training budget")->check(CLI::IsMember({"desk", "large"}));
        sub->add_option("--formulation", c.formulation, "Dual formulation")
            ->check(CLI::IsMember({"full", "reduced", "both"}));
    }
}

vmot::ExperimentConfig resolve(const Common& c) {
    vmot::ExperimentConfig cfg = c.config.empty() ? vmot::ExperimentConfig{} : vmot::load_config(c.config);
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw vmot::ParseError("--set expects key=value, got '" + s + "'");
        vmot::set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (c.seed) cfg.seed = *c.seed;
    if (!c.budget.empty()) cfg.budget = vmot::Budget::parse(c.budget);
    if (!c.formulation.empty()) vmot::set_config_value(cfg, "formulation", c.formulation);
    if (!c.out.empty()) cfg.out_dir = c.out;
    return cfg;
}

int finish(const vmot::ExperimentConfig& cfg, const vmot::RunResult& r) {
    vmot::write_summary(cfg, r);
    for (const auto& ch : r.checks) {
        if (!ch.passed) std::cerr << "check failed: " << ch.name << ": " << ch.detail << "\n";
    }
    std::cout << "summary written to " << (std::filesystem::path(cfg.out_dir) / "summary.json").string() << "\n";
    return r.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Model-free bounds by vectorial martingale optimal transport"};
    app.require_subcommand(1);
    app.set_version_flag("--version", vmot::kVersion);

    Common gc, ec, lc;
    auto* gaussian = app.add_subcommand("gaussian", "Neural dual against the closed-form Gaussian value");
    add_common(gaussian, gc, true);
    auto* empirical = app.add_subcommand("empirical", "Two-asset bounds from option chains");
    add_common(empirical, ec, true);
    auto* lp = app.add_subcommand("lp", "LP monotonicity checks and the three-asset counterexample");
    add_common(lp, lc, false);

    std::string chain_path, density_out, returns_out;
    double spot = 0.0;
    std::optional<double> ref;
    auto* extract = app.add_subcommand("extract-density", "Risk-neutral density from an option chain");
    extract->add_option("chain", chain_path, "CSV with header strike,call,put")->required()->check(CLI::ExistingFile);
    extract->add_option("--spot", spot, "Spot price")->required();
    extract->add_option("--ref", ref, "Reference price for returns (default: spot)");
    extract->add_option("--out", density_out, "Density CSV (strike,density)")->required();
    extract->add_option("--returns", returns_out, "Return marginal CSV (x,cdf)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gaussian) {
            const auto cfg = resolve(gc);
            vmot::write_manifest(cfg, "gaussian");
            return finish(cfg, vmot::run_gaussian_benchmark(cfg, std::cerr));
        }
        if (*empirical) {
            const auto cfg = resolve(ec);
            vmot::write_manifest(cfg, "empirical");
            return finish(cfg, vmot::run_empirical_bounds(cfg, std::cerr));
        }
        if (*lp) {
            const auto cfg = resolve(lc);
            vmot::write_manifest(cfg, "lp");
            return finish(cfg, vmot::run_lp_checks(cfg, std::cerr));
        }
        if (*extract) {
            const vmot::OptionChain ch = vmot::load_chain(chain_path, spot);
            for (const auto& w : ch.warnings) std::cerr << "warning: " << w << "\n";
            const vmot::ImpliedDensity d = vmot::implied_density(ch);
            for (const auto& dg : d.diagnostics) std::cerr << dg << "\n";
            d.save_csv(density_out);
            std::cerr << "raw mass " << d.raw_mass << ", " << d.strikes.size() << " strikes\n";
            if (!returns_out.empty()) vmot::save_tabulated_csv(vmot::to_return_marginal(d, ref.value_or(spot)), returns_out);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
