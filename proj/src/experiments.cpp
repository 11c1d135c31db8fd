#include "vmot/experiments.hpp"

#include "vmot/closed_form.hpp"
#include "vmot/csv.hpp"
#include "vmot/errors.hpp"
#include "vmot/lp_oracle.hpp"
#include "vmot/market_data.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace vmot {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double num(const std::string& v, std::size_t line) { return csv::to_double(trim(v), line); }

std::size_t count(const std::string& v, std::size_t line) {
    const double x = num(v, line);
    if (!(x >= 0.0) || x != std::floor(x) || x > 1e15) throw ParseError("expected a nonnegative integer: " + v, line);
    return static_cast<std::size_t>(x);
}

std::vector<double> nums(const std::string& v, std::size_t line) {
    std::vector<double> out;
    for (const auto& s : split_list(v)) out.push_back(num(s, line));
    return out;
}

bool flag(const std::string& v, std::size_t line) {
    const std::string t = trim(v);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ParseError("expected true or false: " + v, line);
}

std::vector<Formulation> formulations(const std::string& v, std::size_t line) {
    const std::string t = trim(v);
    if (t == "both") return {Formulation::Full, Formulation::Reduced};
    try {
        return {parse_formulation(t)};
    } catch (const DomainError& e) {
        throw ParseError(e.what(), line);
    }
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

std::string path_in(const ExperimentConfig& cfg, const std::string& file) { return (fs::path(cfg.out_dir) / file).string(); }

json report_json(const TrainReport& r) {
    return {{"formulation", to_string(r.formulation)},
            {"mean", r.mean},
            {"std", r.std},
            {"window", r.window},
            {"epochs", r.epoch_values.size()},
            {"final", r.epoch_values.empty() ? 0.0 : r.epoch_values.back()},
            {"seconds", r.seconds},
            {"seed", r.config.seed},
            {"n_batches", r.config.n_batches},
            {"points_per_batch", r.config.points_per_batch},
            {"epochs_per_batch", r.config.epochs_per_batch},
            {"gamma", r.config.gamma}};
}

std::size_t sample_dim(Formulation f, std::size_t d) { return f == Formulation::Full ? 2 * d : d + 1; }

}  // namespace

Budget Budget::parse(const std::string& name) {
    if (name == "desk") return desk();
    if (name == "large") return large();
    throw DomainError("unknown budget '" + name + "' (desk or large)");
}

TrainConfig ExperimentConfig::train_config(double default_gamma, std::uint64_t seed_offset) const {
    TrainConfig t;
    t.gamma = gamma > 0.0 ? gamma : default_gamma;
    t.n_batches = budget.n_batches;
    t.points_per_batch = budget.points_per_batch;
    t.epochs_per_batch = budget.epochs_per_batch;
    t.learning_rate = learning_rate;
    t.lr_decay = lr_decay;
    t.minibatch = minibatch;
    t.n_eval = n_eval;
    t.window = window;
    t.hidden = hidden;
    t.seed = seed + seed_offset;
    return t;
}

json ExperimentConfig::to_json() const {
    std::vector<std::string> forms;
    for (auto f : formulations) forms.push_back(to_string(f));
    return {{"name", name},
            {"d", d},
            {"sigma", sigma},
            {"rho", rho},
            {"weights", weights},
            {"instances", instances},
            {"formulation", forms},
            {"gamma", gamma},
            {"batches", budget.n_batches},
            {"points", budget.points_per_batch},
            {"epochs", budget.epochs_per_batch},
            {"learning_rate", learning_rate},
            {"lr_decay", lr_decay},
            {"minibatch", minibatch},
            {"n_eval", n_eval},
            {"window", window},
            {"hidden", hidden},
            {"seed", seed},
            {"out", out_dir},
            {"acknowledge_reduced", acknowledge_reduced},
            {"max_rel_gap", max_rel_gap},
            {"chains", chains},
            {"spots", spots},
            {"refs", refs},
            {"portfolio", portfolio},
            {"ot_atoms", ot_atoms},
            {"mean_samples", mean_samples},
            {"heatmap_grid", heatmap_grid},
            {"heatmap_inner", heatmap_inner},
            {"lp_instances", lp_instances}};
}

void set_config_value(ExperimentConfig& cfg, const std::string& key_in, const std::string& value, std::size_t line) {
    const std::string key = trim(key_in);
    const std::string v = trim(value);
    if (key == "name") cfg.name = v;
    else if (key == "d") cfg.d = count(v, line);
    else if (key == "sigma") cfg.sigma = nums(v, line);
    else if (key == "rho") cfg.rho = nums(v, line);
    else if (key == "weights") cfg.weights = nums(v, line);
    else if (key == "instances") cfg.instances = count(v, line);
    else if (key == "formulation") cfg.formulations = formulations(v, line);
    else if (key == "gamma") cfg.gamma = num(v, line);
    else if (key == "budget") {
        try {
            cfg.budget = Budget::parse(v);
        } catch (const DomainError& e) {
            throw ParseError(e.what(), line);
        }
    }
    else if (key == "batches") cfg.budget.n_batches = count(v, line);
    else if (key == "points") cfg.budget.points_per_batch = count(v, line);
    else if (key == "epochs") cfg.budget.epochs_per_batch = count(v, line);
    else if (key == "learning_rate") cfg.learning_rate = num(v, line);
    else if (key == "lr_decay") cfg.lr_decay = num(v, line);
    else if (key == "minibatch") cfg.minibatch = count(v, line);
    else if (key == "n_eval") cfg.n_eval = count(v, line);
    else if (key == "window") cfg.window = count(v, line);
    else if (key == "hidden") {
        cfg.hidden.clear();
        for (const auto& s : split_list(v)) cfg.hidden.push_back(static_cast<int>(count(s, line)));
    }
    else if (key == "seed") cfg.seed = count(v, line);
    else if (key == "out") cfg.out_dir = v;
    else if (key == "acknowledge_reduced") cfg.acknowledge_reduced = flag(v, line);
    else if (key == "max_rel_gap") cfg.max_rel_gap = num(v, line);
    else if (key == "chains") cfg.chains = split_list(v);
    else if (key == "spots") cfg.spots = nums(v, line);
    else if (key == "refs") cfg.refs = nums(v, line);
    else if (key == "portfolio") cfg.portfolio = nums(v, line);
    else if (key == "ot_atoms") cfg.ot_atoms = count(v, line);
    else if (key == "mean_samples") cfg.mean_samples = count(v, line);
    else if (key == "heatmap_grid") cfg.heatmap_grid = count(v, line);
    else if (key == "heatmap_inner") cfg.heatmap_inner = count(v, line);
    else if (key == "lp_instances") cfg.lp_instances = count(v, line);
    else throw ParseError("unknown key '" + key + "'", line);
}

ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", no);
        set_config_value(cfg, line.substr(0, eq), line.substr(eq + 1), no);
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    return parse_config(in);
}

bool RunResult::passed() const {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

void write_manifest(const ExperimentConfig& cfg, const std::string& command) {
    ensure_dir(cfg.out_dir);
    json m = {{"command", command},
              {"version", kVersion},
              {"seed", cfg.seed},
              {"config", cfg.to_json()},
              {"compiler", __VERSION__},
              {"threads", 1}};
    std::ofstream(path_in(cfg, "manifest.json")) << std::setw(2) << m << "\n";
}

void write_summary(const ExperimentConfig& cfg, const RunResult& r) {
    ensure_dir(cfg.out_dir);
    json s = r.summary;
    json checks = json::array();
    for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    s["checks"] = checks;
    s["passed"] = r.passed();
    std::ofstream(path_in(cfg, "summary.json")) << std::setw(2) << s << "\n";
}

RunResult run_gaussian_benchmark(const ExperimentConfig& cfg, std::ostream& log) {
    if (cfg.d < 2) throw DomainError("gaussian benchmark needs d >= 2");
    for (auto f : cfg.formulations) {
        if (f == Formulation::ReducedAnti) throw DomainError("gaussian benchmark bounds from above; use full or reduced");
        if (f == Formulation::Reduced && cfg.d > 2 && !cfg.acknowledge_reduced)
            throw PreconditionError("reduced formulation with d > 2 needs acknowledge_reduced = true");
    }
    ensure_dir(cfg.out_dir);
    const auto d = static_cast<Eigen::Index>(cfg.d);
    Rng rng(cfg.seed);
    RunResult res;
    res.summary = {{"experiment", "gaussian"}, {"name", cfg.name}, {"d", cfg.d}};
    json instances = json::array();
    std::ofstream table(path_in(cfg, "table.csv"));
    table << "instance,d,formulation,sample_dim,exact,mean,std,rel_error,seconds\n" << std::setprecision(10);
    for (std::size_t k = 0; k < cfg.instances; ++k) {
        GaussianInstance g = GaussianInstance::random(cfg.d, rng);
        if (!cfg.sigma.empty()) {
            if (cfg.sigma.size() != cfg.d) throw DomainError("sigma needs d entries");
            g.sigma = Eigen::Map<const Eigen::VectorXd>(cfg.sigma.data(), d);
        }
        if (!cfg.rho.empty()) {
            if (cfg.rho.size() != cfg.d) throw DomainError("rho needs d entries");
            g.rho = Eigen::Map<const Eigen::VectorXd>(cfg.rho.data(), d);
        }
        if (!cfg.weights.empty()) {
            if (cfg.weights.size() != cfg.d) throw DomainError("weights needs d entries");
            for (Eigen::Index i = 0; i < d; ++i)
                for (Eigen::Index j = i + 1; j < d; ++j)
                    g.b(i, j) = cfg.weights[static_cast<std::size_t>(i)] * cfg.weights[static_cast<std::size_t>(j)];
        }
        const double exact = exact_value(g);
        const VmotInstance inst = g.instance();
        json ij = {{"instance", k},
                   {"sigma", std::vector<double>(g.sigma.data(), g.sigma.data() + d)},
                   {"rho", std::vector<double>(g.rho.data(), g.rho.data() + d)},
                   {"exact", exact}};
        std::vector<double> bw;
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = i + 1; j < d; ++j) bw.push_back(g.b(i, j));
        ij["b_upper"] = bw;
        log << "instance " << k << ": exact value " << exact << "\n";
        json runs = json::array();
        for (auto f : cfg.formulations) {
            const std::string tag = std::to_string(k) + "_" + to_string(f);
            log << "  " << to_string(f) << ": sample dimension " << sample_dim(f, cfg.d)
                << (f == Formulation::Full ? " (2d)" : " (d+1)") << "\n";
            const TrainResult tr = train(inst, f, cfg.train_config(1000.0, k));
            tr.report.save_csv(path_in(cfg, "convergence_" + tag + ".csv"));
            tr.state.save(path_in(cfg, "state_" + tag + ".txt"));
            const DensityResult dens = primal_density(tr.state, inst, cfg.heatmap_grid, cfg.heatmap_inner, cfg.seed + k);
            dens.density.save_csv(path_in(cfg, "heatmap_" + tag + ".csv"));
            const double gap = (tr.report.mean - exact) / exact;
            log << "  " << to_string(f) << ": mean " << tr.report.mean << " std " << tr.report.std << " rel error "
                << gap << " (" << tr.report.seconds << " s)\n";
            table << k << ',' << cfg.d << ',' << to_string(f) << ',' << sample_dim(f, cfg.d) << ',' << exact << ','
                  << tr.report.mean << ',' << tr.report.std << ',' << gap << ',' << tr.report.seconds << "\n";
            json rj = report_json(tr.report);
            rj["rel_error"] = gap;
            rj["sample_dim"] = sample_dim(f, cfg.d);
            rj["heatmap_uniform_fallback"] = dens.uniform_fallback;
            runs.push_back(rj);
            if (cfg.max_rel_gap >= 0.0) {
                std::ostringstream det;
                det << "rel error " << gap << " vs " << cfg.max_rel_gap;
                res.checks.push_back({"gap_" + tag, std::abs(gap) <= cfg.max_rel_gap, det.str()});
            }
        }
        ij["runs"] = runs;
        instances.push_back(ij);
    }
    res.summary["instances"] = instances;
    return res;
}

namespace {

double order_violation(const Marginal1D& mu, const Marginal1D& nu) {
    const auto grid = default_order_grid(mu, nu);
    double worst = 0.0;
    for (double x : grid) worst = std::max(worst, mu.abs_deviation(x) - nu.abs_deviation(x));
    return worst;
}

}  // namespace

RunResult run_empirical_bounds(const ExperimentConfig& cfg, std::ostream& log) {
    if (cfg.chains.size() != 4) throw DomainError("empirical run needs 4 chains: near/far of asset 1, near/far of asset 2");
    if (cfg.spots.size() != 2) throw DomainError("empirical run needs 2 spots");
    if (cfg.portfolio.size() != 2) throw DomainError("empirical run needs 2 portfolio weights");
    const std::vector<double> refs = cfg.refs.empty() ? cfg.spots : cfg.refs;
    if (refs.size() != 2) throw DomainError("empirical run needs 2 reference prices");
    ensure_dir(cfg.out_dir);
    RunResult res;
    res.summary = {{"experiment", "empirical"}, {"name", cfg.name}};

    std::vector<Marginal1D> mus, nus;
    for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t e = 0; e < 2; ++e) {
            const std::string& path = cfg.chains[2 * a + e];
            const OptionChain ch = load_chain(path, cfg.spots[a], "asset" + std::to_string(a + 1));
            for (const auto& w : ch.warnings) log << "warning: " << w << "\n";
            const ImpliedDensity dens = implied_density(ch);
            for (const auto& dg : dens.diagnostics) log << path << ": " << dg << "\n";
            const std::string tag = "asset" + std::to_string(a + 1) + (e == 0 ? "_near" : "_far");
            dens.save_csv(path_in(cfg, "density_" + tag + ".csv"));
            Marginal1D m = recenter(to_return_marginal(dens, refs[a]), (cfg.spots[a] - refs[a]) / refs[a]);
            save_tabulated_csv(m, path_in(cfg, "returns_" + tag + ".csv"));
            log << tag << ": raw mass " << dens.raw_mass << ", return sd " << std::sqrt(m.variance()) << "\n";
            (e == 0 ? mus : nus).push_back(m);
        }
        if (!convex_order(mus[a], nus[a])) {
            std::ostringstream msg;
            msg << "asset " << a + 1 << ": return marginals are not in convex order (max potential excess "
                << order_violation(mus[a], nus[a]) << ")";
            throw PreconditionError(msg.str());
        }
    }
    const CostSpec c = CostSpec::portfolio_variance(cfg.portfolio);
    const VmotInstance upper_inst{mus, nus, c};
    const VmotInstance lower_inst{mus, nus, c.scaled(-1.0)};

    const OtBounds ot = ot_bounds(nus, c, cfg.ot_atoms);
    Rng mrng(cfg.seed + 7);
    const Estimate mean = expectation(independent_sampler(mus, nus), 2, c, cfg.mean_samples, mrng);
    log << "OT bounds [" << ot.lower << ", " << ot.upper << "], independent mean " << mean.mean << " +- "
        << mean.std_err << "\n";

    std::ofstream table(path_in(cfg, "table.csv"));
    table << std::setprecision(10) << "formulation,quantity,value,std\n";
    json runs = json::array();
    for (auto f : cfg.formulations) {
        if (f == Formulation::ReducedAnti) throw DomainError("choose full or reduced; lower bounds pick the mirror automatically");
        const Formulation lf = f == Formulation::Reduced ? Formulation::ReducedAnti : Formulation::Full;
        const TrainResult up = train(upper_inst, f, cfg.train_config(1e5, 0));
        const TrainResult lo = train(lower_inst, lf, cfg.train_config(1e5, 1));
        const std::string tag = to_string(f);
        up.report.save_csv(path_in(cfg, "convergence_upper_" + tag + ".csv"));
        lo.report.save_csv(path_in(cfg, "convergence_lower_" + tag + ".csv"));
        const double vu = up.report.mean, vl = -lo.report.mean;
        const double su = up.report.std, sl = lo.report.std;
        log << tag << ": VMOT bounds [" << vl << ", " << vu << "] (std " << sl << ", " << su << ")\n";
        table << tag << ",ot_lower," << ot.lower << ",0\n"
              << tag << ",vmot_lower," << vl << ',' << sl << "\n"
              << tag << ",sample_mean," << mean.mean << ',' << mean.std_err << "\n"
              << tag << ",vmot_upper," << vu << ',' << su << "\n"
              << tag << ",ot_upper," << ot.upper << ",0\n";
        const std::vector<std::pair<std::string, std::pair<double, double>>> q{
            {"ot_lower", {ot.lower, 0.0}},   {"vmot_lower", {vl, sl}}, {"sample_mean", {mean.mean, mean.std_err}},
            {"vmot_upper", {vu, su}},        {"ot_upper", {ot.upper, 0.0}}};
        for (std::size_t i = 0; i + 1 < q.size(); ++i) {
            const double slack = q[i + 1].second.first - q[i].second.first;
            const double tol = std::hypot(q[i].second.second, q[i + 1].second.second);
            std::ostringstream det;
            det << q[i].first << " " << q[i].second.first << " <= " << q[i + 1].first << " " << q[i + 1].second.first
                << " (slack " << slack << ", tolerance " << tol << ")";
            res.checks.push_back({tag + ":" + q[i].first + "<=" + q[i + 1].first, slack >= -tol, det.str()});
        }
        runs.push_back({{"formulation", tag},
                        {"upper", report_json(up.report)},
                        {"lower", report_json(lo.report)},
                        {"vmot_upper", vu},
                        {"vmot_lower", vl}});
    }
    res.summary["ot_lower"] = ot.lower;
    res.summary["ot_upper"] = ot.upper;
    res.summary["sample_mean"] = mean.mean;
    res.summary["sample_mean_std_err"] = mean.std_err;
    res.summary["runs"] = runs;
    return res;
}

RunResult run_lp_checks(const ExperimentConfig& cfg, std::ostream& log) {
    ensure_dir(cfg.out_dir);
    RunResult res;
    res.summary = {{"experiment", "lp"}, {"name", cfg.name}};
    Rng rng(cfg.seed);
    std::ofstream report(path_in(cfg, "monotone_checks.csv"));
    report << std::setprecision(10) << "instance,value,tv_distance,irreducible,passed\n";
    std::size_t passed = 0;
    for (std::size_t k = 0; k < cfg.lp_instances; ++k) {
        const DiscreteVmot inst = random_monotone_instance(rng);
        const MonotoneReport r = verify_monotone_d2(inst);
        const bool ok = r.passed && r.irreducible;
        passed += ok;
        report << k << ',' << r.solution.value << ',' << r.tv_distance << ',' << r.irreducible << ',' << ok << "\n";
        res.checks.push_back({"monotone_" + std::to_string(k), ok, "tv " + csv::format(r.tv_distance)});
    }
    log << "monotone checks: " << passed << "/" << cfg.lp_instances << " passed\n";
    res.summary["monotone_passed"] = passed;
    res.summary["monotone_total"] = cfg.lp_instances;
    try {
        const CounterexampleReport cx = counterexample_d3();
        log << "counterexample: free optimum " << cx.free_value << ", monotone-constrained " << cx.fixed_value
            << ", gap " << cx.gap << "\n";
        res.summary["counterexample"] = {{"free_value", cx.free_value},
                                         {"fixed_value", cx.fixed_value},
                                         {"gap", cx.gap},
                                         {"dual_value", cx.dual_value},
                                         {"dual_min_slack", cx.dual_min_slack}};
        res.checks.push_back({"counterexample_free_value", std::abs(cx.free_value - 1.35) <= 1e-8,
                              csv::format(cx.free_value)});
        res.checks.push_back({"counterexample_strict_gap", cx.fixed_value < cx.free_value - 1e-6,
                              csv::format(cx.fixed_value)});
    } catch (const FixtureError& e) {
        res.checks.push_back({"counterexample", false, e.what()});
    }
    return res;
}

}  // namespace vmot
