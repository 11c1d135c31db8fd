#pragma once

#include "vmot/coupling.hpp"
#include "vmot/neural_dual.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace vmot {

struct Budget {
    std::size_t n_batches = 3;
    std::size_t points_per_batch = 100000;
    std::size_t epochs_per_batch = 10;

    static Budget desk() { return {3, 100000, 10}; }
    static Budget large() { return {30, 1000000, 10}; }
    static Budget parse(const std::string& name);
};

/// Settings shared by all experiment kinds. Read from a `key = value` file (see
/// README) with command line overrides applied on top.
struct ExperimentConfig {
    std::string name = "experiment";
    std::size_t d = 2;
    std::vector<double> sigma;       // empty: drawn from [1,2]
    std::vector<double> rho;         // empty: drawn from [2,3]
    std::vector<double> weights;     // empty: drawn uniformly and normalized
    std::size_t instances = 1;
    std::vector<Formulation> formulations{Formulation::Reduced};
    double gamma = 0.0;              // 0: 1000 for normal marginals, 1e5 otherwise
    Budget budget = Budget::desk();
    double learning_rate = 1e-3;
    double lr_decay = 1.0;
    std::size_t minibatch = 1000;
    std::size_t n_eval = 20000;
    std::size_t window = 0;
    std::vector<int> hidden{64, 64};
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    bool acknowledge_reduced = false;
    double max_rel_gap = -1.0;       // negative: no assertion

    // empirical: near and far chains of asset 1, then of asset 2
    std::vector<std::string> chains;
    std::vector<double> spots;       // one per asset
    std::vector<double> refs;        // one per asset; default spots
    std::vector<double> portfolio{0.5, 0.5};
    std::size_t ot_atoms = 100000;
    std::size_t mean_samples = 1000000;

    std::size_t heatmap_grid = 40;
    std::size_t heatmap_inner = 200;
    std::size_t lp_instances = 20;

    TrainConfig train_config(double default_gamma, std::uint64_t seed_offset) const;
    nlohmann::json to_json() const;
};

/// Grammar: one `key = value` per line, `#` starts a comment, lists are comma
/// separated. Unknown keys and malformed values raise ParseError with the line.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);
/// Applies a single `key = value` setting.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value, std::size_t line = 0);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct RunResult {
    nlohmann::json summary;
    std::vector<CheckResult> checks;
    bool passed() const;
};

/// Writes manifest.json (config echo, seed, version) into cfg.out_dir.
void write_manifest(const ExperimentConfig& cfg, const std::string& command);
/// Writes summary.json with the checks appended.
void write_summary(const ExperimentConfig& cfg, const RunResult& r);

/// Random or configured normal marginals with b_ij = w_i w_j. For each
/// instance and formulation: exact value, convergence CSV, state dump,
/// quantile heat map and a table row.
RunResult run_gaussian_benchmark(const ExperimentConfig& cfg, std::ostream& log);

/// Two assets, two expiries: implied return marginals, upper and lower VMOT
/// bounds on the portfolio variance, OT bounds and the independent mean.
RunResult run_empirical_bounds(const ExperimentConfig& cfg, std::ostream& log);

/// Monotone x-marginal checks on seeded random instances and the d = 3 counterexample.
RunResult run_lp_checks(const ExperimentConfig& cfg, std::ostream& log);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace vmot
