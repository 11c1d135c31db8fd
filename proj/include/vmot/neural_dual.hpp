#pragma once

#include "vmot/coupling.hpp"
#include "vmot/distributions.hpp"
#include "vmot/mlp.hpp"
#include "vmot/modularity.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace vmot {

/// Full: the first-period coupling is free, samples live in (0,1)^{2d}.
/// Reduced: X_i = F_i^-1(U) for one common U, samples in (0,1)^{d+1}.
/// ReducedAnti: d = 2 only, X = (F_1^-1(U), F_2^-1(1 - U)).
enum class Formulation { Full, Reduced, ReducedAnti };

const char* to_string(Formulation f);
Formulation parse_formulation(const std::string& s);

struct VmotInstance {
    std::vector<Marginal1D> mu;
    std::vector<Marginal1D> nu;
    CostSpec cost;

    std::size_t dim() const noexcept { return mu.size(); }
    void validate() const;
};

/// Sampled points of the reference measure. Columns are points. Network inputs
/// are the standard normal scores of the uniform coordinates.
struct Batch {
    Eigen::MatrixXd zu;   // Full: d x n, Reduced: 1 x n
    Eigen::MatrixXd zv;   // d x n
    Eigen::MatrixXd x;    // d x n
    Eigen::MatrixXd y;    // d x n
    Eigen::RowVectorXd c;
    Eigen::Index size() const noexcept { return c.size(); }
};

Batch sample_batch(const VmotInstance& inst, Formulation f, Eigen::Index n, Rng& rng);
/// Batch at given quantile levels: u is (Full: d, Reduced: 1) x n, v is d x n.
Batch batch_at(const VmotInstance& inst, Formulation f, const Eigen::MatrixXd& u, const Eigen::MatrixXd& v);

/// The hedge (phi, psi, h) as rectifier networks, with optimizer state.
class DualState {
public:
    DualState() = default;
    DualState(Formulation f, std::size_t d, double gamma, std::vector<int> hidden = {64, 64});

    Formulation formulation() const noexcept { return formulation_; }
    std::size_t dim() const noexcept { return d_; }
    double gamma() const noexcept { return gamma_; }
    /// Every network output is multiplied by this factor.
    double output_scale() const noexcept { return scale_; }
    void set_output_scale(double s);
    const std::vector<int>& hidden() const noexcept { return hidden_; }

    Eigen::VectorXd& params() noexcept { return params_; }
    const Eigen::VectorXd& params() const noexcept { return params_; }
    Adam& optimizer() noexcept { return adam_; }
    const Adam& optimizer() const noexcept { return adam_; }

    /// Framework-default random initialization of all networks.
    void init(Rng& rng);

    std::size_t n_phi() const noexcept { return formulation_ == Formulation::Full ? d_ : 1; }
    const Mlp& phi_net(std::size_t i) const { return nets_[i]; }
    const Mlp& psi_net(std::size_t i) const { return nets_[n_phi() + i]; }
    const Mlp& h_net(std::size_t i) const { return nets_[n_phi() + d_ + i]; }
    Eigen::Index phi_offset(std::size_t i) const { return offsets_[i]; }
    Eigen::Index psi_offset(std::size_t i) const { return offsets_[n_phi() + i]; }
    Eigen::Index h_offset(std::size_t i) const { return offsets_[n_phi() + d_ + i]; }
    std::size_t n_nets() const noexcept { return nets_.size(); }
    const Mlp& net(std::size_t k) const { return nets_[k]; }
    Eigen::Index net_offset(std::size_t k) const { return offsets_[k]; }
    /// "phi_1", "psi_2", "h_1", ...
    std::string net_name(std::size_t k) const;

    /// Text header followed by one parameter per line; includes the optimizer moments.
    void save(const std::string& path) const;
    static DualState load(const std::string& path);

private:
    Formulation formulation_ = Formulation::Reduced;
    std::size_t d_ = 0;
    double gamma_ = 1000.0;
    double scale_ = 1.0;
    std::vector<int> hidden_;
    std::vector<Mlp> nets_;
    std::vector<Eigen::Index> offsets_;
    Eigen::VectorXd params_;
    Adam adam_;
};

/// Hedge value phi + psi + h.(y - x) at every point of the batch.
Eigen::RowVectorXd dual_payoff(const DualState& s, const Batch& b);
/// Single point at quantile levels u (Full: d, Reduced: 1 entries) and v (d entries).
double dual_payoff(const DualState& s, const VmotInstance& inst, std::span<const double> u,
                   std::span<const double> v);

/// b_gamma(t) = gamma/2 (t+)^2 and its derivative gamma t+.
double penalty(double gamma, double t);
double penalty_derivative(double gamma, double t);

struct LossParts {
    double linear = 0.0;
    double penalty = 0.0;
    double total() const { return linear + penalty; }
};

/// Batch mean of phi + sum psi_i plus the mean penalty on c - payoff. When
/// `grad` is given it receives the gradient with respect to s.params().
LossParts loss(const DualState& s, const Batch& b, Eigen::VectorXd* grad = nullptr);

struct TrainConfig {
    double gamma = 1000.0;
    std::size_t n_batches = 3;
    std::size_t points_per_batch = 100000;
    std::size_t epochs_per_batch = 10;
    double learning_rate = 1e-3;
    /// Learning rate multiplier applied after every epoch.
    double lr_decay = 1.0;
    std::size_t minibatch = 1000;
    std::size_t n_eval = 20000;
    std::uint64_t seed = 0;
    std::vector<int> hidden{64, 64};
    /// Scale network outputs by the root mean square of the cost on the first batch.
    bool normalize_output = true;
    /// Epochs summarized in the report; 0 means min(100, ceil(epochs / 3)).
    std::size_t window = 0;

    std::size_t total_epochs() const { return n_batches * epochs_per_batch; }
    std::size_t summary_window() const;
};

struct TrainReport {
    std::vector<double> epoch_values;
    std::vector<double> epoch_std_err;
    std::size_t window = 0;
    double mean = 0.0;   // over the last `window` epochs
    double std = 0.0;
    TrainConfig config;
    Formulation formulation = Formulation::Reduced;
    double seconds = 0.0;

    /// CSV columns epoch,dual_value,std_err.
    void save_csv(const std::string& path) const;
};

struct TrainResult {
    DualState state;
    TrainReport report;
};

using EpochCallback = std::function<void(std::size_t epoch, double value)>;

/// Adam on the penalized dual. Deterministic for a given config. Throws
/// TrainingError when the loss or a dual estimate stops being finite.
TrainResult train(const VmotInstance& inst, Formulation f, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Monte Carlo estimate of the penalized dual objective on a fresh sample.
Estimate dual_value(const DualState& s, const VmotInstance& inst, std::size_t n_points, std::uint64_t seed);

struct DensityResult {
    GridFn density;        // on the midpoints of an n x n grid over (u_1, u_2)
    bool uniform_fallback = false;
};

/// Density of the first-period quantiles (u_1, u_2) implied by the penalty
/// derivative, averaged over the remaining coordinates and normalized.
DensityResult primal_density(const DualState& s, const VmotInstance& inst, std::size_t n_grid,
                             std::size_t n_inner, std::uint64_t seed);

}  // namespace vmot
