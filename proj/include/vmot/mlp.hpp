#pragma once

#include "vmot/distributions.hpp"

#include <Eigen/Core>

#include <vector>

namespace vmot {

/// Fully connected rectifier network R^in -> R^out. The network owns only its
/// shape; parameters live in an external flat vector laid out layer by layer
/// as (W column-major, b).
class Mlp {
public:
    Mlp() = default;
    Mlp(int input_dim, std::vector<int> hidden = {64, 64}, int output_dim = 1);

    int input_dim() const noexcept { return sizes_.front(); }
    int output_dim() const noexcept { return sizes_.back(); }
    const std::vector<int>& sizes() const noexcept { return sizes_; }
    Eigen::Index n_params() const noexcept { return n_params_; }

    /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
    void init(double* params, Rng& rng) const;

    /// Post-activation values of every layer but the last, input first.
    struct Tape {
        std::vector<Eigen::MatrixXd> acts;
    };

    /// X is input_dim x n; returns output_dim x n.
    Eigen::MatrixXd forward(const double* params, const Eigen::MatrixXd& X, Tape* tape = nullptr) const;

    /// Adds d(sum dout .* out)/d(params) to grad.
    void backward(const double* params, const Tape& tape, const Eigen::MatrixXd& dout, double* grad) const;

private:
    std::vector<int> sizes_;
    std::vector<Eigen::Index> offsets_;   // start of W for each layer
    Eigen::Index n_params_ = 0;
};

class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad);

    double lr() const noexcept { return lr_; }
    void set_lr(double lr) noexcept { lr_ = lr; }
    double beta1() const noexcept { return beta1_; }
    double beta2() const noexcept { return beta2_; }
    double eps() const noexcept { return eps_; }
    long long steps() const noexcept { return t_; }

    Eigen::VectorXd& first_moment() noexcept { return m_; }
    Eigen::VectorXd& second_moment() noexcept { return v_; }
    const Eigen::VectorXd& first_moment() const noexcept { return m_; }
    const Eigen::VectorXd& second_moment() const noexcept { return v_; }
    void set_steps(long long t) noexcept { t_ = t; }

private:
    double lr_, beta1_, beta2_, eps_;
    long long t_ = 0;
    Eigen::VectorXd m_, v_;
};

}  // namespace vmot
