#include "vmot/mlp.hpp"

#include "vmot/errors.hpp"

#include <cmath>

namespace vmot {

Mlp::Mlp(int input_dim, std::vector<int> hidden, int output_dim) {
    if (input_dim < 1 || output_dim < 1) throw DomainError("Mlp: dimensions must be positive");
    sizes_.push_back(input_dim);
    for (int h : hidden) {
        if (h < 1) throw DomainError("Mlp: hidden widths must be positive");
        sizes_.push_back(h);
    }
    sizes_.push_back(output_dim);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        offsets_.push_back(n_params_);
        n_params_ += static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
    }
}

void Mlp::init(double* params, Rng& rng) const {
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
        std::uniform_real_distribution<double> u(-bound, bound);
        const Eigen::Index n = static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
        for (Eigen::Index k = 0; k < n; ++k) params[offsets_[l] + k] = u(rng);
    }
}

Eigen::MatrixXd Mlp::forward(const double* params, const Eigen::MatrixXd& X, Tape* tape) const {
    if (X.rows() != input_dim()) throw DomainError("Mlp::forward: input dimension mismatch");
    const std::size_t layers = sizes_.size() - 1;
    if (tape) {
        tape->acts.resize(layers);
        tape->acts[0] = X;
    }
    Eigen::MatrixXd a = X;
    for (std::size_t l = 0; l < layers; ++l) {
        const int in = sizes_[l], out = sizes_[l + 1];
        Eigen::Map<const Eigen::MatrixXd> W(params + offsets_[l], out, in);
        Eigen::Map<const Eigen::VectorXd> b(params + offsets_[l] + static_cast<Eigen::Index>(in) * out, out);
        Eigen::MatrixXd z = W * a;
        z.colwise() += b;
        if (l + 1 == layers) return z;
        a = z.cwiseMax(0.0);
        if (tape) tape->acts[l + 1] = a;
    }
    return a;
}

void Mlp::backward(const double* params, const Tape& tape, const Eigen::MatrixXd& dout, double* grad) const {
    const std::size_t layers = sizes_.size() - 1;
    Eigen::MatrixXd delta = dout;
    for (std::size_t l = layers; l-- > 0;) {
        const int in = sizes_[l], out = sizes_[l + 1];
        const auto& a = tape.acts[l];
        Eigen::Map<Eigen::MatrixXd> gW(grad + offsets_[l], out, in);
        Eigen::Map<Eigen::VectorXd> gb(grad + offsets_[l] + static_cast<Eigen::Index>(in) * out, out);
        gW.noalias() += delta * a.transpose();
        gb += delta.rowwise().sum();
        if (l == 0) break;
        Eigen::Map<const Eigen::MatrixXd> W(params + offsets_[l], out, in);
        Eigen::MatrixXd back = W.transpose() * delta;
        delta = (a.array() > 0.0).select(back, 0.0);
    }
}

void Adam::step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad) {
    if (m_.size() != params.size()) {
        m_ = Eigen::VectorXd::Zero(params.size());
        v_ = Eigen::VectorXd::Zero(params.size());
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace vmot
