#include "vmot/simplex.hpp"

#include "vmot/errors.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <vector>

namespace vmot {

const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::Optimal: return "optimal";
        case LpStatus::Infeasible: return "infeasible";
        case LpStatus::Unbounded: return "unbounded";
    }
    return "?";
}

namespace {

using Tableau = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Simplex {
public:
    Simplex(const StandardLp& lp, double tol) : m_(lp.A.rows()), n_(lp.A.cols()), tol_(tol) {
        T_ = Tableau::Zero(m_ + 1, n_ + m_ + 1);
        basis_.resize(m_);
        for (Eigen::Index i = 0; i < m_; ++i) {
            const double s = lp.b(i) < 0.0 ? -1.0 : 1.0;
            T_.row(i).head(n_) = s * lp.A.row(i);
            T_(i, n_ + i) = 1.0;
            T_(i, rhs()) = s * lp.b(i);
            basis_[i] = n_ + i;
        }
    }

    Eigen::Index rhs() const { return n_ + m_; }

    // Returns false when unbounded.
    bool run(Eigen::Index n_allowed, double cost_tol, int& iterations) {
        int degenerate = 0;
        bool bland = false;
        for (;;) {
            Eigen::Index enter = -1;
            double best = -cost_tol;
            for (Eigen::Index j = 0; j < n_allowed; ++j) {
                const double rc = T_(m_, j);
                if (rc < best) {
                    enter = j;
                    if (bland) break;
                    best = rc;
                }
            }
            if (enter < 0) return true;

            Eigen::Index leave = -1;
            double ratio = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < m_; ++i) {
                const double a = T_(i, enter);
                if (a <= tol_) continue;
                const double r = T_(i, rhs()) / a;
                if (r < ratio - 1e-12 || (r <= ratio + 1e-12 && leave >= 0 && basis_[i] < basis_[leave])) {
                    if (r < ratio) ratio = r;
                    leave = i;
                }
            }
            if (leave < 0) return false;
            if (ratio <= 1e-12) {
                if (++degenerate > 50) bland = true;
            } else {
                degenerate = 0;
            }
            pivot(leave, enter);
            if (++iterations > 1000000) throw std::runtime_error("simplex: iteration limit");
        }
    }

    void pivot(Eigen::Index r, Eigen::Index col) {
        T_.row(r) /= T_(r, col);
        for (Eigen::Index i = 0; i <= m_; ++i) {
            if (i == r) continue;
            const double f = T_(i, col);
            if (f != 0.0) T_.row(i) -= f * T_.row(r);
        }
        T_.col(col).setZero();
        T_(r, col) = 1.0;
        basis_[r] = col;
    }

    void set_phase1_objective() {
        T_.row(m_).setZero();
        for (Eigen::Index i = 0; i < m_; ++i) T_.row(m_) -= T_.row(i);
        for (Eigen::Index i = 0; i < m_; ++i) T_(m_, n_ + i) = 0.0;
    }

    void set_phase2_objective(const Eigen::VectorXd& c) {
        T_.row(m_).setZero();
        T_.row(m_).head(n_) = c.transpose();
        for (Eigen::Index i = 0; i < m_; ++i) {
            if (basis_[i] < n_) T_.row(m_) -= c(basis_[i]) * T_.row(i);
        }
        T_.row(m_).segment(n_, m_).setZero();
    }

    // Pivots artificial variables out of the basis where possible. Rows whose
    // artificial cannot leave are redundant.
    void drive_out_artificials() {
        for (Eigen::Index i = 0; i < m_; ++i) {
            if (basis_[i] < n_) continue;
            Eigen::Index best = -1;
            double mag = tol_;
            for (Eigen::Index j = 0; j < n_; ++j) {
                if (std::abs(T_(i, j)) > mag) {
                    mag = std::abs(T_(i, j));
                    best = j;
                }
            }
            if (best >= 0) pivot(i, best);
        }
    }

    Eigen::Index m_, n_;
    double tol_;
    Tableau T_;
    std::vector<Eigen::Index> basis_;
};

}  // namespace

LpResult solve_lp(const StandardLp& lp, double tol) {
    const Eigen::Index m = lp.A.rows(), n = lp.A.cols();
    if (lp.b.size() != m || lp.c.size() != n) throw DomainError("solve_lp: dimension mismatch");
    LpResult res;
    if (n == 0) throw DomainError("solve_lp: no variables");

    Simplex s(lp, tol);
    const double bscale = 1.0 + lp.b.cwiseAbs().sum();
    s.set_phase1_objective();
    s.run(n, tol, res.iterations);
    if (-s.T_(m, s.rhs()) > 1e-8 * bscale) {
        res.status = LpStatus::Infeasible;
        return res;
    }
    s.drive_out_artificials();

    s.set_phase2_objective(lp.c);
    const double cscale = std::max(1.0, lp.c.cwiseAbs().maxCoeff());
    if (!s.run(n, tol * cscale, res.iterations)) {
        res.status = LpStatus::Unbounded;
        return res;
    }
    res.status = LpStatus::Optimal;

    std::vector<Eigen::Index> rows, cols;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (s.basis_[i] < n) {
            rows.push_back(i);
            cols.push_back(s.basis_[i]);
        }
    }
    const auto k = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd B(k, k);
    Eigen::VectorXd bb(k), cb(k);
    for (Eigen::Index a = 0; a < k; ++a) {
        bb(a) = lp.b(rows[a]);
        cb(a) = lp.c(cols[a]);
        for (Eigen::Index c = 0; c < k; ++c) B(a, c) = lp.A(rows[a], cols[c]);
    }
    res.x = Eigen::VectorXd::Zero(n);
    res.y = Eigen::VectorXd::Zero(m);
    if (k > 0) {
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
        const Eigen::VectorXd xb = lu.solve(bb);
        const Eigen::VectorXd yb = lu.transpose().solve(cb);
        bool ok = xb.allFinite() && xb.minCoeff() > -1e-9;
        if (ok) {
            for (Eigen::Index a = 0; a < k; ++a) res.x(cols[a]) = std::max(0.0, xb(a));
        } else {
            for (Eigen::Index a = 0; a < k; ++a) res.x(cols[a]) = std::max(0.0, s.T_(rows[a], s.rhs()));
        }
        for (Eigen::Index a = 0; a < k; ++a) res.y(rows[a]) = yb(a);
    }
    res.value = lp.c.dot(res.x);
    return res;
}

}  // namespace vmot
