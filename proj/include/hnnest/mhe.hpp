#pragma once

#include <hnnest/constraints.hpp>
#include <hnnest/numerics.hpp>
#include <hnnest/plant.hpp>

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <deque>

namespace hnnest {

struct MheConfig {
    int decimation = 100;      // plant steps per estimator step (M)
    int horizon = 20;          // sliding window length (L_win)
    double r = 1e6;            // measurement variance, R = (10³)² I₂
    Vector q_theta;            // per-step drift variance; default diag(9e-4, 0, 0, 0)
    double rho_ar = 0.98;      // AR(1) disturbance coefficient
    double sigma_w = 5.0;      // AR(1) innovation std
    double sigma_d0 = 50.0;    // arrival std of the disturbance state
    Vector p0_theta;           // arrival variances; default diag(9, 1e-8, 1e-8, 1e-8)
    double vel_filter_pole = 0.9;  // first-order IIR prefilter on velocities
    int max_iterations = 30;
    double lm_damping0 = 1e-3;
    double grad_tol = 1e-8;
    double ridge = 1e-10;      // diagonal ridge on the damped system
};

/// Disturbance-augmented projection-based moving-horizon estimator.
/// Decision variables per window slot: (θ_j, d_j). The cost stacks
/// measurement residuals (R⁻¹), parameter-drift penalties (Q_θ⁻¹, only k1
/// free to move), an AR(1) disturbance chain (σ_w⁻²) and a Gaussian arrival
/// term at the window head. Solved by projected Gauss–Newton with LM
/// damping in square-root (QR) form; box constraints on every θ_j via
/// clamping; warm-started from the shifted previous solution. Arrival
/// statistics absorb the outgoing slot through one Kalman step.
class DaPbMhe {
public:
    DaPbMhe(const MheConfig& cfg, const Vector& theta0, const BoxConstraints& box,
            const MsdParams& masses, double h_plant)
        : cfg_(cfg), box_(box), masses_(masses), h_(h_plant) {
        p_ = static_cast<int>(theta0.size());
        if (cfg_.q_theta.size() == 0) {
            cfg_.q_theta = Vector::Zero(p_);
            cfg_.q_theta(0) = 9e-4;
        }
        if (cfg_.p0_theta.size() == 0) {
            cfg_.p0_theta = Vector::Constant(p_, 1e-8);
            cfg_.p0_theta(0) = 9.0;
        }
        q_theta_ridged_ = cfg_.q_theta.cwiseMax(1e-12);

        theta_out_ = theta0.cwiseMax(box_.lower).cwiseMin(box_.upper);
        arrival_mean_ = Vector::Zero(p_ + 1);
        arrival_mean_.head(p_) = theta_out_;
        arrival_cov_ = Matrix::Zero(p_ + 1, p_ + 1);
        arrival_cov_.topLeftCorner(p_, p_) = Matrix(cfg_.p0_theta.asDiagonal());
        arrival_cov_(p_, p_) = cfg_.sigma_d0 * cfg_.sigma_d0;
    }

    /// Advance one plant step. Velocities are prefiltered at the plant rate;
    /// every M-th step a decimated snapshot enters the window and the
    /// windowed problem is re-solved.
    void step(const PlantState& before, const PlantState& after, double f) {
        if (!initialized_) {
            vel_filt_ = before.x.tail(2);
            vel_filt_dec_ = vel_filt_;
            initialized_ = true;
        }
        const double a = cfg_.vel_filter_pole;
        vel_filt_ = a * vel_filt_ + (1.0 - a) * after.x.tail(2);
        ++step_count_;
        if (step_count_ % cfg_.decimation != 0) return;

        const double dt = cfg_.decimation * h_;
        const Vector accel = (vel_filt_ - vel_filt_dec_) / dt;
        vel_filt_dec_ = vel_filt_;

        Matrix w_mat(2, 4);
        const Vector& x = after.x;
        w_mat << x(1) - x(0), -vel_filt_(0) + vel_filt_(1), 0.0, 0.0,
                 -x(1) + x(0), -vel_filt_(1) + vel_filt_(0), -x(1), -vel_filt_(1);
        Vector w_vec(2);
        w_vec << masses_.m1 * accel(0) - f, masses_.m2 * accel(1);
        step_decimated(w_mat, w_vec);
    }

    /// Push one decimated regression pair into the window and re-solve.
    void step_decimated(const Matrix& w_mat, const Vector& w_vec) {
        window_.push_back(Slot{w_mat, w_vec});
        if (static_cast<int>(window_.size()) > cfg_.horizon) {
            absorb_into_arrival(window_.front());
            window_.pop_front();
            // shift the warm start by one slot
            if (solution_.size() > 0) {
                const int vars = static_cast<int>(solution_.size());
                Vector shifted(vars);
                shifted.head(vars - 5) = solution_.tail(vars - 5);
                shifted.tail(5) = solution_.tail(5);
                shifted(vars - 1) = cfg_.rho_ar * solution_(vars - 1);
                solution_ = shifted;
            }
        }
        solve();
    }

    const Vector& theta() const { return theta_out_; }
    double d_hat() const { return d_out_; }
    bool stalled() const { return stalled_; }
    long solves() const { return solves_; }
    const Vector& arrival_mean() const { return arrival_mean_; }

private:
    struct Slot {
        Matrix W;  // 2 × p
        Vector w;  // 2
    };

    // One Kalman step on the arrival Gaussian: measurement update with the
    // outgoing slot, then the (θ random walk, AR(1) d) time update.
    void absorb_into_arrival(const Slot& slot) {
        Matrix h = Matrix::Zero(2, p_ + 1);
        h.leftCols(p_) = slot.W;
        h(1, p_) = 1.0;
        Matrix s = h * arrival_cov_ * h.transpose() + cfg_.r * Matrix::Identity(2, 2);
        Matrix gain =
            arrival_cov_ * h.transpose() * solve_spd(0.5 * (s + s.transpose()), Matrix::Identity(2, 2));
        arrival_mean_ += gain * (slot.w - h * arrival_mean_);
        arrival_cov_ = (Matrix::Identity(p_ + 1, p_ + 1) - gain * h) * arrival_cov_;

        arrival_mean_(p_) *= cfg_.rho_ar;
        Matrix f_mat = Matrix::Identity(p_ + 1, p_ + 1);
        f_mat(p_, p_) = cfg_.rho_ar;
        arrival_cov_ = f_mat * arrival_cov_ * f_mat.transpose();
        arrival_cov_.topLeftCorner(p_, p_) += Matrix(q_theta_ridged_.asDiagonal());
        arrival_cov_(p_, p_) += cfg_.sigma_w * cfg_.sigma_w;
        arrival_cov_ = 0.5 * (arrival_cov_ + arrival_cov_.transpose());

        arrival_mean_.head(p_) =
            arrival_mean_.head(p_).cwiseMax(box_.lower).cwiseMin(box_.upper);
    }

    // weighted Jacobian and rhs of the (linear) windowed problem
    void build_system(Matrix& jac, Vector& rhs) const {
        const int n = static_cast<int>(window_.size());
        const int vars = 5 * n;
        const int rows = 5 + 2 * n + 5 * (n - 1);
        jac = Matrix::Zero(rows, vars);
        rhs = Vector::Zero(rows);
        int row = 0;

        // arrival block: L⁻¹ (z_0 − z̄), L = chol(P_arr)
        Eigen::LLT<Matrix> llt(arrival_cov_);
        Matrix l_inv = llt.matrixL().solve(Matrix::Identity(p_ + 1, p_ + 1));
        jac.block(row, 0, p_ + 1, p_ + 1) = l_inv;
        rhs.segment(row, p_ + 1) = l_inv * arrival_mean_;
        row += p_ + 1;

        const double inv_sr = 1.0 / std::sqrt(cfg_.r);
        for (int j = 0; j < n; ++j) {
            // measurement rows: (W_j θ_j + h_d d_j − w_j)/σ_r
            jac.block(row, 5 * j, 2, p_) = inv_sr * window_[j].W;
            jac(row + 1, 5 * j + p_) = inv_sr;
            rhs.segment(row, 2) = inv_sr * window_[j].w;
            row += 2;
            if (j == 0) continue;
            // drift rows: (θ_j − θ_{j−1})/√q_i
            for (int i = 0; i < p_; ++i) {
                const double wgt = 1.0 / std::sqrt(q_theta_ridged_(i));
                jac(row, 5 * j + i) = wgt;
                jac(row, 5 * (j - 1) + i) = -wgt;
                ++row;
            }
            // AR row: (d_j − ρ d_{j−1})/σ_w
            jac(row, 5 * j + p_) = 1.0 / cfg_.sigma_w;
            jac(row, 5 * (j - 1) + p_) = -cfg_.rho_ar / cfg_.sigma_w;
            ++row;
        }
    }

    void project(Vector& z) const {
        const int n = static_cast<int>(z.size()) / 5;
        for (int j = 0; j < n; ++j)
            z.segment(5 * j, p_) =
                z.segment(5 * j, p_).cwiseMax(box_.lower).cwiseMin(box_.upper);
    }

    void solve() {
        const int n = static_cast<int>(window_.size());
        const int vars = 5 * n;
        Matrix jac;
        Vector rhs;
        build_system(jac, rhs);

        Vector z;
        if (solution_.size() == vars) {
            z = solution_;
        } else {
            z = Vector::Zero(vars);
            for (int j = 0; j < n; ++j) {
                z.segment(5 * j, p_) = theta_out_;
                z(5 * j + p_) = d_out_;
            }
        }
        project(z);

        auto cost = [&](const Vector& x) { return (jac * x - rhs).squaredNorm(); };
        double current = cost(z);
        double damping = cfg_.lm_damping0;
        bool use_damping = false;
        bool any_accept = false;
        bool converged = false;
        int it = 0;
        for (; it < cfg_.max_iterations; ++it) {
            Vector residual = jac * z - rhs;
            Vector grad = jac.transpose() * residual;
            // stationarity for the box-constrained problem: the projected
            // gradient vanishes (the raw gradient does not at active bounds)
            Vector probe = z - grad;
            project(probe);
            if ((z - probe).norm() <= cfg_.grad_tol) {
                converged = true;
                break;
            }

            // square-root step: plain GN first (the problem is linear), the
            // LM ridge rows only once a step has been rejected
            Vector delta;
            if (!use_damping) {
                delta = jac.householderQr().solve(Vector(-residual));
            } else {
                Matrix aug(jac.rows() + vars, vars);
                aug.topRows(jac.rows()) = jac;
                aug.bottomRows(vars) =
                    std::sqrt(damping + cfg_.ridge) * Matrix::Identity(vars, vars);
                Vector aug_rhs = Vector::Zero(aug.rows());
                aug_rhs.head(jac.rows()) = -residual;
                delta = aug.householderQr().solve(aug_rhs);
            }

            Vector candidate = z + delta;
            project(candidate);
            const double c_new = cost(candidate);
            if (c_new < current) {
                const bool tiny_step = (candidate - z).norm() <= 1e-12 * (1.0 + z.norm());
                z = candidate;
                current = c_new;
                damping = std::max(damping / 3.0, 1e-12);
                any_accept = true;
                if (tiny_step) {
                    converged = true;
                    break;
                }
            } else {
                // the projected GN point of a linear problem is a fixed
                // point: a rejected undamped step with no descent means we
                // are already at the constrained optimum up to rounding
                if ((candidate - z).norm() <= 1e-10 * (1.0 + z.norm())) {
                    converged = true;
                    break;
                }
                use_damping = true;
                damping *= 10.0;
                if (damping > 1e12) break;
            }
        }
        stalled_ = !any_accept && !converged && it >= cfg_.max_iterations;
        if (!stalled_ || solution_.size() != vars) solution_ = z;
        ++solves_;
        theta_out_ = solution_.segment(5 * (n - 1), p_);
        d_out_ = solution_(5 * (n - 1) + p_);
    }

    MheConfig cfg_;
    BoxConstraints box_;
    MsdParams masses_;
    double h_;
    int p_ = 4;
    Vector q_theta_ridged_;

    bool initialized_ = false;
    long step_count_ = 0;
    Vector vel_filt_ = Vector::Zero(2);
    Vector vel_filt_dec_ = Vector::Zero(2);
    std::deque<Slot> window_;

    Vector arrival_mean_;
    Matrix arrival_cov_;
    Vector solution_;
    Vector theta_out_;
    double d_out_ = 0.0;
    bool stalled_ = false;
    long solves_ = 0;
};

} // namespace hnnest
