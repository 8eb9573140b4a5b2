#pragma once

#include <hnnest/constraints.hpp>
#include <hnnest/mapping.hpp>
#include <hnnest/numerics.hpp>

namespace hnnest {

struct KfConfig {
    Vector q_theta;           // per-parameter random-walk variance (empty = 1e-8 each)
    double q_d = 1e12;        // disturbance-state variance per step
    double r = 1e12;          // measurement variance, R = r·I_q
    double p0_theta = 1e6;    // diffuse parameter prior
    double p0_d = 1e12;       // disturbance prior
};

/// Disturbance-augmented projection-based Kalman filter on z = [θ; d] with
/// measurement w(k) = [W(k) | h_d] z + noise and a box clamp on the θ-block
/// after every update; the d-state is unconstrained.
class DaPbKf {
public:
    DaPbKf(const KfConfig& cfg, const Vector& theta0, const BoxConstraints& box)
        : cfg_(cfg), box_(box) {
        const int p = static_cast<int>(theta0.size());
        z_ = Vector::Zero(p + 1);
        z_.head(p) = theta0;
        p_cov_ = Matrix::Zero(p + 1, p + 1);
        p_cov_.topLeftCorner(p, p) = cfg.p0_theta * Matrix::Identity(p, p);
        p_cov_(p, p) = cfg.p0_d;
        q_ = Matrix::Zero(p + 1, p + 1);
        if (cfg.q_theta.size() == 0)
            q_.topLeftCorner(p, p) = 1e-8 * Matrix::Identity(p, p);
        else if (cfg.q_theta.size() == p)
            q_.topLeftCorner(p, p) = cfg.q_theta.asDiagonal();
        else
            throw DimensionError("DaPbKf: q_theta length mismatch");
        q_(p, p) = cfg.q_d;
        clamp();
    }

    void step(const RegressorSnapshot& snap) {
        const int p = static_cast<int>(z_.size()) - 1;
        const int q_rows = snap.q();
        // predict: random-walk θ and d
        p_cov_ += q_;

        Matrix h(q_rows, p + 1);
        h.leftCols(p) = snap.W;
        if (snap.m() == 1)
            h.rightCols(1) = snap.H;
        else if (snap.m() == 0) {
            h.rightCols(1).setZero();
            h(q_rows - 1, p) = 1.0;  // default channel: d enters the last row
        } else {
            throw DimensionError("DaPbKf: expected a scalar disturbance channel");
        }

        Matrix s = h * p_cov_ * h.transpose() + cfg_.r * Matrix::Identity(q_rows, q_rows);
        Vector innovation = snap.w - h * z_;
        if (!all_finite(innovation))
            throw NonFiniteError("DaPbKf: non-finite innovation");
        Matrix gain = p_cov_ * h.transpose() *
                      solve_spd(0.5 * (s + s.transpose()), Matrix::Identity(q_rows, q_rows));
        z_ += gain * innovation;
        p_cov_ = (Matrix::Identity(p + 1, p + 1) - gain * h) * p_cov_;
        p_cov_ = 0.5 * (p_cov_ + p_cov_.transpose());
        if (!all_finite(z_)) throw NonFiniteError("DaPbKf: state diverged");
        clamp();
    }

    Vector theta() const { return z_.head(z_.size() - 1); }
    double d_hat() const { return z_(z_.size() - 1); }
    const Matrix& covariance() const { return p_cov_; }

private:
    void clamp() {
        const int p = static_cast<int>(z_.size()) - 1;
        z_.head(p) = z_.head(p).cwiseMax(box_.lower).cwiseMin(box_.upper);
    }

    KfConfig cfg_;
    BoxConstraints box_;
    Vector z_;
    Matrix p_cov_;
    Matrix q_;
};

} // namespace hnnest
