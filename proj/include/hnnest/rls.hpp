#pragma once

#include <hnnest/constraints.hpp>
#include <hnnest/mapping.hpp>
#include <hnnest/numerics.hpp>

namespace hnnest {

/// Covariance grew beyond any useful range (forgetting w/o excitation).
class CovarianceBlowupError : public Error {
public:
    using Error::Error;
};

struct RlsConfig {
    double lambda = 0.995;  // forgetting factor
    double p0 = 1e6;        // initial covariance scale, P(0) = p0·I
};

/// Projection-based exponentially-weighted RLS: block update over the q
/// snapshot rows (matrix-inversion-lemma form with a q×q innovation), then
/// an elementwise clamp of θ onto the box.
class PbRls {
public:
    PbRls(const RlsConfig& cfg, const Vector& theta0, const BoxConstraints& box)
        : lambda_(cfg.lambda), box_(box), theta_(theta0) {
        if (!(cfg.lambda > 0.0) || cfg.lambda > 1.0)
            throw InvalidInputError("PbRls: forgetting factor must be in (0, 1]");
        const int p = static_cast<int>(theta0.size());
        p_cov_ = cfg.p0 * Matrix::Identity(p, p);
        p0_norm_ = p_cov_.norm();
        clamp();
    }

    void step(const RegressorSnapshot& snap) {
        const Matrix& w = snap.W;
        const int q = snap.q();
        Matrix s = lambda_ * Matrix::Identity(q, q) + w * p_cov_ * w.transpose();
        Matrix gain = p_cov_ * w.transpose() * solve_spd(0.5 * (s + s.transpose()),
                                                         Matrix::Identity(q, q));
        theta_ += gain * (snap.w - w * theta_);
        p_cov_ = (p_cov_ - gain * w * p_cov_) / lambda_;
        p_cov_ = 0.5 * (p_cov_ + p_cov_.transpose());
        if (!all_finite(theta_) || !all_finite(p_cov_))
            throw NonFiniteError("PbRls: update diverged");
        if (p_cov_.norm() > 1e12 * p0_norm_)
            throw CovarianceBlowupError("PbRls: covariance blowup");
        clamp();
    }

    const Vector& theta() const { return theta_; }
    const Matrix& covariance() const { return p_cov_; }

private:
    void clamp() {
        theta_ = theta_.cwiseMax(box_.lower).cwiseMin(box_.upper);
    }

    double lambda_;
    BoxConstraints box_;
    Vector theta_;
    Matrix p_cov_;
    double p0_norm_ = 0.0;
};

} // namespace hnnest
