#pragma once

#include <hnnest/hnn.hpp>
#include <hnnest/numerics.hpp>
#include <hnnest/stability.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace hnnest {

enum class Regime { nominal, soft, hard };

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::nominal: return "nominal";
        case Regime::soft: return "soft";
        default: return "hard";
    }
}

struct MonitorConfig {
    bool enabled = false;
    double tau_warn = 1e-2;
    double tau_freeze = 1e-3;
    double leak = 1e-3;             // per-step leakage toward the anchor (hard regime)
    double eta_cap_factor = 10.0;   // η_cap = factor · η₀
    double eta_decay_per_second = 0.5;  // geometric decay toward η₀ once nominal
    double zeta = 0.6;              // RK4 margin kept when boosting η
    double anchor_dwell = 1.0;      // continuous nominal seconds before anchor updates
};

struct MonitorStatus {
    double score = 0.0;
    Regime regime = Regime::nominal;
    Matrix blind_basis;  // p × k orthonormal columns; empty unless hard
    double eta_effective = 0.0;
    Vector anchor;       // last well-identified parameter estimate
};

/// Whitened stack [W_n; √η A_n]: both blocks row-normalised, constraint rows
/// weighted by √η. Zero rows are kept as zeros (they contribute nothing).
inline Matrix whitened_stack(const Matrix& w, const Matrix& a_theta, double eta) {
    const int p = static_cast<int>(w.cols());
    if (a_theta.rows() > 0 && a_theta.cols() != p)
        throw DimensionError("whitened_stack: column mismatch");
    Matrix stack(w.rows() + a_theta.rows(), p);
    for (int i = 0; i < w.rows(); ++i) {
        const double n = w.row(i).norm();
        stack.row(i) = w.row(i);
        if (n > 1e-300) stack.row(i) /= n;
    }
    const double root_eta = std::sqrt(std::max(eta, 0.0));
    for (int i = 0; i < a_theta.rows(); ++i) {
        const double n = a_theta.row(i).norm();
        stack.row(w.rows() + i) = a_theta.row(i);
        if (n > 1e-300) stack.row(w.rows() + i) *= root_eta / n;
    }
    return stack;
}

/// Scale-invariant excitation score: smallest singular value (as an operator
/// on parameter space) of the whitened stack.
inline double identifiability_score(const Matrix& w, const Matrix& a_theta, double eta) {
    Matrix stack = whitened_stack(w, a_theta, eta);
    if (stack.rows() == 0) return 0.0;
    return min_singular_value(stack);
}

inline Regime classify(double score, double tau_warn, double tau_freeze) {
    if (!(tau_freeze > 0.0) || !(tau_freeze < tau_warn))
        throw InvalidInputError("classify: need 0 < tau_freeze < tau_warn");
    if (score >= tau_warn) return Regime::nominal;
    if (score >= tau_freeze) return Regime::soft;
    return Regime::hard;
}

/// Soft-regime gain adjustment: double η (capped) and shrink β whenever the
/// RK4 margin h ≤ ζ·2.5/(αβ(1+η)) would otherwise be lost.
inline GainConfig soft_boost(const GainConfig& gains, const MonitorConfig& cfg, double eta_cap) {
    GainConfig g = gains;
    g.eta = std::min(2.0 * gains.eta, eta_cap);
    const double h_bound = cfg.zeta * 2.5 / (g.alpha * g.beta * (1.0 + g.eta));
    if (g.h > h_bound) g.beta = cfg.zeta * 2.5 / (g.alpha * g.h * (1.0 + g.eta));
    return g;
}

/// Mitigation on a parameter-block update. All vectors live in the caller's
/// update space. nominal: identity. soft: gains boosted, update untouched.
/// hard: du is projected off the blind subspace with a small leak toward
/// the anchor.
inline std::pair<Vector, GainConfig> mitigate(const Vector& du, const Vector& current,
                                              const MonitorStatus& status,
                                              const GainConfig& gains, const MonitorConfig& cfg,
                                              double eta_cap) {
    switch (status.regime) {
        case Regime::nominal:
            return {du, gains};
        case Regime::soft:
            return {du, soft_boost(gains, cfg, eta_cap)};
        case Regime::hard:
        default: {
            if (status.blind_basis.cols() == 0) return {du, gains};
            const Matrix& b = status.blind_basis;
            Vector du_out = du - b * (b.transpose() * du);
            if (status.anchor.size() == current.size())
                du_out += cfg.leak * (b * (b.transpose() * (status.anchor - current)));
            return {du_out, gains};
        }
    }
}

/// Stateful per-trial monitor: scores each step, adapts η (boost in soft,
/// geometric decay back to η₀ once nominal), manages the anchor and the
/// blind basis (recomputed on hard entry, reused while hard persists).
class IdentifiabilityMonitor {
public:
    IdentifiabilityMonitor(const MonitorConfig& cfg, const GainConfig& gains)
        : cfg_(cfg), base_(gains), eff_(gains), eta0_(gains.eta),
          eta_cap_(cfg.eta_cap_factor * gains.eta) {}

    const MonitorConfig& config() const { return cfg_; }
    double eta_effective() const { return eff_.eta; }
    double beta_effective() const { return eff_.beta; }
    const MonitorStatus& status() const { return status_; }

    /// Score the current stack and update regime, gains and anchor.
    /// v_theta is the current parameter-block output (anchor candidate).
    const MonitorStatus& update(const Matrix& w, const Matrix& a_theta, const Vector& v_theta,
                                double dt) {
        status_.score = identifiability_score(w, a_theta, eff_.eta);
        const Regime prev = status_.regime;
        status_.regime = classify(status_.score, cfg_.tau_warn, cfg_.tau_freeze);
        status_.eta_effective = eff_.eta;

        switch (status_.regime) {
            case Regime::nominal: {
                nominal_time_ += dt;
                if (nominal_time_ >= cfg_.anchor_dwell || status_.anchor.size() == 0)
                    status_.anchor = v_theta;
                // decay η back toward η₀ and restore β
                const double decay = std::pow(cfg_.eta_decay_per_second, dt);
                eff_.eta = eta0_ + (eff_.eta - eta0_) * decay;
                eff_.beta = base_.beta;
                status_.blind_basis = Matrix();
                break;
            }
            case Regime::soft: {
                nominal_time_ = 0.0;
                eff_ = soft_boost(eff_, cfg_, eta_cap_);
                status_.blind_basis = Matrix();
                break;
            }
            case Regime::hard: {
                nominal_time_ = 0.0;
                if (prev != Regime::hard || status_.blind_basis.cols() == 0)
                    status_.blind_basis = blind_basis_of(w, a_theta);
                break;
            }
        }
        status_.eta_effective = eff_.eta;
        return status_;
    }

    /// Apply the hard-regime projection to an update vector. du, current and
    /// anchor must all live in the caller's update space (the stored anchor
    /// is a v-space estimate, so integrators pass it through the inverse
    /// activation first).
    Vector mitigate_update(const Vector& du, const Vector& current, const Vector& anchor) const {
        MonitorStatus st = status_;
        st.anchor = anchor;
        return mitigate(du, current, st, eff_, cfg_, eta_cap_).first;
    }

private:
    Matrix blind_basis_of(const Matrix& w, const Matrix& a_theta) const {
        const int p = static_cast<int>(w.cols());
        Matrix stack = whitened_stack(w, a_theta, eff_.eta);
        Matrix padded = stack;
        if (stack.rows() < p) {
            padded = Matrix::Zero(p, p);
            padded.topRows(stack.rows()) = stack;
        }
        Eigen::JacobiSVD<Matrix> svd(padded, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        int k = 0;
        for (int i = 0; i < sv.size(); ++i)
            if (sv(i) < cfg_.tau_freeze) ++k;
        k = std::min(k, p - 1);  // always keep at least one identifiable direction
        if (k <= 0) return Matrix();
        return svd.matrixV().rightCols(k);
    }

    MonitorConfig cfg_;
    GainConfig base_;
    GainConfig eff_;
    double eta0_;
    double eta_cap_;
    double nominal_time_ = 0.0;
    MonitorStatus status_;
};

} // namespace hnnest
