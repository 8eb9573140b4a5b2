#pragma once

#include <hnnest/constraints.hpp>
#include <hnnest/hnn.hpp>
#include <hnnest/mapping.hpp>
#include <hnnest/numerics.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <string>

namespace hnnest {

/// Requested curvature is zero/negative; rate and radius are undefined.
class ZeroCurvatureError : public Error {
public:
    using Error::Error;
};

/// Contraction / tuning constants of one run or probe window.
/// gamma_star = (alpha*beta/2)*delta*c_star; rho is the ultimate radius.
struct StabilityReport {
    double c_star = 0.0;
    double gamma_star = 0.0;
    double rho = 0.0;
    double lambda_max = 0.0;   // sup λ_max(P_W + η P_{A,θ})
    double h_max = 0.0;        // 2.5 / (αβ f̄' λ_max)
    double delta = 0.75;
    bool delta_verified = true;  // false once |v_θ,i| exceeded α/2 in the run
    double p_map = 0.0;
    double p_dist = 0.0;
    double p_drift = 0.0;
    // measured ingredients behind the budgets
    double l_map = 0.0;
    double l_d = 0.0;
    double l_theta_dot = 0.0;
    double h_star = 0.0;
    double l_tdot = 0.0;  // sup ‖Ṫ‖_F (finite differences)
    double l_bdot = 0.0;
    double l_b = 0.0;
};

/// c = λ_min(P_W + η P_{A,θ}); positive iff rank([W; A_θ]) = p.
inline double curvature(const Matrix& p_w, const Matrix& p_a_theta, double eta) {
    if (p_w.rows() != p_a_theta.rows() || p_w.cols() != p_a_theta.cols())
        throw DimensionError("curvature: projector sizes differ");
    Matrix sum = p_w + eta * p_a_theta;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sum, Eigen::EigenvaluesOnly);
    return std::max(0.0, eig.eigenvalues()(0));
}

inline double curvature_lambda_max(const Matrix& p_w, const Matrix& p_a_theta, double eta) {
    Matrix sum = p_w + eta * p_a_theta;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sum, Eigen::EigenvaluesOnly);
    return eig.eigenvalues()(eig.eigenvalues().size() - 1);
}

/// GUUB rate and radius from curvature and perturbation budgets:
/// γ* = κδc*, ρ = sqrt((P_map + P_dist + P_drift)/γ*).
inline StabilityReport guub_bounds(double c_star, const GainConfig& gains, double p_map,
                                   double p_dist, double p_drift, double delta = 0.75) {
    if (!(c_star > 0.0)) throw ZeroCurvatureError("guub_bounds: c_star must be positive");
    StabilityReport rep;
    rep.c_star = c_star;
    rep.delta = delta;
    rep.gamma_star = gains.kappa() * delta * c_star;
    rep.p_map = p_map;
    rep.p_dist = p_dist;
    rep.p_drift = p_drift;
    rep.rho = std::sqrt((p_map + p_dist + p_drift) / rep.gamma_star);
    return rep;
}

/// β from a target closed-loop bandwidth: β = 2 γ_des / (α δ c*).
inline double select_beta(double gamma_des, double alpha, double delta, double c_star) {
    if (!(gamma_des > 0) || !(alpha > 0) || !(delta > 0))
        throw InvalidInputError("select_beta: inputs must be positive");
    if (!(c_star > 0)) throw ZeroCurvatureError("select_beta: c_star must be positive");
    return 2.0 * gamma_des / (alpha * delta * c_star);
}

/// Frequency-domain variant: smallest β with steady error ratio ≤ ε at the
/// largest excitation frequency, β ≥ (2/(αδ))·(ω_max/ε)·sqrt(1−ε²)/c*.
inline double select_beta_for_error_ratio(double omega_max, double eps, double alpha,
                                          double delta, double c_star) {
    if (!(eps > 0.0) || eps > 1.0)
        throw InvalidInputError("select_beta_for_error_ratio: eps must be in (0, 1]");
    if (!(c_star > 0)) throw ZeroCurvatureError("select_beta_for_error_ratio: zero curvature");
    return (2.0 / (alpha * delta)) * (omega_max / eps) * std::sqrt(1.0 - eps * eps) / c_star;
}

/// RK4 step bound h ≲ 2.5 / (αβ f̄' λ_max(P_W + ηP_{A,θ})).
inline double max_step(const GainConfig& gains, double lambda_max, double fprime_bar = 1.0) {
    if (!(lambda_max > 0) || !(fprime_bar > 0))
        throw InvalidInputError("max_step: inputs must be positive");
    return 2.5 / (gains.alpha * gains.beta * fprime_bar * lambda_max);
}

struct EtaSelection {
    double eta = 1.0;
    bool curvature_met = false;
    bool step_ok = false;
    double c_star = 0.0;
    double h_bound = 0.0;  // ζ·2.5/(αβ f̄'(1+η)) at the returned η
    std::string note;
};

/// η-doubling rule: start at 1, double while curvature is short of τ_c and
/// the RK4 step keeps its ζ margin. Advisory (never throws): when the step
/// constraint binds first, the last feasible η is returned with a note.
inline EtaSelection select_eta(const std::function<double(double)>& c_star_of_eta, double tau_c,
                               double zeta, const GainConfig& gains, double fprime_bar = 1.0) {
    if (!(tau_c > 0) || !(zeta > 0) || zeta >= 1.0)
        throw InvalidInputError("select_eta: need tau_c > 0 and zeta in (0,1)");
    auto h_bound = [&](double eta) {
        return zeta * 2.5 / (gains.alpha * gains.beta * fprime_bar * (1.0 + eta));
    };
    EtaSelection sel;
    sel.eta = 1.0;
    for (int iter = 0; iter < 64; ++iter) {
        sel.c_star = c_star_of_eta(sel.eta);
        sel.h_bound = h_bound(sel.eta);
        sel.curvature_met = sel.c_star >= tau_c;
        sel.step_ok = gains.h <= sel.h_bound;
        if (sel.curvature_met && sel.step_ok) {
            sel.note = "ok";
            return sel;
        }
        if (!sel.step_ok) {
            // step constraint binds: back off to the last feasible η
            if (sel.eta > 1.0) {
                sel.eta /= 2.0;
                sel.c_star = c_star_of_eta(sel.eta);
                sel.h_bound = h_bound(sel.eta);
                sel.curvature_met = sel.c_star >= tau_c;
                sel.step_ok = gains.h <= sel.h_bound;
            }
            sel.note = "step constraint binds; reduce h (or beta) and recheck";
            return sel;
        }
        sel.eta *= 2.0;
    }
    sel.note = "curvature target unreachable; reduce tau_c or improve excitation";
    return sel;
}

struct TrackerResponse {
    double estimate_gain = 0.0;  // κ/√(κ²+ω²)
    double error_gain = 0.0;     // ω/√(κ²+ω²)
};

/// Scalar tracker frequency response; the two gains are the low-pass and
/// high-pass magnitudes and their squares sum to one.
inline TrackerResponse scalar_tracker_response(double kappa, double omega) {
    if (!(kappa > 0) || omega < 0)
        throw InvalidInputError("scalar_tracker_response: kappa > 0, omega >= 0");
    const double den = std::sqrt(kappa * kappa + omega * omega);
    return TrackerResponse{kappa / den, omega / den};
}

/// Per-run accumulator: samples curvature/stiffness on a decimated grid,
/// measures the mapping-variation budget by finite differences of a stacked
/// least-squares target, and tracks the Assumption-4 saturation margin.
class StabilityAccumulator {
public:
    /// sample_every: curvature/target sampling decimation (plant steps).
    /// stack_depth: snapshots stacked for the finite-difference target.
    explicit StabilityAccumulator(int sample_every = 100, int stack_depth = 4)
        : sample_every_(std::max(1, sample_every)), stack_depth_(std::max(1, stack_depth)) {}

    void set_disturbance_power(double l_d) { l_d_ = l_d; }
    void set_drift_rate(double l_theta_dot) { l_theta_dot_ = l_theta_dot; }
    void set_h_star(double h_star) { h_star_ = h_star; }

    void observe(long step, const RegressorSnapshot& snap, const LiftedConstraints& lc,
                 double eta) {
        window_.push_back(snap);
        if (static_cast<int>(window_.size()) > stack_depth_) window_.pop_front();
        if (step % sample_every_ != 0) return;

        Matrix p_w = projector(snap.W);
        Matrix p_a = lc.P_A_theta;
        if (p_a.rows() != p_w.rows()) {
            // augmented P_{A,θ} is blkdiag(P_{A,θ}, 0); sizes match only when
            // the caller passes matched blocks, so guard with zero padding
            Matrix padded = Matrix::Zero(p_w.rows(), p_w.cols());
            const int k = static_cast<int>(std::min(p_a.rows(), p_w.rows()));
            padded.topLeftCorner(k, k) = p_a.topLeftCorner(k, k);
            p_a = padded;
        }
        const double c = curvature(p_w, p_a, eta);
        c_star_ = samples_ == 0 ? c : std::min(c_star_, c);
        const double lmax = curvature_lambda_max(p_w, p_a, eta);
        lambda_max_ = std::max(lambda_max_, lmax);
        ++samples_;

        // stacked target and mapping finite differences
        if (static_cast<int>(window_.size()) == stack_depth_) {
            Matrix w_s(0, snap.W.cols());
            Vector b_s(0);
            for (const auto& s : window_) {
                Matrix w2(w_s.rows() + s.W.rows(), snap.W.cols());
                w2 << w_s, s.W;
                w_s = std::move(w2);
                Vector b2(b_s.size() + s.w.size());
                b2 << b_s, s.w;
                b_s = std::move(b2);
            }
            if (min_singular_value(w_s) > 1e-6) {
                Vector target = solve_spd(Matrix(w_s.transpose() * w_s), Vector(w_s.transpose() * b_s));
                const double t_now = snap.t;
                if (have_target_) {
                    const double dt = t_now - last_target_time_;
                    if (dt > 0)
                        l_map_ = std::max(l_map_, (target - last_target_).norm() / dt);
                }
                last_target_ = target;
                last_target_time_ = t_now;
                have_target_ = true;
            }
        }
    }

    /// Mapping Lipschitz surrogates ‖Ṫ‖, ‖ḃ‖, ‖b‖ from consecutive samples.
    void observe_mapping(const HnnMapping& map, double t) {
        l_b_ = std::max(l_b_, map.b.norm());
        if (have_map_) {
            const double dt = t - last_map_time_;
            if (dt > 0) {
                l_tdot_ = std::max(l_tdot_, (map.T - last_t_).norm() / dt);
                l_bdot_ = std::max(l_bdot_, (map.b - last_b_).norm() / dt);
            }
        }
        last_t_ = map.T;
        last_b_ = map.b;
        last_map_time_ = t;
        have_map_ = true;
    }

    void observe_outputs(const Vector& v_theta, double alpha) {
        saturation_margin_ = std::max(saturation_margin_, v_theta.cwiseAbs().maxCoeff() / alpha);
    }

    double c_star() const { return samples_ ? c_star_ : 0.0; }
    double lambda_max() const { return lambda_max_; }
    double l_map() const { return l_map_; }
    bool delta_verified() const { return saturation_margin_ <= 0.5 + 1e-12; }
    long samples() const { return samples_; }

    StabilityReport report(const GainConfig& gains, double delta = 0.75,
                           double fprime_bar = 1.0) const {
        StabilityReport rep = guub_bounds(c_star(), gains, 0.0, 0.0, 0.0, delta);
        const double g = rep.gamma_star;
        rep.l_map = l_map_;
        rep.l_d = l_d_;
        rep.l_theta_dot = l_theta_dot_;
        rep.h_star = h_star_;
        rep.l_tdot = l_tdot_;
        rep.l_bdot = l_bdot_;
        rep.l_b = l_b_;
        rep.p_map = l_map_ * l_map_ / (4.0 * g);
        const double kappa = gains.kappa();
        rep.p_dist = kappa * kappa * h_star_ * h_star_ * l_d_ / (4.0 * g);
        rep.p_drift = l_theta_dot_ * l_theta_dot_ / (4.0 * g);
        rep.rho = std::sqrt((rep.p_map + rep.p_dist + rep.p_drift) / g);
        rep.lambda_max = lambda_max_;
        rep.h_max = lambda_max_ > 0 ? max_step(gains, lambda_max_, fprime_bar) : 0.0;
        rep.delta_verified = delta_verified();
        return rep;
    }

private:
    int sample_every_;
    int stack_depth_;
    std::deque<RegressorSnapshot> window_;
    long samples_ = 0;
    double c_star_ = 0.0;
    double lambda_max_ = 0.0;
    double l_map_ = 0.0;
    double l_d_ = 0.0;
    double l_theta_dot_ = 0.0;
    double h_star_ = 0.0;
    double l_tdot_ = 0.0, l_bdot_ = 0.0, l_b_ = 0.0;
    bool have_target_ = false;
    Vector last_target_;
    double last_target_time_ = 0.0;
    bool have_map_ = false;
    Matrix last_t_;
    Vector last_b_;
    double last_map_time_ = 0.0;
    double saturation_margin_ = 0.0;
};

} // namespace hnnest
