#pragma once

#include <hnnest/mapping.hpp>
#include <hnnest/numerics.hpp>
#include <hnnest/rng.hpp>

#include <cmath>
#include <complex>
#include <vector>

namespace hnnest {

/// Physical parameters of the 2-DOF mass–spring–damper. The masses are
/// known; (k1, b1, k2, b2) are the quantities the estimators identify.
struct MsdParams {
    double m1 = 1.0;
    double m2 = 1.0;
    double k1 = 1.0;
    double b1 = 0.15;
    double k2 = 0.5;
    double b2 = 0.25;

    Vector theta() const {
        Vector t(4);
        t << k1, b1, k2, b2;
        return t;
    }
};

/// Plant state x = [x1, x2, x1', x2'] plus the previous-step velocities for
/// backward-difference accelerations.
struct PlantState {
    Vector x = Vector::Zero(4);
    double t = 0.0;
    Vector prev_vel = Vector::Zero(2);
};

struct DisturbanceSpec {
    enum class Kind { none, gaussian };
    Kind kind = Kind::none;
    double mu = 0.0;
    double sigma2 = 0.0;
};

struct ParameterSchedule {
    enum class Kind { constant, cosine };
    Kind kind = Kind::constant;
    double omega = 0.05;  // rad/s, cosine mode
};

/// x' = A_c x + B_c f + H_c d with
///   A_c = [0 0 1 0; 0 0 0 1;
///          -k1/m1  k1/m1  -b1/m1  b1/m1;
///           k1/m2 -(k1+k2)/m2  b1/m2 -(b1+b2)/m2]
inline Vector msd_dynamics(const Vector& x, double f, double d, const MsdParams& p) {
    Vector dx(4);
    dx(0) = x(2);
    dx(1) = x(3);
    dx(2) = (-p.k1 * (x(0) - x(1)) - p.b1 * (x(2) - x(3)) + f) / p.m1;
    dx(3) = (p.k1 * (x(0) - x(1)) + p.b1 * (x(2) - x(3)) - p.k2 * x(1) - p.b2 * x(3) + d) / p.m2;
    return dx;
}

/// One fixed-step RK4 plant step with f, d held constant over the step.
inline PlantState simulate_step(const PlantState& state, double f, double d,
                                const MsdParams& params, double h) {
    PlantState next;
    next.prev_vel = state.x.tail(2);
    auto rhs = [&](double, const Vector& x) { return msd_dynamics(x, f, d, params); };
    next.x = rk4_step(rhs, state.x, state.t, h);
    next.t = state.t + h;
    if (!all_finite(next.x)) throw NonFiniteError("simulate_step: plant state diverged");
    return next;
}

/// Excitation force f(t) = 1 + sin(t)cos(2t) + cos(3t) + sin(0.5t).
inline double input_signal(double t) {
    return 1.0 + std::sin(t) * std::cos(2.0 * t) + std::cos(3.0 * t) + std::sin(0.5 * t);
}

inline double sample_disturbance(const DisturbanceSpec& spec, Rng& rng) {
    if (spec.kind == DisturbanceSpec::Kind::none) return 0.0;
    return spec.mu + std::sqrt(spec.sigma2) * rng.normal();
}

/// k1(t): the constant truth, or the drifting profile 1 − 0.6 cos(ωt).
inline double k1_schedule(const ParameterSchedule& sched, double t, double k1_star = 1.0) {
    if (sched.kind == ParameterSchedule::Kind::constant) return k1_star;
    return 1.0 - 0.6 * std::cos(sched.omega * t);
}

/// Regression snapshot at the newer state: signals at time k, accelerations
/// as backward differences of the velocities over the step. The estimator
/// never sees d, so w = [m1 a1 − f, m2 a2]; with_h appends the disturbance
/// channel column H = [0, 1]ᵀ.
inline RegressorSnapshot build_regression(const PlantState& before, const PlantState& after,
                                          double f, double h, const MsdParams& params,
                                          bool with_h = false) {
    const Vector& x = after.x;
    const double a1 = (x(2) - before.x(2)) / h;
    const double a2 = (x(3) - before.x(3)) / h;

    RegressorSnapshot snap;
    snap.t = after.t;
    snap.W = Matrix(2, 4);
    snap.W << x(1) - x(0), -x(2) + x(3), 0.0, 0.0,
              -x(1) + x(0), -x(3) + x(2), -x(1), -x(3);
    snap.w = Vector(2);
    snap.w << params.m1 * a1 - f, params.m2 * a2;
    if (with_h) {
        snap.H = Matrix(2, 1);
        snap.H << 0.0, 1.0;
    } else {
        snap.H = Matrix::Zero(2, 0);
    }
    return snap;
}

struct BodePoint {
    double omega = 0.0;
    double magnitude = 0.0;
    double phase_deg = 0.0;
};

/// Frequency response of the d → x2 channel: G(jω) = e₂ᵀ(jωI − A_c)⁻¹ H_c,
/// evaluated by a complex solve per frequency.
inline std::vector<BodePoint> bode_d_to_x2(const MsdParams& p, const std::vector<double>& omegas) {
    Eigen::Matrix4d a;
    a << 0, 0, 1, 0,
         0, 0, 0, 1,
         -p.k1 / p.m1, p.k1 / p.m1, -p.b1 / p.m1, p.b1 / p.m1,
         p.k1 / p.m2, -(p.k1 + p.k2) / p.m2, p.b1 / p.m2, -(p.b1 + p.b2) / p.m2;
    Eigen::Vector4d h_c(0, 0, 0, 1.0 / p.m2);

    std::vector<BodePoint> out;
    out.reserve(omegas.size());
    for (double w : omegas) {
        Eigen::Matrix4cd lhs = std::complex<double>(0, w) * Eigen::Matrix4cd::Identity();
        lhs -= a.cast<std::complex<double>>();
        Eigen::Vector4cd x = lhs.partialPivLu().solve(h_c.cast<std::complex<double>>());
        BodePoint pt;
        pt.omega = w;
        pt.magnitude = std::abs(x(1));
        pt.phase_deg = std::arg(x(1)) * 180.0 / M_PI;
        out.push_back(pt);
    }
    return out;
}

} // namespace hnnest
