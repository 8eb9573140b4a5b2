#pragma once

#include <hnnest/mapping.hpp>
#include <hnnest/numerics.hpp>

#include <cmath>

namespace hnnest {

enum class Integrator { rk4, euler };

/// The three design gains plus the integration step.
/// κ = αβ/2 is the scalar tracker bandwidth.
struct GainConfig {
    double alpha = 10.0;  // output scaling, v ∈ (−α, α)
    double beta = 250.0;  // neuron gain
    double eta = 50.0;    // constraint weight
    double h = 1e-5;      // integration step [s]
    Integrator integrator = Integrator::rk4;

    double kappa() const { return 0.5 * alpha * beta; }
};

/// Activation saturated beyond its open range (−α, α).
class SaturationError : public Error {
public:
    using Error::Error;
};

/// v = α tanh(β u / 2), elementwise.
inline Vector activation(const Vector& u, double alpha, double beta) {
    return alpha * (0.5 * beta * u.array()).tanh();
}

/// u = (2/β) atanh(v/α), with |v/α| clamped to 1 − 1e-12 so a feasible
/// pre-activation always exists.
inline Vector activation_inverse(const Vector& v, double alpha, double beta) {
    Vector u(v.size());
    for (int i = 0; i < v.size(); ++i) {
        double x = v(i) / alpha;
        const double lim = 1.0 - 1e-12;
        if (x > lim) x = lim;
        if (x < -lim) x = -lim;
        u(i) = (2.0 / beta) * std::atanh(x);
    }
    return u;
}

/// Diagonal tanh slope matrix D = diag(1 − (vᵢ/α)²), entries in (0, 1].
inline Matrix slope_matrix(const Vector& v, double alpha) {
    Matrix d = Matrix::Zero(v.size(), v.size());
    for (int i = 0; i < v.size(); ++i) {
        const double x = v(i) / alpha;
        if (std::abs(x) >= 1.0)
            throw SaturationError("slope_matrix: output at or beyond activation range");
        d(i, i) = 1.0 - x * x;
    }
    return d;
}

/// Neuron pre-activations and outputs, layout [v_θ | v_d | v_s].
struct HnnState {
    Vector u;
    Vector v;

    static HnnState from_outputs(const Vector& v0, const GainConfig& gains) {
        HnnState s;
        s.u = activation_inverse(v0, gains.alpha, gains.beta);
        s.v = activation(s.u, gains.alpha, gains.beta);
        return s;
    }
};

/// Reusable stage buffers so the per-step integration stays allocation-free
/// inside long runs.
struct HnnWorkspace {
    Vector k1, k2, k3, k4, u_stage, v_stage;

    void resize(Eigen::Index n) {
        k1.resize(n);
        k2.resize(n);
        k3.resize(n);
        k4.resize(n);
        u_stage.resize(n);
        v_stage.resize(n);
    }
};

/// Advance the neuron dynamics one step with (T, b) held constant.
/// rk4: classical RK4 on u̇ = T v(u) + b, re-evaluating v(u) per stage.
/// euler: the literal one-step update u⁺ = u + h(Tv + b).
inline void hnn_step(HnnState& state, const HnnMapping& map, const GainConfig& gains,
                     HnnWorkspace& ws) {
    const Eigen::Index n = map.dim();
    if (state.u.size() != n)
        throw DimensionError("hnn_step: state/mapping dimension mismatch");
    const double h = gains.h;
    if (gains.integrator == Integrator::euler) {
        ws.resize(n);
        ws.k1.noalias() = map.T * state.v;
        ws.k1 += map.b;
        state.u += h * ws.k1;
    } else {
        ws.resize(n);
        const double half_beta = 0.5 * gains.beta;
        auto stage = [&](const Vector& u, Vector& k) {
            ws.v_stage = gains.alpha * (half_beta * u.array()).tanh();
            k.noalias() = map.T * ws.v_stage;
            k += map.b;
        };
        stage(state.u, ws.k1);
        ws.u_stage = state.u + (0.5 * h) * ws.k1;
        stage(ws.u_stage, ws.k2);
        ws.u_stage = state.u + (0.5 * h) * ws.k2;
        stage(ws.u_stage, ws.k3);
        ws.u_stage = state.u + h * ws.k3;
        stage(ws.u_stage, ws.k4);
        state.u += (h / 6.0) * (ws.k1 + 2.0 * ws.k2 + 2.0 * ws.k3 + ws.k4);
    }
    if (!all_finite(state.u)) throw NonFiniteError("hnn_step: non-finite update");
    state.v = activation(state.u, gains.alpha, gains.beta);
}

inline HnnState hnn_step(const HnnState& state, const HnnMapping& map, const GainConfig& gains) {
    HnnState next = state;
    HnnWorkspace ws;
    hnn_step(next, map, gains, ws);
    return next;
}

/// Hopfield energy of the current outputs under a mapping.
inline double energy(const Vector& v, const HnnMapping& map) { return mapping_energy(map, v); }

} // namespace hnnest
