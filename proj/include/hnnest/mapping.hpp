#pragma once

#include <hnnest/constraints.hpp>
#include <hnnest/numerics.hpp>

#include <Eigen/Eigenvalues>

namespace hnnest {

/// One time step's regression data: w = W θ (+ H d when the disturbance
/// channel is modelled). H has zero columns when absent.
struct RegressorSnapshot {
    Matrix W;  // q × p
    Vector w;  // q
    Matrix H;  // q × m (m = 0 when no compensation channel)
    double t = 0.0;

    int q() const { return static_cast<int>(W.rows()); }
    int p() const { return static_cast<int>(W.cols()); }
    int m() const { return static_cast<int>(H.cols()); }
};

/// Time-varying Hopfield weights and bias on the full neuron vector
/// v = [v_θ | v_d | v_s]. T is symmetric and −T is PSD with
/// λ_max(−T) ≤ 1 + η.
struct HnnMapping {
    Matrix T;
    Vector b;
    double eta = 0.0;
    int p = 0;
    int m = 0;
    int n_in = 0;

    int dim() const { return p + m + n_in; }
};

namespace detail {

// P_M and M⁺rhs through one factorization of the q×q Gram, never an
// explicit pseudo-inverse.
inline void data_projector_and_bias(const Matrix& w_blk, const Vector& w_vec,
                                    Matrix& proj, Vector& bias) {
    const Matrix gram = w_blk * w_blk.transpose();
    Matrix rhs(w_blk.rows(), w_blk.cols() + 1);
    rhs.leftCols(w_blk.cols()) = w_blk;
    rhs.col(w_blk.cols()) = w_vec;
    const Matrix x = solve_spd(gram, rhs);
    proj = w_blk.transpose() * x.leftCols(w_blk.cols());
    proj = 0.5 * (proj + proj.transpose());
    bias = w_blk.transpose() * x.col(w_blk.cols());
}

} // namespace detail

/// Constraint-aware mapping (no compensation):
///   T = blkdiag(−P_W, 0_s) − η P_A,   b = [W⁺w; 0_s] + η b_ctr.
inline HnnMapping build_mapping(const RegressorSnapshot& snap, const LiftedConstraints& lc,
                                double eta) {
    if (snap.p() != lc.p) throw DimensionError("build_mapping: parameter count mismatch");
    if (lc.m != 0) throw DimensionError("build_mapping: lifted constraints are augmented");
    if (!(eta > 0.0) && lc.r() > 0)
        throw InvalidInputError("build_mapping: eta must be positive");
    if (!all_finite(snap.W) || !all_finite(snap.w))
        throw NonFiniteError("build_mapping: non-finite snapshot");

    Matrix p_w;
    Vector w_pinv_w;
    detail::data_projector_and_bias(snap.W, snap.w, p_w, w_pinv_w);

    HnnMapping map;
    map.eta = eta;
    map.p = lc.p;
    map.m = 0;
    map.n_in = lc.n_in;
    const int n = map.dim();
    map.T = Matrix::Zero(n, n);
    map.T.topLeftCorner(lc.p, lc.p) = -p_w;
    map.b = Vector::Zero(n);
    map.b.head(lc.p) = w_pinv_w;
    if (lc.r() > 0) {
        map.T -= eta * lc.P_A;
        map.b += eta * lc.b_ctr;
    }
    return map;
}

/// Compensation-augmented mapping on v = [v_θ | v_d | v_s]:
///   T = blkdiag(−P_WH, 0_s) + η T_ctr,   b = [[W H]⁺w; 0_s] + η b_ctr.
inline HnnMapping build_augmented_mapping(const RegressorSnapshot& snap,
                                          const LiftedConstraints& lc_aug, double eta) {
    if (snap.m() == 0) throw DimensionError("build_augmented_mapping: snapshot has no H");
    if (snap.p() != lc_aug.p || snap.m() != lc_aug.m)
        throw DimensionError("build_augmented_mapping: block sizes mismatch");
    if (!all_finite(snap.W) || !all_finite(snap.w) || !all_finite(snap.H))
        throw NonFiniteError("build_augmented_mapping: non-finite snapshot");

    Matrix w_aug(snap.q(), snap.p() + snap.m());
    w_aug.leftCols(snap.p()) = snap.W;
    w_aug.rightCols(snap.m()) = snap.H;

    Matrix p_wh;
    Vector bias;
    detail::data_projector_and_bias(w_aug, snap.w, p_wh, bias);

    HnnMapping map;
    map.eta = eta;
    map.p = lc_aug.p;
    map.m = lc_aug.m;
    map.n_in = lc_aug.n_in;
    const int n = map.dim();
    const int pm = map.p + map.m;
    map.T = Matrix::Zero(n, n);
    map.T.topLeftCorner(pm, pm) = -p_wh;
    map.b = Vector::Zero(n);
    map.b.head(pm) = bias;
    if (lc_aug.r() > 0) {
        map.T -= eta * lc_aug.P_A;
        map.b += eta * lc_aug.b_ctr;
    }
    return map;
}

/// Plain least-squares mapping T = −WᵀW, b = Wᵀw (no constraints, no
/// projectors). Kept for the standard-HNN comparison runs.
inline HnnMapping build_ls_mapping(const RegressorSnapshot& snap) {
    if (!all_finite(snap.W) || !all_finite(snap.w))
        throw NonFiniteError("build_ls_mapping: non-finite snapshot");
    HnnMapping map;
    map.eta = 0.0;
    map.p = snap.p();
    map.m = 0;
    map.n_in = 0;
    map.T = -snap.W.transpose() * snap.W;
    map.b = snap.W.transpose() * snap.w;
    return map;
}

/// Instantaneous fixed point v* with T v* + b = 0. Defined only under joint
/// identifiability of the full neuron vector (−T positive definite);
/// diagnostics-only.
inline Vector instantaneous_target(const HnnMapping& map) {
    const Matrix minus_t = -map.T;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(minus_t, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success || eig.eigenvalues()(0) < 1e-10)
        throw NotIdentifiableError("instantaneous_target: -T is not positive definite");
    return solve_spd(minus_t, map.b);
}

/// Quadratic Hopfield energy E(v) = −½ vᵀTv − vᵀb + ½‖b‖².
inline double mapping_energy(const HnnMapping& map, const Vector& v) {
    if (v.size() != map.dim()) throw DimensionError("mapping_energy: dimension mismatch");
    return -0.5 * v.dot(map.T * v) - v.dot(map.b) + 0.5 * map.b.squaredNorm();
}

/// ∇E(v) = −Tv − b.
inline Vector mapping_energy_gradient(const HnnMapping& map, const Vector& v) {
    return -(map.T * v) - map.b;
}

} // namespace hnnest
