#pragma once

#include <hnnest/numerics.hpp>

namespace hnnest {

/// Elementwise box ℓ ≤ θ ≤ u on the parameter vector.
struct BoxConstraints {
    Vector lower;
    Vector upper;

    int params() const { return static_cast<int>(lower.size()); }
};

/// Linear constraints on the parameter block: A_eq θ = a_eq, A_in θ ≤ a_in.
struct ConstraintSet {
    Matrix A_eq;  // n_eq × p
    Vector a_eq;
    Matrix A_in;  // n_in × p
    Vector a_in;

    int params() const {
        return static_cast<int>(A_eq.cols() > 0 ? A_eq.cols() : A_in.cols());
    }
    int n_eq() const { return static_cast<int>(A_eq.rows()); }
    int n_in() const { return static_cast<int>(A_in.rows()); }

    static ConstraintSet empty(int p) {
        ConstraintSet cs;
        cs.A_eq = Matrix::Zero(0, p);
        cs.a_eq = Vector::Zero(0);
        cs.A_in = Matrix::Zero(0, p);
        cs.a_in = Vector::Zero(0);
        return cs;
    }
};

/// Slack-lifted equality form A v = a on v = [v_θ | v_d | v_s] with
/// precomputed projector data. The d-block is empty until embed_augmented.
struct LiftedConstraints {
    Matrix A;          // r × dim
    Vector a;          // r
    int p = 0;         // parameter block
    int m = 0;         // compensation block (0 unless embedded)
    int n_in = 0;      // slack block
    Matrix P_A;        // dim × dim projector onto range(Aᵀ)
    Vector b_ctr;      // minimum-norm particular solution Aᵀ(AAᵀ)⁻¹a
    Matrix P_A_theta;  // (p+m) × (p+m) parameter-effective projector
    Matrix A_theta;    // r × (p+m): constraint rows restricted to (θ, d)

    int r() const { return static_cast<int>(A.rows()); }
    int dim() const { return p + m + n_in; }
};

/// Encode a box as paired inequality rows (+eᵢ | uᵢ), (−eᵢ | −ℓᵢ).
inline ConstraintSet from_box(const BoxConstraints& box) {
    const int p = box.params();
    if (box.upper.size() != p)
        throw DimensionError("from_box: lower/upper length mismatch");
    if (!all_finite(box.lower) || !all_finite(box.upper))
        throw NonFiniteError("from_box: non-finite bounds");
    if (((box.upper - box.lower).array() <= 0.0).any())
        throw InvalidInputError("from_box: lower must be strictly below upper");

    ConstraintSet cs = ConstraintSet::empty(p);
    cs.A_in = Matrix::Zero(2 * p, p);
    cs.a_in = Vector::Zero(2 * p);
    for (int i = 0; i < p; ++i) {
        cs.A_in(2 * i, i) = 1.0;
        cs.a_in(2 * i) = box.upper(i);
        cs.A_in(2 * i + 1, i) = -1.0;
        cs.a_in(2 * i + 1) = -box.lower(i);
    }
    return cs;
}

namespace detail {

inline void normalize_rows(Matrix& a, Vector& rhs) {
    for (int i = 0; i < a.rows(); ++i) {
        const double n = a.row(i).norm();
        if (n < 1e-300) throw InvalidInputError("row_normalize: zero constraint row");
        a.row(i) /= n;
        rhs(i) /= n;
    }
}

} // namespace detail

/// Scale every row of [A | a] so the A-part has unit 2-norm. The feasible
/// set is unchanged.
inline ConstraintSet row_normalize(ConstraintSet cs) {
    detail::normalize_rows(cs.A_eq, cs.a_eq);
    detail::normalize_rows(cs.A_in, cs.a_in);
    return cs;
}

/// True when θ satisfies every constraint within tol.
inline bool feasible(const ConstraintSet& cs, const Vector& theta, double tol = 1e-9) {
    if (cs.n_eq() > 0 && (cs.A_eq * theta - cs.a_eq).cwiseAbs().maxCoeff() > tol) return false;
    if (cs.n_in() > 0 && ((cs.A_in * theta - cs.a_in).array() > tol).any()) return false;
    return true;
}

/// Lift inequalities to equalities with one slack neuron per row:
///   A = [[A_eq, 0], [A_in, −I]],  a = [a_eq; a_in],
/// then precompute P_A, the minimum-norm particular solution b_ctr, and the
/// parameter-effective block P_{A,θ} = A_θᵀ(AAᵀ)⁻¹A_θ. Lifted rows are
/// re-normalised to unit norm; projector quantities are invariant to that.
inline LiftedConstraints lift(const ConstraintSet& cs) {
    const int p = cs.params();
    const int n_eq = cs.n_eq();
    const int n_in = cs.n_in();
    const int r = n_eq + n_in;
    const int dim = p + n_in;

    LiftedConstraints lc;
    lc.p = p;
    lc.m = 0;
    lc.n_in = n_in;
    lc.A = Matrix::Zero(r, dim);
    lc.a = Vector::Zero(r);
    if (n_eq > 0) {
        lc.A.topLeftCorner(n_eq, p) = cs.A_eq;
        lc.a.head(n_eq) = cs.a_eq;
    }
    if (n_in > 0) {
        lc.A.bottomLeftCorner(n_in, p) = cs.A_in;
        lc.A.bottomRightCorner(n_in, n_in) = -Matrix::Identity(n_in, n_in);
        lc.a.tail(n_in) = cs.a_in;
    }

    if (r == 0) {
        lc.P_A = Matrix::Zero(dim, dim);
        lc.b_ctr = Vector::Zero(dim);
        lc.P_A_theta = Matrix::Zero(p, p);
        lc.A_theta = Matrix::Zero(0, p);
        return lc;
    }

    detail::normalize_rows(lc.A, lc.a);

    // rank(A) must equal r; the slack block already guarantees independence
    // of the inequality rows, so this only trips on redundant equalities.
    if (min_singular_value(Matrix(lc.A.transpose())) < 1e-10)
        throw SingularMatrixError("lift: constraint rows are rank deficient");

    lc.P_A = projector(lc.A);
    const Matrix gram = lc.A * lc.A.transpose();
    lc.b_ctr = lc.A.transpose() * solve_spd(gram, lc.a);
    lc.A_theta = lc.A.leftCols(p);
    lc.P_A_theta = lc.A_theta.transpose() * solve_spd(gram, lc.A_theta);
    lc.P_A_theta = 0.5 * (lc.P_A_theta + lc.P_A_theta.transpose());
    return lc;
}

/// Insert m compensation columns between the parameter and slack blocks:
/// A_aug = [A_θ, 0_{r×m}, A_slack]. The right-hand side keeps its r rows.
/// The parameter-effective projector becomes blkdiag(P_{A,θ}, 0_m) since
/// constraints act only on v_θ.
inline LiftedConstraints embed_augmented(const LiftedConstraints& lc, int m) {
    if (m < 0) throw InvalidInputError("embed_augmented: negative block size");
    if (m == 0) return lc;
    if (lc.m != 0) throw InvalidInputError("embed_augmented: already augmented");

    LiftedConstraints out;
    out.p = lc.p;
    out.m = m;
    out.n_in = lc.n_in;
    const int r = lc.r();
    out.A = Matrix::Zero(r, lc.dim() + m);
    out.A.leftCols(lc.p) = lc.A.leftCols(lc.p);
    out.A.rightCols(lc.n_in) = lc.A.rightCols(lc.n_in);
    out.a = lc.a;

    out.A_theta = Matrix::Zero(r, lc.p + m);
    out.A_theta.leftCols(lc.p) = lc.A.leftCols(lc.p);

    out.P_A_theta = Matrix::Zero(lc.p + m, lc.p + m);
    out.P_A_theta.topLeftCorner(lc.p, lc.p) = lc.P_A_theta;

    if (r == 0) {
        out.P_A = Matrix::Zero(out.dim(), out.dim());
        out.b_ctr = Vector::Zero(out.dim());
        return out;
    }
    out.P_A = projector(out.A);
    out.b_ctr = out.A.transpose() * solve_spd(Matrix(out.A * out.A.transpose()), out.a);
    return out;
}

/// Slack values that make (θ, s) sit on the lifted equality manifold:
/// s = A_in θ − a_in (row by row, in the original scaling).
inline Vector slack_for(const ConstraintSet& cs, const Vector& theta) {
    if (cs.n_in() == 0) return Vector::Zero(0);
    return cs.A_in * theta - cs.a_in;
}

} // namespace hnnest
