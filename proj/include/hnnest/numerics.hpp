#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace hnnest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class for all numerical failures raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// NaN/Inf encountered where finite values are required.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// Incompatible or invalid matrix/vector shapes.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid argument values (asymmetric input, bad thresholds, degenerate box, ...).
class InvalidInputError : public Error {
public:
    using Error::Error;
};

/// Factorization failed even after the ridge fallback.
class SingularMatrixError : public Error {
public:
    using Error::Error;
};

/// The instantaneous target is undefined (joint identifiability lost).
class NotIdentifiableError : public Error {
public:
    using Error::Error;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// Power-iteration estimate of the spectral norm ‖M‖₂.
/// Runs on MᵀM so it works for rectangular inputs; 20 iterations is plenty
/// for the ridge-scale use below (only the magnitude order matters there).
inline double spectral_norm_estimate(const Matrix& m, int iterations = 20) {
    if (m.size() == 0) return 0.0;
    Vector x = Vector::Ones(m.cols());
    double norm2 = 0.0;
    for (int it = 0; it < iterations; ++it) {
        Vector y = m.transpose() * (m * x);
        double n = y.norm();
        if (n == 0.0) return 0.0;
        x = y / n;
        norm2 = n;
    }
    return std::sqrt(norm2);
}

namespace detail {

inline void require_spd_input(const Matrix& m, const Matrix& b) {
    if (!all_finite(m) || !all_finite(b))
        throw NonFiniteError("solve_spd: non-finite input");
    if (m.rows() != m.cols())
        throw DimensionError("solve_spd: matrix must be square");
    if (b.rows() != m.rows())
        throw DimensionError("solve_spd: row count of rhs must match matrix size");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw InvalidInputError("solve_spd: matrix not symmetric");
}

} // namespace detail

namespace detail {

/// Solve (M + εI) X = B for symmetric PSD M using a Cholesky-type
/// factorization. ε = 0 when the plain factorization succeeds, otherwise
/// ε = 1e-8·‖M‖₂. Throws SingularMatrixError if the ridge does not help.
inline Matrix solve_spd_impl(const Matrix& m, const Matrix& b) {
    detail::require_spd_input(m, b);

    Eigen::LLT<Matrix> llt(m);
    if (llt.info() == Eigen::Success) {
        Matrix x = llt.solve(b);
        if (all_finite(x)) return x;
    }

    const double ridge = 1e-8 * spectral_norm_estimate(m);
    Matrix regularized = m;
    regularized.diagonal().array() += ridge;
    Eigen::LLT<Matrix> llt_ridge(regularized);
    if (llt_ridge.info() == Eigen::Success) {
        Matrix x = llt_ridge.solve(b);
        if (all_finite(x)) return x;
    }

    // LDLT is still a symmetric (Cholesky-type) factorization and handles
    // semidefinite leading blocks that make plain LLT bail out.
    Eigen::LDLT<Matrix> ldlt(regularized);
    if (ldlt.info() == Eigen::Success) {
        Matrix x = ldlt.solve(b);
        if (all_finite(x)) return x;
    }
    throw SingularMatrixError("solve_spd: factorization failed after ridge");
}

} // namespace detail

/// See detail::solve_spd_impl. Accepts any Eigen expressions; the return
/// shape follows the right-hand side (vector in, vector out).
template <typename DerivedM, typename DerivedB>
Eigen::Matrix<double, Eigen::Dynamic, DerivedB::ColsAtCompileTime>
solve_spd(const Eigen::MatrixBase<DerivedM>& m, const Eigen::MatrixBase<DerivedB>& b) {
    return detail::solve_spd_impl(Matrix(m), Matrix(b));
}

/// Orthogonal projector onto range(Mᵀ): P = Mᵀ (M Mᵀ)⁻¹ M, formed through
/// linear solves. Symmetric, idempotent, eigenvalues in [0, 1].
inline Matrix projector(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0)
        throw DimensionError("projector: empty matrix");
    if (!all_finite(m)) throw NonFiniteError("projector: non-finite input");
    Matrix gram = m * m.transpose();
    Matrix p = m.transpose() * solve_spd(gram, m);
    // Solves leave ~machine-level asymmetry; the downstream eigen-analysis
    // assumes exact symmetry.
    return 0.5 * (p + p.transpose());
}

/// Smallest singular value of S as an operator on its column space, i.e.
/// sqrt(λ_min(SᵀS)). Returns 0 whenever rank(S) < cols(S), including the
/// wide case rows < cols.
inline double min_singular_value(const Matrix& s) {
    if (s.rows() == 0 || s.cols() == 0)
        throw DimensionError("min_singular_value: empty matrix");
    if (!all_finite(s)) throw NonFiniteError("min_singular_value: non-finite input");
    if (s.rows() >= s.cols()) {
        Eigen::JacobiSVD<Matrix> svd(s);
        return svd.singularValues().tail(1)(0);
    }
    // Pad with zero rows so all cols(S) singular values exist; the extra
    // rows do not change SᵀS.
    Matrix padded = Matrix::Zero(s.cols(), s.cols());
    padded.topRows(s.rows()) = s;
    Eigen::JacobiSVD<Matrix> svd(padded);
    return svd.singularValues().tail(1)(0);
}

/// One classical 4-stage Runge–Kutta step for ẏ = f(t, y).
/// Throws NonFiniteError if any stage blows up (step-size violation).
template <typename F>
Vector rk4_step(F&& f, const Vector& y, double t, double h) {
    if (!(h > 0.0)) throw InvalidInputError("rk4_step: step size must be positive");
    Vector k1 = f(t, y);
    Vector k2 = f(t + 0.5 * h, Vector(y + 0.5 * h * k1));
    Vector k3 = f(t + 0.5 * h, Vector(y + 0.5 * h * k2));
    Vector k4 = f(t + h, Vector(y + h * k3));
    Vector out = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!all_finite(out)) throw NonFiniteError("rk4_step: non-finite stage");
    return out;
}

} // namespace hnnest
