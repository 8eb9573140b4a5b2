#pragma once

// Self-contained reference linear algebra used only by tests. Deliberately
// avoids the library's solve/SVD paths so oracle and implementation stay
// independent: everything here is built on a cyclic Jacobi eigensolver for
// symmetric matrices.

#include <Eigen/Core>

#include <cmath>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct EigResult {
    VectorXd values;   // ascending
    MatrixXd vectors;  // columns match values
};

// Cyclic Jacobi rotations until off-diagonal mass is negligible.
inline EigResult jacobi_eig(MatrixXd a) {
    const int n = static_cast<int>(a.rows());
    MatrixXd v = MatrixXd::Identity(n, n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    // sort ascending
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (a(idx[j], idx[j]) < a(idx[i], idx[i])) std::swap(idx[i], idx[j]);
    EigResult r;
    r.values.resize(n);
    r.vectors.resize(n, n);
    for (int i = 0; i < n; ++i) {
        r.values(i) = a(idx[i], idx[i]);
        r.vectors.col(i) = v.col(idx[i]);
    }
    return r;
}

inline double min_eigenvalue(const MatrixXd& sym) { return jacobi_eig(sym).values(0); }
inline double max_eigenvalue(const MatrixXd& sym) {
    EigResult r = jacobi_eig(sym);
    return r.values(r.values.size() - 1);
}

// Smallest singular value via eigenvalues of SᵀS.
inline double min_singular_value(const MatrixXd& s) {
    const double lam = min_eigenvalue(MatrixXd(s.transpose() * s));
    return std::sqrt(std::max(0.0, lam));
}

// Moore–Penrose pseudo-inverse from the eigendecomposition of MᵀM.
inline MatrixXd pinv(const MatrixXd& m, double tol = 1e-12) {
    EigResult r = jacobi_eig(MatrixXd(m.transpose() * m));
    const double lmax = std::max(r.values(r.values.size() - 1), 0.0);
    MatrixXd out = MatrixXd::Zero(m.cols(), m.rows());
    for (int i = 0; i < r.values.size(); ++i) {
        if (r.values(i) > tol * std::max(lmax, 1.0)) {
            // M⁺ = Σ vᵢ (1/λᵢ) vᵢᵀ Mᵀ
            out += r.vectors.col(i) * (r.vectors.col(i).transpose() * m.transpose()) / r.values(i);
        }
    }
    return out;
}

// Orthogonal projector onto range(Mᵀ) as U₁U₁ᵀ, U₁ = eigenvectors of MᵀM
// with non-negligible eigenvalue.
inline MatrixXd row_space_projector(const MatrixXd& m, double tol = 1e-10) {
    EigResult r = jacobi_eig(MatrixXd(m.transpose() * m));
    const double lmax = std::max(r.values(r.values.size() - 1), 0.0);
    MatrixXd p = MatrixXd::Zero(m.cols(), m.cols());
    for (int i = 0; i < r.values.size(); ++i)
        if (r.values(i) > tol * std::max(lmax, 1.0))
            p += r.vectors.col(i) * r.vectors.col(i).transpose();
    return p;
}

} // namespace oracle
