#pragma once

#include <hnnest/constraints.hpp>
#include <hnnest/numerics.hpp>

#include <algorithm>
#include <cmath>
#include <optional>

namespace hnnest {

/// Per-trial evaluation record. Settling times are absent when the error
/// never enters (and stays in) the tube for the dwell duration.
struct MetricRecord {
    double final_mse = 0.0;
    double auc_mse = 0.0;
    std::optional<double> t5;
    std::optional<double> t1;
    double viol_pct = 0.0;
};

/// MSE over the last 10% of the run, averaged over parameters with equal
/// weights. errors is steps × params, row k at time k·dt.
inline double final_mse(const Matrix& errors) {
    const auto k = errors.rows();
    if (k < 10) throw InvalidInputError("final_mse: need at least 10 steps");
    const auto k_f = k / 10;
    const Matrix tail = errors.bottomRows(k_f);
    return tail.array().square().sum() / static_cast<double>(k_f * errors.cols());
}

/// Discrete area under the MSE-vs-time curve, averaged over parameters.
inline double auc_mse(const Matrix& errors, double dt) {
    if (!(dt > 0)) throw InvalidInputError("auc_mse: dt must be positive");
    return dt * errors.array().square().sum() / static_cast<double>(errors.cols());
}

/// Robust normalisation scale c_i = max{θ_i^max − θ_i^min, u_i − ℓ_i}. The
/// truth trace may be a single row (constant parameters), in which case the
/// scale reduces to the box width.
inline Vector normalization_scale(const Matrix& truth_trace, const BoxConstraints& box) {
    Vector c = box.upper - box.lower;
    if (truth_trace.rows() > 1) {
        for (int i = 0; i < c.size(); ++i) {
            const double range =
                truth_trace.col(i).maxCoeff() - truth_trace.col(i).minCoeff();
            c(i) = std::max(c(i), range);
        }
    }
    return c;
}

/// First time the sup-over-parameters normalised error enters the ε-tube,
/// never exits again, and stays below for at least `dwell` seconds before
/// the trace ends. Row k is at time k·dt.
inline std::optional<double> settling_time(const Matrix& errors, const Vector& scale,
                                           double eps, double dwell, double dt) {
    if (errors.cols() != scale.size())
        throw DimensionError("settling_time: scale length mismatch");
    const auto k = errors.rows();
    if (k == 0) return std::nullopt;
    Eigen::Index entry = 0;
    for (Eigen::Index row = k - 1; row >= 0; --row) {
        double sup = 0.0;
        for (int i = 0; i < errors.cols(); ++i)
            sup = std::max(sup, std::abs(errors(row, i)) / scale(i));
        if (sup > eps) {
            entry = row + 1;
            break;
        }
    }
    if (entry >= k) return std::nullopt;
    const double below_for = static_cast<double>(k - 1 - entry) * dt;
    if (below_for < dwell) return std::nullopt;
    return static_cast<double>(entry) * dt;
}

/// Maximum normalised box violation over time and parameters, in percent.
/// Exactly 0.0 means the whole trace is feasible.
inline double violation_pct(const Matrix& theta_trace, const BoxConstraints& box) {
    if (theta_trace.cols() != box.params())
        throw DimensionError("violation_pct: parameter count mismatch");
    double worst = 0.0;
    for (Eigen::Index k = 0; k < theta_trace.rows(); ++k) {
        for (int i = 0; i < box.params(); ++i) {
            const double over = std::max(0.0, theta_trace(k, i) - box.upper(i));
            const double under = std::max(0.0, box.lower(i) - theta_trace(k, i));
            worst = std::max(worst, (over + under) / (box.upper(i) - box.lower(i)));
        }
    }
    return 100.0 * worst;
}

} // namespace hnnest
