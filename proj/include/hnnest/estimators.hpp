#pragma once

#include <hnnest/constraints.hpp>
#include <hnnest/hnn.hpp>
#include <hnnest/kf.hpp>
#include <hnnest/mapping.hpp>
#include <hnnest/mhe.hpp>
#include <hnnest/monitor.hpp>
#include <hnnest/plant.hpp>
#include <hnnest/rls.hpp>
#include <hnnest/stability.hpp>

#include <limits>
#include <optional>
#include <memory>
#include <string>
#include <vector>

namespace hnnest {

/// Shared per-step interface: every estimator in a trial consumes the same
/// plant transition and the same regression snapshot.
class Estimator {
public:
    virtual ~Estimator() = default;
    virtual const std::string& name() const = 0;
    virtual void step(const PlantState& before, const PlantState& after,
                      const RegressorSnapshot& snap, double f) = 0;
    virtual Vector theta() const = 0;

    virtual double vd() const { return std::numeric_limits<double>::quiet_NaN(); }
    virtual double energy_value() const { return std::numeric_limits<double>::quiet_NaN(); }
    virtual double monitor_score() const { return std::numeric_limits<double>::quiet_NaN(); }
    virtual int monitor_regime() const { return -1; }
    virtual double eta_effective() const { return std::numeric_limits<double>::quiet_NaN(); }
    virtual double curvature_sample() const { return std::numeric_limits<double>::quiet_NaN(); }
    virtual long saturation_steps() const { return 0; }
    virtual const StabilityAccumulator* stability() const { return nullptr; }
};

enum class HnnVariant {
    standard_ls,   // T = −WᵀW, b = Wᵀw, no constraints
    constrained,   // CA-HNN
    compensated,   // CA²-HNN
};

struct CaHnnOptions {
    HnnVariant variant = HnnVariant::constrained;
    GainConfig gains;
    MonitorConfig monitor;
    bool track_stability = false;
    int stability_sample_every = 100;
    /// Clamp v_θ onto the box after every step. The sign-free slack lift
    /// keeps the trajectory near the lifted manifold but exerts no force at
    /// the bounds themselves, so reported-estimate feasibility needs this
    /// projection; disable for the free-slack behaviour.
    bool project_outputs = true;
};

/// The projector-based Hopfield estimators (and the plain least-squares
/// mapping variant used in the unconstrained comparison runs).
class HnnEstimator : public Estimator {
public:
    HnnEstimator(std::string name, const CaHnnOptions& opt, const Vector& theta0,
                 const ConstraintSet& cs, std::optional<BoxConstraints> box = std::nullopt)
        : name_(std::move(name)), opt_(opt), gains_eff_(opt.gains), box_(std::move(box)),
          monitor_(opt.monitor, opt.gains),
          accum_(opt.stability_sample_every > 0 ? opt.stability_sample_every : 100) {
        const int p = static_cast<int>(theta0.size());
        if (opt_.variant == HnnVariant::standard_ls) {
            lc_ = lift(ConstraintSet::empty(p));
        } else {
            lc_ = lift(cs);
            if (opt_.variant == HnnVariant::compensated) lc_ = embed_augmented(lc_, 1);
        }
        if (opt_.variant == HnnVariant::standard_ls || !opt_.project_outputs) box_.reset();
        pm_ = lc_.p + lc_.m;
        const int n = opt_.variant == HnnVariant::standard_ls ? p : lc_.dim();

        Vector v0 = Vector::Zero(n);
        v0.head(p) = theta0;
        if (opt_.variant != HnnVariant::standard_ls && lc_.n_in > 0)
            v0.tail(lc_.n_in) = cs.A_in * theta0 - cs.a_in;
        state_ = HnnState::from_outputs(v0, gains_eff_);
        if (box_) {
            // the atanh/tanh round trip can land one ulp outside the box
            state_.v.head(p) =
                state_.v.head(p).cwiseMax(box_->lower).cwiseMin(box_->upper);
        }

        map_.eta = gains_eff_.eta;
        map_.p = lc_.p;
        map_.m = lc_.m;
        map_.n_in = opt_.variant == HnnVariant::standard_ls ? 0 : lc_.n_in;
        map_.T = Matrix::Zero(n, n);
        map_.b = Vector::Zero(n);
        t_const_ = Matrix::Zero(n, n);
        b_const_ = Vector::Zero(n);
        refresh_constraint_blocks();
    }

    const std::string& name() const override { return name_; }

    void step(const PlantState&, const PlantState&, const RegressorSnapshot& snap,
              double) override {
        build_map(snap);

        const MonitorStatus* status = nullptr;
        if (opt_.monitor.enabled) {
            Matrix w_score = snap.W;
            if (opt_.variant == HnnVariant::compensated) {
                w_score.conservativeResize(snap.q(), pm_);
                w_score.rightCols(lc_.m) = snap.H;
            }
            status = &monitor_.update(w_score, lc_.A_theta, Vector(state_.v.head(pm_)),
                                      gains_eff_.h);
            if (monitor_.eta_effective() != gains_eff_.eta ||
                monitor_.beta_effective() != gains_eff_.beta) {
                gains_eff_.eta = monitor_.eta_effective();
                gains_eff_.beta = monitor_.beta_effective();
                refresh_constraint_blocks();
                build_map(snap);
            }
        }

        if (status && status->regime == Regime::hard && status->anchor.size() == pm_) {
            // integrate, then project the identified-block update
            Vector u_prev = state_.u;
            hnn_step(state_, map_, gains_eff_, ws_);
            Vector du = state_.u.head(pm_) - u_prev.head(pm_);
            Vector anchor_u = activation_inverse(status->anchor, gains_eff_.alpha, gains_eff_.beta);
            Vector du_proj = monitor_.mitigate_update(du, Vector(u_prev.head(pm_)), anchor_u);
            state_.u.head(pm_) = u_prev.head(pm_) + du_proj;
            state_.v = activation(state_.u, gains_eff_.alpha, gains_eff_.beta);
        } else {
            hnn_step(state_, map_, gains_eff_, ws_);
        }

        if (box_) {
            bool clipped = false;
            for (int i = 0; i < lc_.p; ++i) {
                if (state_.v(i) < box_->lower(i)) {
                    state_.v(i) = box_->lower(i);
                    clipped = true;
                } else if (state_.v(i) > box_->upper(i)) {
                    state_.v(i) = box_->upper(i);
                    clipped = true;
                }
            }
            if (clipped)
                state_.u.head(lc_.p) = activation_inverse(Vector(state_.v.head(lc_.p)),
                                                          gains_eff_.alpha, gains_eff_.beta);
        }

        energy_ = energy(state_.v, map_);
        if (state_.v.head(lc_.p).cwiseAbs().maxCoeff() > 0.5 * gains_eff_.alpha)
            ++saturation_steps_;

        if (opt_.track_stability) {
            accum_.observe(step_count_, snap, lc_, gains_eff_.eta);
            accum_.observe_mapping(map_, snap.t);
            accum_.observe_outputs(Vector(state_.v.head(lc_.p)), gains_eff_.alpha);
        }
        if (step_count_ % curvature_every_ == 0 && opt_.variant != HnnVariant::standard_ls) {
            Matrix p_data = -map_.T.topLeftCorner(pm_, pm_) - gains_eff_.eta * lc_.P_A_theta;
            curvature_ = curvature(p_data, lc_.P_A_theta, gains_eff_.eta);
        }
        ++step_count_;
    }

    Vector theta() const override { return state_.v.head(lc_.p); }
    double vd() const override {
        return lc_.m > 0 ? state_.v(lc_.p) : std::numeric_limits<double>::quiet_NaN();
    }
    double energy_value() const override { return energy_; }
    double monitor_score() const override {
        return opt_.monitor.enabled ? monitor_.status().score
                                    : std::numeric_limits<double>::quiet_NaN();
    }
    int monitor_regime() const override {
        return opt_.monitor.enabled ? static_cast<int>(monitor_.status().regime) : -1;
    }
    double eta_effective() const override { return gains_eff_.eta; }
    double curvature_sample() const override { return curvature_; }
    long saturation_steps() const override { return saturation_steps_; }
    const StabilityAccumulator* stability() const override {
        return opt_.track_stability ? &accum_ : nullptr;
    }
    StabilityAccumulator* stability_mutable() { return opt_.track_stability ? &accum_ : nullptr; }

    const HnnState& state() const { return state_; }
    const HnnMapping& mapping() const { return map_; }
    const GainConfig& effective_gains() const { return gains_eff_; }

private:
    void refresh_constraint_blocks() {
        if (opt_.variant == HnnVariant::standard_ls) return;
        t_const_.setZero();
        b_const_.setZero();
        if (lc_.r() > 0) {
            t_const_ = -gains_eff_.eta * lc_.P_A;
            b_const_ = gains_eff_.eta * lc_.b_ctr;
        }
    }

    void build_map(const RegressorSnapshot& snap) {
        map_.eta = gains_eff_.eta;
        if (opt_.variant == HnnVariant::standard_ls) {
            map_.T.noalias() = -snap.W.transpose() * snap.W;
            map_.b.noalias() = snap.W.transpose() * snap.w;
            return;
        }
        Matrix proj;
        Vector bias;
        if (opt_.variant == HnnVariant::compensated) {
            if (snap.m() != lc_.m)
                throw DimensionError(name_ + ": snapshot lacks the disturbance channel");
            Matrix w_aug(snap.q(), pm_);
            w_aug.leftCols(lc_.p) = snap.W;
            w_aug.rightCols(lc_.m) = snap.H;
            detail::data_projector_and_bias(w_aug, snap.w, proj, bias);
        } else {
            detail::data_projector_and_bias(snap.W, snap.w, proj, bias);
        }
        map_.T = t_const_;
        map_.T.topLeftCorner(pm_, pm_) -= proj;
        map_.b = b_const_;
        map_.b.head(pm_) += bias;
    }

    std::string name_;
    CaHnnOptions opt_;
    GainConfig gains_eff_;
    std::optional<BoxConstraints> box_;
    LiftedConstraints lc_;
    int pm_ = 0;
    HnnState state_;
    HnnMapping map_;
    Matrix t_const_;
    Vector b_const_;
    HnnWorkspace ws_;
    IdentifiabilityMonitor monitor_;
    StabilityAccumulator accum_;
    long step_count_ = 0;
    long saturation_steps_ = 0;
    double energy_ = std::numeric_limits<double>::quiet_NaN();
    double curvature_ = std::numeric_limits<double>::quiet_NaN();
    static constexpr long curvature_every_ = 100;
};

class PbRlsEstimator : public Estimator {
public:
    PbRlsEstimator(std::string name, const RlsConfig& cfg, const Vector& theta0,
                   const BoxConstraints& box)
        : name_(std::move(name)), rls_(cfg, theta0, box) {}
    const std::string& name() const override { return name_; }
    void step(const PlantState&, const PlantState&, const RegressorSnapshot& snap,
              double) override {
        rls_.step(snap);
    }
    Vector theta() const override { return rls_.theta(); }

private:
    std::string name_;
    PbRls rls_;
};

class DaPbKfEstimator : public Estimator {
public:
    DaPbKfEstimator(std::string name, const KfConfig& cfg, const Vector& theta0,
                    const BoxConstraints& box)
        : name_(std::move(name)), kf_(cfg, theta0, box) {}
    const std::string& name() const override { return name_; }
    void step(const PlantState&, const PlantState&, const RegressorSnapshot& snap,
              double) override {
        kf_.step(snap);
    }
    Vector theta() const override { return kf_.theta(); }
    double vd() const override { return kf_.d_hat(); }

private:
    std::string name_;
    DaPbKf kf_;
};

class DaPbMheEstimator : public Estimator {
public:
    DaPbMheEstimator(std::string name, const MheConfig& cfg, const Vector& theta0,
                     const BoxConstraints& box, const MsdParams& masses, double h_plant)
        : name_(std::move(name)), mhe_(cfg, theta0, box, masses, h_plant) {}
    const std::string& name() const override { return name_; }
    void step(const PlantState& before, const PlantState& after, const RegressorSnapshot&,
              double f) override {
        mhe_.step(before, after, f);
    }
    Vector theta() const override { return mhe_.theta(); }
    double vd() const override { return mhe_.d_hat(); }

private:
    std::string name_;
    DaPbMhe mhe_;
};

} // namespace hnnest
