#pragma once

#include <hnnest/estimators.hpp>
#include <hnnest/metrics.hpp>
#include <hnnest/plant.hpp>
#include <hnnest/rng.hpp>

#include <atomic>
#include <cmath>
#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace hnnest {

enum class EstimatorKind { ca_hnn, ca2_hnn, ls_hnn, pb_rls, da_pb_kf, da_pb_mhe };

inline const char* kind_name(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::ca_hnn: return "ca_hnn";
        case EstimatorKind::ca2_hnn: return "ca2_hnn";
        case EstimatorKind::ls_hnn: return "ls_hnn";
        case EstimatorKind::pb_rls: return "pb_rls";
        case EstimatorKind::da_pb_kf: return "da_pb_kf";
        default: return "da_pb_mhe";
    }
}

struct EstimatorSpec {
    EstimatorKind kind = EstimatorKind::ca_hnn;
    std::string label;  // defaults to kind_name
    GainConfig gains;
    MonitorConfig monitor;
    bool track_stability = false;
    bool project_outputs = true;  // HNN kinds: clamp v_θ onto the box per step
    RlsConfig rls;
    KfConfig kf;
    MheConfig mhe;

    std::string name() const { return label.empty() ? kind_name(kind) : label; }
};

/// Everything one trial needs; scenario generation produces one per trial.
struct RunSpec {
    double horizon = 0.05;
    double h = 1e-5;
    MsdParams plant;                    // truth (k1 is the schedule's base value)
    Vector x0 = (Vector(4) << 0.0, 0.3, 0.0, 0.0).finished();
    DisturbanceSpec disturbance;
    ParameterSchedule k1_sched;
    Vector theta0 = (Vector(4) << 0.25, 0.05, 0.3, 0.15).finished();
    std::optional<BoxConstraints> box;  // absent = unconstrained
    bool row_normalize_constraints = true;
    std::vector<EstimatorSpec> estimators;
    std::uint64_t seed = 0;
    int emit_every = 1;
    double metrics_dwell = 1.0;
};

struct EstimatorTraceOut {
    std::string name;
    Matrix theta;                 // emitted × p
    std::vector<double> vd;
    std::vector<double> energy;
    std::vector<double> score;
    std::vector<int> regime;
    std::vector<double> eta_eff;
    std::vector<double> c_t;
    long saturation_steps = 0;
    MetricRecord metrics;
    bool failed = false;
    std::string error;
    std::optional<StabilityReport> stability;
};

struct TrialResult {
    std::uint64_t trial_seed = 0;
    std::vector<double> t;        // emitted time grid, t[0] = 0
    Matrix truth;                 // emitted × p instantaneous truth
    std::vector<EstimatorTraceOut> estimators;
    std::uint64_t snapshot_checksum = 0;  // pairing witness over the (W, w) stream
};

namespace detail {

inline std::uint64_t fnv_accumulate(std::uint64_t h, const double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &data[i], sizeof(bits));
        h ^= bits;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::unique_ptr<Estimator> make_estimator(const EstimatorSpec& spec, const RunSpec& run,
                                                 const ConstraintSet& cs,
                                                 const BoxConstraints& box) {
    switch (spec.kind) {
        case EstimatorKind::ca_hnn:
        case EstimatorKind::ca2_hnn:
        case EstimatorKind::ls_hnn: {
            CaHnnOptions opt;
            opt.variant = spec.kind == EstimatorKind::ca_hnn ? HnnVariant::constrained
                          : spec.kind == EstimatorKind::ca2_hnn ? HnnVariant::compensated
                                                                : HnnVariant::standard_ls;
            opt.gains = spec.gains;
            opt.gains.h = run.h;
            opt.monitor = spec.monitor;
            opt.track_stability = spec.track_stability;
            opt.project_outputs = spec.project_outputs;
            return std::make_unique<HnnEstimator>(spec.name(), opt, run.theta0, cs, run.box);
        }
        case EstimatorKind::pb_rls:
            return std::make_unique<PbRlsEstimator>(spec.name(), spec.rls, run.theta0, box);
        case EstimatorKind::da_pb_kf:
            return std::make_unique<DaPbKfEstimator>(spec.name(), spec.kf, run.theta0, box);
        case EstimatorKind::da_pb_mhe:
        default:
            return std::make_unique<DaPbMheEstimator>(spec.name(), spec.mhe, run.theta0, box,
                                                      run.plant, run.h);
    }
}

} // namespace detail

/// Run one trial: a single plant trajectory feeds every estimator the same
/// snapshot stream; traces are decimated by emit_every; metrics computed
/// against the instantaneous truth on the emitted grid.
inline TrialResult run_trial(const RunSpec& run) {
    const int p = static_cast<int>(run.theta0.size());
    const long steps = std::lround(run.horizon / run.h);
    const int emit_every = std::max(1, run.emit_every);
    const long emitted = steps / emit_every + 1;

    ConstraintSet cs = ConstraintSet::empty(p);
    BoxConstraints box;
    box.lower = Vector::Constant(p, -1e9);
    box.upper = Vector::Constant(p, 1e9);
    if (run.box) {
        box = *run.box;
        cs = from_box(box);
        if (run.row_normalize_constraints) cs = row_normalize(cs);
    }

    TrialResult result;
    result.trial_seed = run.seed;
    result.t.reserve(emitted);
    result.truth = Matrix::Zero(emitted, p);

    std::vector<std::unique_ptr<Estimator>> ests;
    std::vector<bool> alive;
    for (const auto& spec : run.estimators) {
        ests.push_back(detail::make_estimator(spec, run, cs, box));
        alive.push_back(true);
        EstimatorTraceOut tr;
        tr.name = ests.back()->name();
        tr.theta = Matrix::Zero(emitted, p);
        result.estimators.push_back(std::move(tr));
    }

    Rng rng(run.seed);
    MsdParams params = run.plant;
    PlantState state;
    state.x = run.x0;

    auto truth_at = [&](double t) {
        Vector th = params.theta();
        th(0) = k1_schedule(run.k1_sched, t, run.plant.k1);
        return th;
    };
    auto emit = [&](long row, double t) {
        result.t.push_back(t);
        result.truth.row(row) = truth_at(t).transpose();
        for (std::size_t e = 0; e < ests.size(); ++e) {
            auto& tr = result.estimators[e];
            tr.theta.row(row) = ests[e]->theta().transpose();
            tr.vd.push_back(ests[e]->vd());
            tr.energy.push_back(ests[e]->energy_value());
            tr.score.push_back(ests[e]->monitor_score());
            tr.regime.push_back(ests[e]->monitor_regime());
            tr.eta_eff.push_back(ests[e]->eta_effective());
            tr.c_t.push_back(ests[e]->curvature_sample());
        }
    };

    long row = 0;
    emit(row++, 0.0);
    std::uint64_t checksum = 0xcbf29ce484222325ULL;

    for (long k = 0; k < steps; ++k) {
        const double t = k * run.h;
        params.k1 = k1_schedule(run.k1_sched, t, run.plant.k1);
        const double f = input_signal(t);
        const double d = sample_disturbance(run.disturbance, rng);
        PlantState next = simulate_step(state, f, d, params, run.h);
        RegressorSnapshot snap = build_regression(state, next, f, run.h, params, true);

        checksum = detail::fnv_accumulate(checksum, snap.W.data(), snap.W.size());
        checksum = detail::fnv_accumulate(checksum, snap.w.data(), snap.w.size());

        for (std::size_t e = 0; e < ests.size(); ++e) {
            if (!alive[e]) continue;
            try {
                ests[e]->step(state, next, snap, f);
            } catch (const Error& err) {
                result.estimators[e].failed = true;
                result.estimators[e].error = err.what();
                alive[e] = false;
            }
        }
        state = next;
        if ((k + 1) % emit_every == 0) emit(row++, (k + 1) * run.h);
    }

    result.snapshot_checksum = checksum;

    // metrics on the emitted grid
    const double dt_out = run.h * emit_every;
    for (std::size_t e = 0; e < ests.size(); ++e) {
        auto& tr = result.estimators[e];
        tr.saturation_steps = ests[e]->saturation_steps();
        if (tr.failed) continue;
        Matrix errors = tr.theta - result.truth;
        tr.metrics.final_mse = final_mse(errors);
        tr.metrics.auc_mse = auc_mse(errors, dt_out);
        if (run.box) {
            Vector scale = normalization_scale(result.truth, *run.box);
            tr.metrics.t5 = settling_time(errors, scale, 0.05, run.metrics_dwell, dt_out);
            tr.metrics.t1 = settling_time(errors, scale, 0.01, run.metrics_dwell, dt_out);
            tr.metrics.viol_pct = violation_pct(tr.theta, *run.box);
        }
        if (const StabilityAccumulator* acc = ests[e]->stability()) {
            StabilityAccumulator tuned = *acc;
            if (run.disturbance.kind == DisturbanceSpec::Kind::gaussian)
                tuned.set_disturbance_power(run.disturbance.mu * run.disturbance.mu +
                                            run.disturbance.sigma2);
            if (run.k1_sched.kind == ParameterSchedule::Kind::cosine)
                tuned.set_drift_rate(0.6 * run.k1_sched.omega);
            tuned.set_h_star(1.0);  // ‖H_c‖ column scale of the d channel
            GainConfig g = run.estimators[e].gains;
            g.h = run.h;
            try {
                tr.stability = tuned.report(g);
            } catch (const Error&) {
                // zero curvature windows leave the report absent
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Scenarios and Monte Carlo
// ---------------------------------------------------------------------------

struct ScenarioConfig {
    std::string id = "S1";  // S1 | S2 | S3
    int trials = 10;
    std::uint64_t master_seed = 12345;
    RunSpec base;           // horizons, gains, estimators, box, truth
    double mu_range[2] = {1.0, 5.0};
    double sigma2_range[2] = {1.0, 10.0};
    double omega_range[2] = {0.01, 1.0};
};

/// Deterministic trial inputs: a SplitMix64 child seed drives the trial's
/// randomised elements, a second derivation seeds the disturbance stream.
inline RunSpec generate_trial(const ScenarioConfig& cfg, int trial_index) {
    RunSpec run = cfg.base;
    const std::uint64_t child = derive_seed(cfg.master_seed, trial_index);
    Rng rng(child);
    run.seed = derive_seed(child, 1);

    if (cfg.id == "S1") {
        if (!run.box) throw InvalidInputError("S1 requires a box to draw initial estimates");
        const int p = run.box->params();
        Vector theta0(p);
        for (int i = 0; i < p; ++i)
            theta0(i) = rng.uniform(run.box->lower(i), run.box->upper(i));
        run.theta0 = theta0;
        run.disturbance.kind = DisturbanceSpec::Kind::none;
        run.k1_sched.kind = ParameterSchedule::Kind::constant;
    } else if (cfg.id == "S2") {
        run.disturbance.kind = DisturbanceSpec::Kind::gaussian;
        run.disturbance.mu = rng.uniform(cfg.mu_range[0], cfg.mu_range[1]);
        run.disturbance.sigma2 = rng.uniform(cfg.sigma2_range[0], cfg.sigma2_range[1]);
        run.k1_sched.kind = ParameterSchedule::Kind::constant;
    } else if (cfg.id == "S3") {
        run.disturbance.kind = DisturbanceSpec::Kind::gaussian;
        run.disturbance.mu = 1.0;
        run.disturbance.sigma2 = 1.0;
        run.k1_sched.kind = ParameterSchedule::Kind::cosine;
        run.k1_sched.omega = rng.uniform(cfg.omega_range[0], cfg.omega_range[1]);
    } else {
        throw InvalidInputError("generate_trial: unknown scenario id " + cfg.id);
    }
    return run;
}

struct MetricStat {
    double mean = 0.0;
    double stddev = 0.0;   // population convention
    int count = 0;         // trials contributing (settling times may be absent)
};

struct AggregateRow {
    std::string name;
    MetricStat final_mse;
    MetricStat auc_mse;
    MetricStat t5;
    MetricStat t1;
    MetricStat viol_pct;
    int failed_trials = 0;
};

struct AggregateStats {
    std::vector<AggregateRow> rows;
};

namespace detail {

inline MetricStat stat_of(const std::vector<double>& xs) {
    MetricStat s;
    s.count = static_cast<int>(xs.size());
    if (xs.empty()) return s;
    double sum = 0;
    for (double x : xs) sum += x;
    s.mean = sum / xs.size();
    double var = 0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(var / xs.size());  // population std
    return s;
}

} // namespace detail

/// Mean ± population std per metric per estimator; settling statistics are
/// over the trials where the time is defined (count reported).
inline AggregateStats aggregate(const std::vector<TrialResult>& trials) {
    AggregateStats out;
    if (trials.empty()) return out;
    const std::size_t n_est = trials.front().estimators.size();
    for (std::size_t e = 0; e < n_est; ++e) {
        AggregateRow row;
        row.name = trials.front().estimators[e].name;
        std::vector<double> fm, auc, t5, t1, vi;
        for (const auto& tr : trials) {
            const auto& est = tr.estimators[e];
            if (est.failed) {
                ++row.failed_trials;
                continue;
            }
            fm.push_back(est.metrics.final_mse);
            auc.push_back(est.metrics.auc_mse);
            vi.push_back(est.metrics.viol_pct);
            if (est.metrics.t5) t5.push_back(*est.metrics.t5);
            if (est.metrics.t1) t1.push_back(*est.metrics.t1);
        }
        row.final_mse = detail::stat_of(fm);
        row.auc_mse = detail::stat_of(auc);
        row.t5 = detail::stat_of(t5);
        row.t1 = detail::stat_of(t1);
        row.viol_pct = detail::stat_of(vi);
        out.rows.push_back(std::move(row));
    }
    return out;
}

/// Run all trials of a scenario, trial-level parallel across workers.
inline std::vector<TrialResult> run_scenario(const ScenarioConfig& cfg, int workers = 0) {
    const int n = cfg.trials;
    std::vector<TrialResult> results(n);
    if (workers <= 0)
        workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, n));

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) break;
            results[i] = run_trial(generate_trial(cfg, i));
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return results;
}

} // namespace hnnest
