// Command-line front end: single runs, Monte Carlo sweeps, tuning reports
// and the d->x2 frequency response, all driven by JSON configs.

#include <hnnest/config.hpp>
#include <hnnest/experiments.hpp>
#include <hnnest/io.hpp>
#include <hnnest/monitor.hpp>
#include <hnnest/stability.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace hnnest;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<double> horizon;
    std::optional<int> emit_every;
    std::optional<int> workers;
    std::optional<std::string> integrator;
};

void apply_overrides(RunConfig& cfg, const CommonFlags& flags) {
    auto& run = cfg.scenario.base;
    if (flags.seed) {
        cfg.scenario.master_seed = *flags.seed;
        run.seed = *flags.seed;
    }
    if (flags.trials) cfg.scenario.trials = *flags.trials;
    if (flags.horizon) run.horizon = *flags.horizon;
    if (flags.emit_every) run.emit_every = *flags.emit_every;
    if (flags.workers) cfg.workers = *flags.workers;
    if (flags.integrator) {
        const Integrator integ =
            *flags.integrator == "euler" ? Integrator::euler : Integrator::rk4;
        for (auto& est : run.estimators) est.gains.integrator = integ;
    }
}

std::string trace_path(const std::string& dir, int trial) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "trial_%03d.csv", trial);
    return (fs::path(dir) / buf).string();
}

void write_trial_csv(const std::string& path, const TrialResult& tr) {
    CsvWriter csv(path);
    std::vector<std::string> cols = {"t", "truth_k1", "truth_b1", "truth_k2", "truth_b2"};
    for (const auto& est : tr.estimators) {
        for (const char* par : {"k1", "b1", "k2", "b2"})
            cols.push_back(est.name + "_" + par);
        for (const char* extra : {"vd", "energy", "score", "regime", "eta", "c"})
            cols.push_back(est.name + "_" + extra);
    }
    csv.header(cols);
    std::vector<double> row;
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
        row.clear();
        row.push_back(tr.t[k]);
        for (int i = 0; i < tr.truth.cols(); ++i) row.push_back(tr.truth(k, i));
        for (const auto& est : tr.estimators) {
            for (int i = 0; i < est.theta.cols(); ++i) row.push_back(est.theta(k, i));
            row.push_back(est.vd[k]);
            row.push_back(est.energy[k]);
            row.push_back(est.score[k]);
            row.push_back(static_cast<double>(est.regime[k]));
            row.push_back(est.eta_eff[k]);
            row.push_back(est.c_t[k]);
        }
        csv.row(row);
    }
}

std::string fmt_stat(const MetricStat& s, int total) {
    char buf[64];
    if (s.count == 0) {
        return "----";
    }
    std::snprintf(buf, sizeof(buf), "%.1e±%.1e", s.mean, s.stddev);
    std::string out = buf;
    if (s.count < total) out += " (" + std::to_string(s.count) + "/" + std::to_string(total) + ")";
    return out;
}

void print_table(const AggregateStats& agg, int trials) {
    std::printf("%-12s %-18s %-18s %-22s %-22s %-14s\n", "Method", "Final MSE", "AUC-MSE",
                "Time->5% [s]", "Time->1% [s]", "Viol [%]");
    for (const auto& row : agg.rows) {
        std::printf("%-12s %-18s %-18s %-22s %-22s %-14s\n", row.name.c_str(),
                    fmt_stat(row.final_mse, trials).c_str(), fmt_stat(row.auc_mse, trials).c_str(),
                    fmt_stat(row.t5, trials).c_str(), fmt_stat(row.t1, trials).c_str(),
                    fmt_stat(row.viol_pct, trials).c_str());
    }
}

json stat_json(const MetricStat& s) {
    return json{{"mean", s.mean}, {"std", s.stddev}, {"count", s.count}};
}

int cmd_run(const CommonFlags& flags) {
    RunConfig cfg = load_config_file(flags.config_path);
    apply_overrides(cfg, flags);
    fs::create_directories(flags.out_dir);

    TrialResult tr = run_trial(cfg.scenario.base);
    const std::string path = (fs::path(flags.out_dir) / "run.csv").string();
    write_trial_csv(path, tr);
    std::printf("wrote %s (%zu rows)\n", path.c_str(), tr.t.size());

    bool any_failed = false;
    for (const auto& est : tr.estimators) {
        if (est.failed) {
            any_failed = true;
            std::fprintf(stderr, "estimator %s failed: %s\n", est.name.c_str(),
                         est.error.c_str());
            continue;
        }
        std::printf("%-12s final_mse=%.3e auc=%.3e viol=%.3f%%", est.name.c_str(),
                    est.metrics.final_mse, est.metrics.auc_mse, est.metrics.viol_pct);
        if (est.metrics.t5) std::printf(" t5=%.3e", *est.metrics.t5);
        if (est.metrics.t1) std::printf(" t1=%.3e", *est.metrics.t1);
        if (est.saturation_steps > 0)
            std::printf(" saturation_steps=%ld", est.saturation_steps);
        std::printf("\n");
        if (est.stability) {
            const StabilityReport& rep = *est.stability;
            std::printf("  stability: c*=%.4g gamma*=%.4g rho=%.4g lambda_max=%.4g h_max=%.3e%s\n",
                        rep.c_star, rep.gamma_star, rep.rho, rep.lambda_max, rep.h_max,
                        rep.delta_verified ? "" : " [delta unverified]");
        }
    }
    return any_failed ? 3 : 0;
}

int cmd_montecarlo(const CommonFlags& flags) {
    RunConfig cfg = load_config_file(flags.config_path);
    apply_overrides(cfg, flags);
    fs::create_directories(flags.out_dir);

    std::vector<TrialResult> trials = run_scenario(cfg.scenario, cfg.workers);
    AggregateStats agg = aggregate(trials);

    for (std::size_t i = 0; i < trials.size(); ++i)
        write_trial_csv(trace_path(flags.out_dir, static_cast<int>(i)), trials[i]);

    json out;
    out["scenario"] = cfg.scenario.id;
    out["trials"] = cfg.scenario.trials;
    out["seed"] = cfg.scenario.master_seed;
    out["std_convention"] = "population";
    out["config"] = serialize_config(cfg);
    json rows = json::array();
    for (const auto& row : agg.rows) {
        rows.push_back(json{{"name", row.name},
                            {"final_mse", stat_json(row.final_mse)},
                            {"auc_mse", stat_json(row.auc_mse)},
                            {"t5", stat_json(row.t5)},
                            {"t1", stat_json(row.t1)},
                            {"viol_pct", stat_json(row.viol_pct)},
                            {"failed_trials", row.failed_trials}});
    }
    out["results"] = std::move(rows);
    json seeds = json::array(), sums = json::array();
    for (const auto& tr : trials) {
        seeds.push_back(tr.trial_seed);
        sums.push_back(tr.snapshot_checksum);
    }
    out["trial_seeds"] = std::move(seeds);
    out["snapshot_checksums"] = std::move(sums);

    const std::string agg_path = (fs::path(flags.out_dir) / "aggregate.json").string();
    std::ofstream agg_out(agg_path);
    agg_out << out.dump(2) << "\n";
    std::printf("scenario %s, %d trials (seed %llu)\n", cfg.scenario.id.c_str(),
                cfg.scenario.trials,
                static_cast<unsigned long long>(cfg.scenario.master_seed));
    print_table(agg, cfg.scenario.trials);
    std::printf("wrote %s\n", agg_path.c_str());
    return 0;
}

int cmd_tune(const CommonFlags& flags, double gamma_des, double omega_max, double error_ratio,
             double tau_c, double zeta) {
    RunConfig cfg = load_config_file(flags.config_path);
    apply_overrides(cfg, flags);
    const RunSpec& run = cfg.scenario.base;

    GainConfig gains;
    for (const auto& est : run.estimators) {
        if (est.kind == EstimatorKind::ca_hnn || est.kind == EstimatorKind::ca2_hnn ||
            est.kind == EstimatorKind::ls_hnn) {
            gains = est.gains;
            gains.h = run.h;
            break;
        }
    }

    const int p = static_cast<int>(run.theta0.size());
    ConstraintSet cs = ConstraintSet::empty(p);
    if (run.box) {
        cs = from_box(*run.box);
        if (run.row_normalize_constraints) cs = row_normalize(cs);
    }
    LiftedConstraints lc = lift(cs);

    // plant-only probe: sample data projectors on a decimated grid
    std::vector<Matrix> p_w_samples;
    StabilityAccumulator acc(100);
    Rng rng(run.seed);
    MsdParams params = run.plant;
    PlantState state;
    state.x = run.x0;
    const long steps = std::lround(run.horizon / run.h);
    for (long k = 0; k < steps; ++k) {
        const double t = k * run.h;
        params.k1 = k1_schedule(run.k1_sched, t, run.plant.k1);
        const double f = input_signal(t);
        const double d = sample_disturbance(run.disturbance, rng);
        PlantState next = simulate_step(state, f, d, params, run.h);
        RegressorSnapshot snap = build_regression(state, next, f, run.h, params, false);
        if (k % 100 == 0 && snap.W.norm() > 1e-12) p_w_samples.push_back(projector(snap.W));
        acc.observe(k, snap, lc, gains.eta);
        state = next;
    }
    if (run.disturbance.kind == DisturbanceSpec::Kind::gaussian)
        acc.set_disturbance_power(run.disturbance.mu * run.disturbance.mu +
                                  run.disturbance.sigma2);
    if (run.k1_sched.kind == ParameterSchedule::Kind::cosine)
        acc.set_drift_rate(0.6 * run.k1_sched.omega);
    acc.set_h_star(1.0);

    auto c_star_of = [&](double eta) {
        double c = std::numeric_limits<double>::infinity();
        for (const auto& p_w : p_w_samples)
            c = std::min(c, curvature(p_w, lc.P_A_theta, eta));
        return p_w_samples.empty() ? 0.0 : c;
    };

    std::printf("probe: %ld steps, %zu curvature samples\n", steps, p_w_samples.size());
    std::printf("configured gains: alpha=%g beta=%g eta=%g h=%g\n", gains.alpha, gains.beta,
                gains.eta, gains.h);
    try {
        StabilityReport rep = acc.report(gains);
        std::printf("c* = %.6g   lambda_max = %.6g\n", rep.c_star, rep.lambda_max);
        std::printf("gamma* = %.6g   h_max = %.6e (fbar'=1)\n", rep.gamma_star, rep.h_max);
        std::printf("budgets: P_map=%.4g P_dist=%.4g P_drift=%.4g  (L_map=%.4g L_d=%.4g)\n",
                    rep.p_map, rep.p_dist, rep.p_drift, rep.l_map, rep.l_d);
        std::printf("rho = %.6g\n", rep.rho);
    } catch (const ZeroCurvatureError&) {
        std::printf("advisory: zero curvature over the probe window; "
                    "gamma*/rho undefined (improve excitation or constraints)\n");
    }

    EtaSelection sel = select_eta(c_star_of, tau_c, zeta, gains);
    std::printf("eta doubling (tau_c=%g, zeta=%g): eta=%g c*(eta)=%.4g [%s]\n", tau_c, zeta,
                sel.eta, sel.c_star, sel.note.c_str());

    if (gamma_des > 0) {
        try {
            const double beta = select_beta(gamma_des, gains.alpha, 0.75, c_star_of(gains.eta));
            std::printf("beta for gamma_des=%g: beta=%.6g\n", gamma_des, beta);
        } catch (const ZeroCurvatureError&) {
            std::printf("advisory: zero curvature, cannot size beta for gamma_des=%g\n",
                        gamma_des);
        }
    }
    if (omega_max > 0 && error_ratio > 0) {
        try {
            const double beta = select_beta_for_error_ratio(omega_max, error_ratio, gains.alpha,
                                                            0.75, c_star_of(gains.eta));
            std::printf("beta for |E|/A<=%g at omega<=%g: beta>=%.6g\n", error_ratio, omega_max,
                        beta);
        } catch (const ZeroCurvatureError&) {
            std::printf("advisory: zero curvature, frequency-domain beta bound undefined\n");
        }
    }
    return 0;
}

int cmd_bode(const std::string& config_path, const std::string& out_path, double w_min,
             double w_max, int points) {
    MsdParams params;
    if (!config_path.empty()) {
        RunConfig cfg = load_config_file(config_path);
        params = cfg.scenario.base.plant;
    }
    std::vector<double> omegas;
    if (points < 1) throw ConfigError("bode: points must be >= 1");
    if (points == 1) {
        omegas.push_back(w_min);
    } else {
        const double ratio = std::log(w_max / w_min) / (points - 1);
        for (int i = 0; i < points; ++i) omegas.push_back(w_min * std::exp(ratio * i));
    }
    std::vector<BodePoint> resp = bode_d_to_x2(params, omegas);
    if (out_path.empty()) {
        std::printf("omega,magnitude,phase_deg\n");
        for (const auto& pt : resp)
            std::printf("%s,%s,%s\n", format_double(pt.omega).c_str(),
                        format_double(pt.magnitude).c_str(),
                        format_double(pt.phase_deg).c_str());
    } else {
        CsvWriter csv(out_path);
        csv.header({"omega", "magnitude", "phase_deg"});
        for (const auto& pt : resp) csv.row({pt.omega, pt.magnitude, pt.phase_deg});
        std::printf("wrote %s (%zu rows)\n", out_path.c_str(), resp.size());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Projector-based Hopfield estimators for online constrained "
                 "parameter estimation: runs, Monte Carlo sweeps, tuning, Bode"};
    app.require_subcommand(1);

    CommonFlags flags;

    auto add_common = [&](CLI::App* sub, bool need_config) {
        auto* opt = sub->add_option("--config", flags.config_path, "JSON config file");
        if (need_config) opt->required();
        sub->add_option("--out", flags.out_dir, "output directory");
        sub->add_option("--seed", flags.seed, "master seed override");
        sub->add_option("--trials", flags.trials, "trial count override");
        sub->add_option("--horizon", flags.horizon, "horizon override [s]");
        sub->add_option("--emit-every", flags.emit_every, "trace decimation override");
        sub->add_option("--workers", flags.workers, "worker threads (default: hardware)");
        sub->add_option("--integrator", flags.integrator, "HNN integrator {rk4|euler}")
            ->check(CLI::IsMember({"rk4", "euler"}));
    };

    CLI::App* run = app.add_subcommand("run", "single experiment, time-series CSV");
    add_common(run, true);

    CLI::App* mc = app.add_subcommand("montecarlo", "paired-seed Monte Carlo sweep");
    add_common(mc, true);

    double gamma_des = 0.0, omega_max = 0.0, error_ratio = 0.0, tau_c = 0.05, zeta = 0.6;
    CLI::App* tune = app.add_subcommand("tune", "stability/tuning report from a probe run");
    add_common(tune, true);
    tune->add_option("--gamma-des", gamma_des, "desired closed-loop bandwidth");
    tune->add_option("--omega-max", omega_max, "largest excitation frequency");
    tune->add_option("--error-ratio", error_ratio, "desired steady error ratio");
    tune->add_option("--tau-c", tau_c, "curvature threshold for eta doubling");
    tune->add_option("--zeta", zeta, "RK4 step margin for eta doubling");

    std::string bode_config, bode_out;
    double w_min = 0.01, w_max = 10.0;
    int points = 400;
    CLI::App* bode = app.add_subcommand("bode", "d->x2 frequency response CSV");
    bode->add_option("--config", bode_config, "JSON config (plant parameters)");
    bode->add_option("--out", bode_out, "output CSV (default stdout)");
    bode->add_option("--omega-min", w_min, "grid start [rad/s]");
    bode->add_option("--omega-max", w_max, "grid end [rad/s]");
    bode->add_option("--points", points, "log-spaced grid size");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(flags);
        if (mc->parsed()) return cmd_montecarlo(flags);
        if (tune->parsed()) return cmd_tune(flags, gamma_des, omega_max, error_ratio, tau_c, zeta);
        if (bode->parsed()) return cmd_bode(bode_config, bode_out, w_min, w_max, points);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    }
    return 0;
}
