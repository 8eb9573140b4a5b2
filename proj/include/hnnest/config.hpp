#pragma once

#include <hnnest/experiments.hpp>

#include <json.hpp>

#include <fstream>
#include <set>
#include <string>

namespace hnnest {

class ConfigError : public Error {
public:
    using Error::Error;
};

using json = nlohmann::json;

/// Parsed experiment description: a scenario (montecarlo mode) or a single
/// run (run mode, using the scenario's base spec).
struct RunConfig {
    std::string mode = "run";  // "run" | "montecarlo"
    ScenarioConfig scenario;
    int workers = 0;
};

namespace cfg_detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::string& ctx) {
    if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError(ctx + ": unknown key '" + it.key() + "'");
}

inline double num(const json& j, const std::string& ctx) {
    if (!j.is_number()) throw ConfigError(ctx + ": expected a number");
    return j.get<double>();
}

inline Vector vec(const json& j, const std::string& ctx) {
    if (!j.is_array()) throw ConfigError(ctx + ": expected an array");
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = num(j[i], ctx);
    return v;
}

inline GainConfig parse_gains(const json& j, const std::string& ctx) {
    GainConfig g;
    if (j.contains("alpha")) g.alpha = num(j["alpha"], ctx + ".alpha");
    if (j.contains("beta")) g.beta = num(j["beta"], ctx + ".beta");
    if (j.contains("eta")) g.eta = num(j["eta"], ctx + ".eta");
    if (j.contains("integrator")) {
        const std::string s = j["integrator"].get<std::string>();
        if (s == "rk4")
            g.integrator = Integrator::rk4;
        else if (s == "euler")
            g.integrator = Integrator::euler;
        else
            throw ConfigError(ctx + ".integrator: must be rk4 or euler");
    }
    return g;
}

inline MonitorConfig parse_monitor(const json& j, const std::string& ctx) {
    check_keys(j,
               {"enabled", "tau_warn", "tau_freeze", "leak", "eta_cap_factor", "eta_decay",
                "zeta", "anchor_dwell"},
               ctx);
    MonitorConfig m;
    if (j.contains("enabled")) m.enabled = j["enabled"].get<bool>();
    if (j.contains("tau_warn")) m.tau_warn = num(j["tau_warn"], ctx);
    if (j.contains("tau_freeze")) m.tau_freeze = num(j["tau_freeze"], ctx);
    if (j.contains("leak")) m.leak = num(j["leak"], ctx);
    if (j.contains("eta_cap_factor")) m.eta_cap_factor = num(j["eta_cap_factor"], ctx);
    if (j.contains("eta_decay")) m.eta_decay_per_second = num(j["eta_decay"], ctx);
    if (j.contains("zeta")) m.zeta = num(j["zeta"], ctx);
    if (j.contains("anchor_dwell")) m.anchor_dwell = num(j["anchor_dwell"], ctx);
    return m;
}

inline EstimatorSpec parse_estimator(const json& j, const std::string& ctx) {
    check_keys(j,
               {"kind", "label", "alpha", "beta", "eta", "integrator", "monitor",
                "track_stability", "feasibility", "lambda", "p0", "q_theta", "q_d", "r", "p0_theta",
                "decimation", "horizon", "rho", "sigma_w", "sigma_d0", "vel_filter",
                "max_iterations"},
               ctx);
    if (!j.contains("kind")) throw ConfigError(ctx + ": missing 'kind'");
    const std::string kind = j["kind"].get<std::string>();
    EstimatorSpec spec;
    if (j.contains("label")) spec.label = j["label"].get<std::string>();

    if (kind == "ca_hnn" || kind == "ca2_hnn" || kind == "ls_hnn") {
        spec.kind = kind == "ca_hnn" ? EstimatorKind::ca_hnn
                    : kind == "ca2_hnn" ? EstimatorKind::ca2_hnn
                                        : EstimatorKind::ls_hnn;
        spec.gains = parse_gains(j, ctx);
        if (j.contains("monitor")) spec.monitor = parse_monitor(j["monitor"], ctx + ".monitor");
        if (j.contains("track_stability")) spec.track_stability = j["track_stability"].get<bool>();
        if (j.contains("feasibility")) {
            const std::string f = j["feasibility"].get<std::string>();
            if (f == "projected")
                spec.project_outputs = true;
            else if (f == "free")
                spec.project_outputs = false;
            else
                throw ConfigError(ctx + ".feasibility: must be 'projected' or 'free'");
        }
    } else if (kind == "pb_rls") {
        spec.kind = EstimatorKind::pb_rls;
        if (j.contains("lambda")) spec.rls.lambda = num(j["lambda"], ctx + ".lambda");
        if (j.contains("p0")) spec.rls.p0 = num(j["p0"], ctx + ".p0");
    } else if (kind == "da_pb_kf") {
        spec.kind = EstimatorKind::da_pb_kf;
        if (j.contains("q_theta")) {
            if (j["q_theta"].is_array())
                spec.kf.q_theta = vec(j["q_theta"], ctx + ".q_theta");
            else
                spec.kf.q_theta = Vector::Constant(4, num(j["q_theta"], ctx + ".q_theta"));
        }
        if (j.contains("q_d")) spec.kf.q_d = num(j["q_d"], ctx + ".q_d");
        if (j.contains("r")) spec.kf.r = num(j["r"], ctx + ".r");
        if (j.contains("p0_theta")) spec.kf.p0_theta = num(j["p0_theta"], ctx + ".p0_theta");
    } else if (kind == "da_pb_mhe") {
        spec.kind = EstimatorKind::da_pb_mhe;
        if (j.contains("decimation"))
            spec.mhe.decimation = static_cast<int>(num(j["decimation"], ctx));
        if (j.contains("horizon")) spec.mhe.horizon = static_cast<int>(num(j["horizon"], ctx));
        if (j.contains("r")) spec.mhe.r = num(j["r"], ctx + ".r");
        if (j.contains("q_theta")) spec.mhe.q_theta = vec(j["q_theta"], ctx + ".q_theta");
        if (j.contains("rho")) spec.mhe.rho_ar = num(j["rho"], ctx + ".rho");
        if (j.contains("sigma_w")) spec.mhe.sigma_w = num(j["sigma_w"], ctx + ".sigma_w");
        if (j.contains("sigma_d0")) spec.mhe.sigma_d0 = num(j["sigma_d0"], ctx + ".sigma_d0");
        if (j.contains("p0_theta")) spec.mhe.p0_theta = vec(j["p0_theta"], ctx + ".p0_theta");
        if (j.contains("vel_filter")) spec.mhe.vel_filter_pole = num(j["vel_filter"], ctx);
        if (j.contains("max_iterations"))
            spec.mhe.max_iterations = static_cast<int>(num(j["max_iterations"], ctx));
    } else {
        throw ConfigError(ctx + ": unknown estimator kind '" + kind + "'");
    }
    return spec;
}

} // namespace cfg_detail

inline RunConfig parse_config(const json& j) {
    using namespace cfg_detail;
    check_keys(j,
               {"mode", "scenario", "trials", "seed", "horizon", "h", "emit_every", "dwell",
                "workers", "plant", "theta0", "box", "row_normalize", "disturbance",
                "k1_schedule", "ranges", "estimators"},
               "config");
    RunConfig cfg;
    if (j.contains("mode")) {
        cfg.mode = j["mode"].get<std::string>();
        if (cfg.mode != "run" && cfg.mode != "montecarlo")
            throw ConfigError("config.mode: must be 'run' or 'montecarlo'");
    }
    ScenarioConfig& sc = cfg.scenario;
    RunSpec& run = sc.base;

    if (j.contains("scenario")) sc.id = j["scenario"].get<std::string>();
    if (j.contains("trials")) sc.trials = static_cast<int>(num(j["trials"], "config.trials"));
    if (j.contains("seed")) {
        sc.master_seed = j["seed"].get<std::uint64_t>();
        run.seed = sc.master_seed;
    }
    if (j.contains("horizon")) run.horizon = num(j["horizon"], "config.horizon");
    if (j.contains("h")) run.h = num(j["h"], "config.h");
    if (j.contains("emit_every"))
        run.emit_every = static_cast<int>(num(j["emit_every"], "config.emit_every"));
    if (j.contains("dwell")) run.metrics_dwell = num(j["dwell"], "config.dwell");
    if (j.contains("workers")) cfg.workers = static_cast<int>(num(j["workers"], "config.workers"));

    if (j.contains("plant")) {
        const json& p = j["plant"];
        check_keys(p, {"m1", "m2", "k1", "b1", "k2", "b2", "x0"}, "config.plant");
        if (p.contains("m1")) run.plant.m1 = num(p["m1"], "plant.m1");
        if (p.contains("m2")) run.plant.m2 = num(p["m2"], "plant.m2");
        if (p.contains("k1")) run.plant.k1 = num(p["k1"], "plant.k1");
        if (p.contains("b1")) run.plant.b1 = num(p["b1"], "plant.b1");
        if (p.contains("k2")) run.plant.k2 = num(p["k2"], "plant.k2");
        if (p.contains("b2")) run.plant.b2 = num(p["b2"], "plant.b2");
        if (p.contains("x0")) {
            run.x0 = vec(p["x0"], "plant.x0");
            if (run.x0.size() != 4) throw ConfigError("plant.x0: expected 4 entries");
        }
    }
    if (j.contains("theta0")) run.theta0 = vec(j["theta0"], "config.theta0");
    if (j.contains("box")) {
        const json& b = j["box"];
        check_keys(b, {"lower", "upper"}, "config.box");
        BoxConstraints box;
        box.lower = vec(b.at("lower"), "box.lower");
        box.upper = vec(b.at("upper"), "box.upper");
        run.box = box;
    }
    if (j.contains("row_normalize"))
        run.row_normalize_constraints = j["row_normalize"].get<bool>();
    if (j.contains("disturbance")) {
        const json& d = j["disturbance"];
        check_keys(d, {"kind", "mu", "sigma2"}, "config.disturbance");
        const std::string kind = d.at("kind").get<std::string>();
        if (kind == "none")
            run.disturbance.kind = DisturbanceSpec::Kind::none;
        else if (kind == "gaussian")
            run.disturbance.kind = DisturbanceSpec::Kind::gaussian;
        else
            throw ConfigError("disturbance.kind: must be none or gaussian");
        if (d.contains("mu")) run.disturbance.mu = num(d["mu"], "disturbance.mu");
        if (d.contains("sigma2")) run.disturbance.sigma2 = num(d["sigma2"], "disturbance.sigma2");
    }
    if (j.contains("k1_schedule")) {
        const json& s = j["k1_schedule"];
        check_keys(s, {"kind", "omega"}, "config.k1_schedule");
        const std::string kind = s.at("kind").get<std::string>();
        if (kind == "constant")
            run.k1_sched.kind = ParameterSchedule::Kind::constant;
        else if (kind == "cosine")
            run.k1_sched.kind = ParameterSchedule::Kind::cosine;
        else
            throw ConfigError("k1_schedule.kind: must be constant or cosine");
        if (s.contains("omega")) run.k1_sched.omega = num(s["omega"], "k1_schedule.omega");
    }
    if (j.contains("ranges")) {
        const json& r = j["ranges"];
        check_keys(r, {"mu", "sigma2", "omega"}, "config.ranges");
        auto pair_of = [&](const json& a, double* dst, const std::string& ctx) {
            Vector v = vec(a, ctx);
            if (v.size() != 2) throw ConfigError(ctx + ": expected [lo, hi]");
            dst[0] = v(0);
            dst[1] = v(1);
        };
        if (r.contains("mu")) pair_of(r["mu"], sc.mu_range, "ranges.mu");
        if (r.contains("sigma2")) pair_of(r["sigma2"], sc.sigma2_range, "ranges.sigma2");
        if (r.contains("omega")) pair_of(r["omega"], sc.omega_range, "ranges.omega");
    }
    if (j.contains("estimators")) {
        if (!j["estimators"].is_array() || j["estimators"].empty())
            throw ConfigError("config.estimators: expected a non-empty array");
        for (std::size_t i = 0; i < j["estimators"].size(); ++i)
            run.estimators.push_back(cfg_detail::parse_estimator(
                j["estimators"][i], "estimators[" + std::to_string(i) + "]"));
    }
    if (run.estimators.empty())
        throw ConfigError("config: at least one estimator is required");
    return cfg;
}

inline json serialize_config(const RunConfig& cfg) {
    const ScenarioConfig& sc = cfg.scenario;
    const RunSpec& run = sc.base;
    json j;
    j["mode"] = cfg.mode;
    j["scenario"] = sc.id;
    j["trials"] = sc.trials;
    j["seed"] = sc.master_seed;
    j["horizon"] = run.horizon;
    j["h"] = run.h;
    j["emit_every"] = run.emit_every;
    j["dwell"] = run.metrics_dwell;
    j["workers"] = cfg.workers;
    j["plant"] = {{"m1", run.plant.m1}, {"m2", run.plant.m2}, {"k1", run.plant.k1},
                  {"b1", run.plant.b1}, {"k2", run.plant.k2}, {"b2", run.plant.b2},
                  {"x0", std::vector<double>(run.x0.data(), run.x0.data() + run.x0.size())}};
    j["theta0"] = std::vector<double>(run.theta0.data(), run.theta0.data() + run.theta0.size());
    if (run.box) {
        j["box"] = {
            {"lower", std::vector<double>(run.box->lower.data(),
                                          run.box->lower.data() + run.box->lower.size())},
            {"upper", std::vector<double>(run.box->upper.data(),
                                          run.box->upper.data() + run.box->upper.size())}};
    }
    j["row_normalize"] = run.row_normalize_constraints;
    j["disturbance"] = {
        {"kind", run.disturbance.kind == DisturbanceSpec::Kind::none ? "none" : "gaussian"},
        {"mu", run.disturbance.mu},
        {"sigma2", run.disturbance.sigma2}};
    j["k1_schedule"] = {
        {"kind", run.k1_sched.kind == ParameterSchedule::Kind::constant ? "constant" : "cosine"},
        {"omega", run.k1_sched.omega}};
    j["ranges"] = {{"mu", {sc.mu_range[0], sc.mu_range[1]}},
                   {"sigma2", {sc.sigma2_range[0], sc.sigma2_range[1]}},
                   {"omega", {sc.omega_range[0], sc.omega_range[1]}}};
    json ests = json::array();
    for (const auto& e : run.estimators) {
        json je;
        je["kind"] = kind_name(e.kind);
        if (!e.label.empty()) je["label"] = e.label;
        switch (e.kind) {
            case EstimatorKind::ca_hnn:
            case EstimatorKind::ca2_hnn:
            case EstimatorKind::ls_hnn:
                je["alpha"] = e.gains.alpha;
                je["beta"] = e.gains.beta;
                je["eta"] = e.gains.eta;
                je["integrator"] = e.gains.integrator == Integrator::rk4 ? "rk4" : "euler";
                je["track_stability"] = e.track_stability;
                je["feasibility"] = e.project_outputs ? "projected" : "free";
                je["monitor"] = {{"enabled", e.monitor.enabled},
                                 {"tau_warn", e.monitor.tau_warn},
                                 {"tau_freeze", e.monitor.tau_freeze},
                                 {"leak", e.monitor.leak},
                                 {"eta_cap_factor", e.monitor.eta_cap_factor},
                                 {"eta_decay", e.monitor.eta_decay_per_second},
                                 {"zeta", e.monitor.zeta},
                                 {"anchor_dwell", e.monitor.anchor_dwell}};
                break;
            case EstimatorKind::pb_rls:
                je["lambda"] = e.rls.lambda;
                je["p0"] = e.rls.p0;
                break;
            case EstimatorKind::da_pb_kf:
                if (e.kf.q_theta.size() > 0)
                    je["q_theta"] = std::vector<double>(
                        e.kf.q_theta.data(), e.kf.q_theta.data() + e.kf.q_theta.size());
                je["q_d"] = e.kf.q_d;
                je["r"] = e.kf.r;
                je["p0_theta"] = e.kf.p0_theta;
                break;
            case EstimatorKind::da_pb_mhe:
                je["decimation"] = e.mhe.decimation;
                je["horizon"] = e.mhe.horizon;
                je["r"] = e.mhe.r;
                if (e.mhe.q_theta.size() > 0)
                    je["q_theta"] = std::vector<double>(
                        e.mhe.q_theta.data(), e.mhe.q_theta.data() + e.mhe.q_theta.size());
                je["rho"] = e.mhe.rho_ar;
                je["sigma_w"] = e.mhe.sigma_w;
                je["sigma_d0"] = e.mhe.sigma_d0;
                if (e.mhe.p0_theta.size() > 0)
                    je["p0_theta"] = std::vector<double>(
                        e.mhe.p0_theta.data(), e.mhe.p0_theta.data() + e.mhe.p0_theta.size());
                je["vel_filter"] = e.mhe.vel_filter_pole;
                je["max_iterations"] = e.mhe.max_iterations;
                break;
        }
        ests.push_back(std::move(je));
    }
    j["estimators"] = std::move(ests);
    return j;
}

inline RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return parse_config(j);
}

} // namespace hnnest
