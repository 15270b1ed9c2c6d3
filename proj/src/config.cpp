#include "dorl/config.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "dorl/rng.hpp"

namespace dorl {

namespace {

using nlohmann::json;

struct Collector {
    std::vector<std::string> issues;
    void add(const std::string& path, const std::string& msg) { issues.push_back(path + ": " + msg); }
    bool ok() const { return issues.empty(); }
};

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed, Collector& c) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) known = true;
        if (!known) c.add(path + "." + it.key(), "unknown field");
    }
}

template <typename T>
bool read_field(const json& obj, const std::string& path, const char* key, T& out, Collector& c) {
    auto it = obj.find(key);
    if (it == obj.end()) return false;
    try {
        out = it->get<T>();
        return true;
    } catch (const json::exception&) {
        c.add(path + "." + key, "wrong type");
        return false;
    }
}

std::vector<int> resolve_signs(const EnvConfig& env, std::size_t count) {
    if (!env.signs.empty()) return env.signs;
    std::vector<int> v(count);
    Rng rng(derive_seed(env.sign_seed, kStreamSigns, 0));
    for (auto& s : v) s = rng.bernoulli(0.5) ? 1 : -1;
    return v;
}

double delta_cap(const EnvConfig& env, long long run_size) {
    if (env.kind == "hard_bandit") {
        return env.r_max / (4.0 * std::sqrt(env.lambda_min * static_cast<double>(run_size)));
    }
    if (env.kind == "hard_episodic") {
        double span = env.horizon - env.level;
        return span * env.r_max / (2.0 * std::sqrt(env.lambda_min * env.states));
    }
    if (env.kind == "hard_nonepisodic") {
        if (env.jump_prob >= 1.0) return 0.0;
        double ratio = (1.0 - env.gamma + env.jump_prob * env.gamma) / (1.0 - env.jump_prob);
        return env.r_max / (198.0 * std::sqrt(env.lambda_min * env.states) * ratio);
    }
    return 0.0;
}

NoiseKind noise_from_name(const std::string& name) {
    if (name == "uniform") return NoiseKind::Uniform;
    if (name == "truncated_gaussian") return NoiseKind::TruncatedGaussian;
    if (name == "two_point") return NoiseKind::TwoPoint;
    throw BadParams("unknown noise kind '" + name + "'");
}

const std::vector<std::string> kEnvKinds = {"hard_bandit",    "hard_episodic",
                                            "hard_nonepisodic", "adversarial_td",
                                            "generic_bandit", "generic_nonepisodic"};

bool env_kind_valid(const std::string& k) {
    return std::find(kEnvKinds.begin(), kEnvKinds.end(), k) != kEnvKinds.end();
}

std::string expected_algo_for(const std::string& env_kind) {
    if (env_kind == "hard_bandit" || env_kind == "generic_bandit") return "lse";
    if (env_kind == "hard_episodic") return "mc_lse";
    return "td";
}

}  // namespace

EnvironmentSpec build_environment(const EnvConfig& env, long long run_size) {
    double delta = env.delta;
    if (env.delta_auto) delta = 0.5 * delta_cap(env, run_size);

    if (env.kind == "hard_bandit") {
        auto signs = resolve_signs(env, static_cast<std::size_t>(env.arms) * env.dim);
        return hard_bandit(env.arms, env.dim, static_cast<int>(run_size), env.lambda_min,
                           env.r_max, delta, signs);
    }
    if (env.kind == "hard_episodic") {
        auto signs = resolve_signs(env, static_cast<std::size_t>(env.dim));
        return hard_episodic(env.states, env.dim, env.horizon, env.level,
                             static_cast<int>(run_size), env.lambda_min, env.r_max, delta, signs);
    }
    if (env.kind == "hard_nonepisodic") {
        auto signs = resolve_signs(env, static_cast<std::size_t>(env.dim));
        return hard_nonepisodic(env.states, env.dim, env.gamma, env.jump_prob, env.lambda_min,
                                env.r_max, delta, signs);
    }
    if (env.kind == "adversarial_td") {
        return adversarial_td_bias_env(env.theta_hat_0, env.states, env.gamma, env.r_max,
                                       env.lambda_min);
    }
    if (env.kind == "generic_bandit") {
        FeatureMatrix f = make_orthogonal_features(static_cast<int>(run_size), env.dim,
                                                   env.lambda_min);
        return generic_bandit(std::move(f), env.theta, env.arms, env.r_max,
                              noise_from_name(env.noise), env.noise_width);
    }
    if (env.kind == "generic_nonepisodic") {
        FeatureMatrix f = make_orthogonal_features(env.states, env.dim, env.lambda_min);
        return generic_nonepisodic(std::move(f), env.theta, env.r_max, env.gamma, env.jump_prob,
                                   noise_from_name(env.noise), env.noise_width);
    }
    throw BadParams("unknown environment kind '" + env.kind + "'");
}

ExperimentConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        int line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw SyntaxError(e.what(), line, col);
    }

    Collector c;
    ExperimentConfig cfg;
    if (!doc.is_object()) {
        c.add("$", "top level must be an object");
        throw ConfigError(std::move(c.issues));
    }
    check_keys(doc, "$", {"env", "algorithm", "comm", "run", "output"}, c);

    // --- env ---
    if (!doc.contains("env") || !doc["env"].is_object()) {
        c.add("env", "required object");
    } else {
        const json& e = doc["env"];
        check_keys(e, "env",
                   {"kind", "arms", "dim", "states", "horizon", "level", "r_max", "gamma",
                    "jump_prob", "lambda_min", "delta", "signs", "sign_seed", "theta",
                    "theta_hat_0", "noise", "noise_width"},
                   c);
        read_field(e, "env", "kind", cfg.env.kind, c);
        read_field(e, "env", "arms", cfg.env.arms, c);
        read_field(e, "env", "dim", cfg.env.dim, c);
        read_field(e, "env", "states", cfg.env.states, c);
        read_field(e, "env", "horizon", cfg.env.horizon, c);
        read_field(e, "env", "level", cfg.env.level, c);
        read_field(e, "env", "r_max", cfg.env.r_max, c);
        read_field(e, "env", "gamma", cfg.env.gamma, c);
        read_field(e, "env", "jump_prob", cfg.env.jump_prob, c);
        read_field(e, "env", "lambda_min", cfg.env.lambda_min, c);
        if (e.contains("delta")) {
            if (e["delta"].is_string()) {
                if (e["delta"].get<std::string>() == "auto")
                    cfg.env.delta_auto = true;
                else
                    c.add("env.delta", "must be a number or \"auto\"");
            } else if (e["delta"].is_number()) {
                cfg.env.delta = e["delta"].get<double>();
            } else {
                c.add("env.delta", "must be a number or \"auto\"");
            }
        }
        read_field(e, "env", "signs", cfg.env.signs, c);
        read_field(e, "env", "sign_seed", cfg.env.sign_seed, c);
        read_field(e, "env", "theta", cfg.env.theta, c);
        read_field(e, "env", "theta_hat_0", cfg.env.theta_hat_0, c);
        read_field(e, "env", "noise", cfg.env.noise, c);
        read_field(e, "env", "noise_width", cfg.env.noise_width, c);
    }

    // --- algorithm ---
    if (doc.contains("algorithm")) {
        if (!doc["algorithm"].is_object()) {
            c.add("algorithm", "must be an object");
        } else {
            const json& a = doc["algorithm"];
            check_keys(a, "algorithm", {"name", "theta0", "theta0_values", "omega_override"}, c);
            read_field(a, "algorithm", "name", cfg.algorithm.name, c);
            read_field(a, "algorithm", "theta0", cfg.algorithm.theta0, c);
            read_field(a, "algorithm", "theta0_values", cfg.algorithm.theta0_values, c);
            double omega = 0.0;
            if (read_field(a, "algorithm", "omega_override", omega, c))
                cfg.algorithm.omega_override = omega;
        }
    }

    // --- comm ---
    if (doc.contains("comm")) {
        if (!doc["comm"].is_object()) {
            c.add("comm", "must be an object");
        } else {
            const json& m = doc["comm"];
            check_keys(m, "comm", {"v_min", "v_max", "precision", "budget_bits"}, c);
            double v;
            if (read_field(m, "comm", "v_min", v, c)) cfg.comm.v_min = v;
            if (read_field(m, "comm", "v_max", v, c)) cfg.comm.v_max = v;
            if (read_field(m, "comm", "precision", v, c)) cfg.comm.precision = v;
            if (read_field(m, "comm", "budget_bits", v, c)) cfg.comm.budget_bits = v;
        }
    }

    // --- run ---
    if (!doc.contains("run") || !doc["run"].is_object()) {
        c.add("run", "required object");
    } else {
        const json& r = doc["run"];
        check_keys(r, "run",
                   {"machines", "size", "trials", "base_seed", "mode", "sweep_axis",
                    "sweep_values", "budgets"},
                   c);
        read_field(r, "run", "machines", cfg.run.machines, c);
        read_field(r, "run", "size", cfg.run.size, c);
        read_field(r, "run", "trials", cfg.run.trials, c);
        read_field(r, "run", "base_seed", cfg.run.base_seed, c);
        read_field(r, "run", "mode", cfg.run.mode, c);
        read_field(r, "run", "sweep_axis", cfg.run.sweep_axis, c);
        read_field(r, "run", "sweep_values", cfg.run.sweep_values, c);
        read_field(r, "run", "budgets", cfg.run.budgets, c);
    }

    // --- output ---
    if (doc.contains("output")) {
        if (!doc["output"].is_object()) {
            c.add("output", "must be an object");
        } else {
            const json& o = doc["output"];
            check_keys(o, "output", {"csv", "report"}, c);
            read_field(o, "output", "csv", cfg.output.csv_path, c);
            read_field(o, "output", "report", cfg.output.report_path, c);
        }
    }

    if (!c.ok()) throw ConfigError(std::move(c.issues));

    // --- semantic validation; every problem is collected before throwing ---
    const auto& env = cfg.env;
    if (!env_kind_valid(env.kind)) c.add("env.kind", "unknown environment kind '" + env.kind + "'");
    if (env.dim < 1) c.add("env.dim", "must be >= 1");
    if (!(env.r_max > 0.0)) c.add("env.r_max", "must be positive");

    bool algo_known = true;
    Algorithm algo = Algorithm::Lse;
    try {
        algo = algorithm_from_name(cfg.algorithm.name);
    } catch (const Error& err) {
        c.add("algorithm.name", err.what());
        algo_known = false;
    }
    if (algo_known && env_kind_valid(env.kind)) {
        std::string want = expected_algo_for(env.kind);
        if (cfg.algorithm.name != want)
            c.add("algorithm.name",
                  "environment kind '" + env.kind + "' pairs with algorithm '" + want + "'");
    }
    if (cfg.algorithm.theta0 != "zero" && cfg.algorithm.theta0 != "neg_theta" &&
        cfg.algorithm.theta0 != "explicit")
        c.add("algorithm.theta0", "must be zero | neg_theta | explicit");
    if (cfg.algorithm.theta0 == "explicit" &&
        cfg.algorithm.theta0_values.size() != static_cast<std::size_t>(env.dim))
        c.add("algorithm.theta0_values", "explicit theta0 must have env.dim entries");
    if (algo_known && algo != Algorithm::Td && cfg.algorithm.theta0 != "zero")
        c.add("algorithm.theta0", "initial iterates apply to TD only");
    if (cfg.algorithm.omega_override && !(*cfg.algorithm.omega_override > 0.0))
        c.add("algorithm.omega_override", "must be positive");

    if (cfg.comm.precision.has_value() == cfg.comm.budget_bits.has_value())
        c.add("comm", "exactly one of precision, budget_bits must be specified");
    double range_dim = env.r_max * env.dim;
    double v_min = cfg.comm.v_min.value_or(-range_dim);
    double v_max = cfg.comm.v_max.value_or(range_dim);
    if (!(v_max > v_min)) c.add("comm", "v_max must exceed v_min");
    if (cfg.comm.precision) {
        if (!(*cfg.comm.precision > 0.0))
            c.add("comm.precision", "must be positive");
        else if (*cfg.comm.precision > v_max - v_min)
            c.add("comm.precision", "exceeds the transmission range");
    }
    if (cfg.comm.budget_bits && !(*cfg.comm.budget_bits >= 0.0))
        c.add("comm.budget_bits", "must be nonnegative");

    if (cfg.run.machines < 1) c.add("run.machines", "must be >= 1");
    if (cfg.run.trials < 30)
        c.add("run.trials", "emitted reports need at least 30 trials per point");
    if (cfg.run.size < 1) c.add("run.size", "must be >= 1");
    if (cfg.run.mode != "risk" && cfg.run.mode != "sweep" && cfg.run.mode != "frontier")
        c.add("run.mode", "must be risk | sweep | frontier");

    if (cfg.run.mode == "sweep") {
        const auto& ax = cfg.run.sweep_axis;
        static const std::vector<std::string> axes = {"m", "n", "E", "B", "P", "bias"};
        if (std::find(axes.begin(), axes.end(), ax) == axes.end()) {
            c.add("run.sweep_axis", "must be one of m, n, E, B, P, bias");
        } else if (algo_known) {
            if (ax == "E" && algo != Algorithm::McLse)
                c.add("run.sweep_axis", "axis E applies to mc_lse only");
            if (ax == "bias" && algo != Algorithm::Td)
                c.add("run.sweep_axis", "axis bias applies to td only");
            if (ax == "n" && algo == Algorithm::McLse)
                c.add("run.sweep_axis", "sweep episodes via axis E for mc_lse");
        }
        if (cfg.run.sweep_values.size() < 3)
            c.add("run.sweep_values", "need at least three values");
        for (std::size_t i = 1; i < cfg.run.sweep_values.size(); ++i)
            if (!(cfg.run.sweep_values[i] > cfg.run.sweep_values[i - 1])) {
                c.add("run.sweep_values", "must be strictly increasing");
                break;
            }
    }
    if (cfg.run.mode == "frontier") {
        if (cfg.run.budgets.empty()) c.add("run.budgets", "frontier mode needs budgets");
        for (std::size_t i = 0; i < cfg.run.budgets.size(); ++i) {
            if (!(cfg.run.budgets[i] > 0.0)) {
                c.add("run.budgets", "budgets must be positive");
                break;
            }
            if (i > 0 && !(cfg.run.budgets[i] > cfg.run.budgets[i - 1])) {
                c.add("run.budgets", "budgets must be strictly increasing");
                break;
            }
        }
    }

    // Module preconditions: attempt the actual construction so constraint
    // violations (delta caps, divisibility, state counts) surface now with
    // a config path instead of mid-run.
    if (c.ok()) {
        try {
            build_environment(cfg.env, cfg.run.size);
        } catch (const Error& err) {
            c.add("env", err.what());
        }
    }

    if (!c.ok()) throw ConfigError(std::move(c.issues));
    return cfg;
}

std::string emit_config(const ExperimentConfig& cfg) {
    json e = json::object();
    e["kind"] = cfg.env.kind;
    e["arms"] = cfg.env.arms;
    e["dim"] = cfg.env.dim;
    e["states"] = cfg.env.states;
    e["horizon"] = cfg.env.horizon;
    e["level"] = cfg.env.level;
    e["r_max"] = cfg.env.r_max;
    e["gamma"] = cfg.env.gamma;
    e["jump_prob"] = cfg.env.jump_prob;
    e["lambda_min"] = cfg.env.lambda_min;
    if (cfg.env.delta_auto)
        e["delta"] = "auto";
    else
        e["delta"] = cfg.env.delta;
    if (!cfg.env.signs.empty()) e["signs"] = cfg.env.signs;
    e["sign_seed"] = cfg.env.sign_seed;
    if (!cfg.env.theta.empty()) e["theta"] = cfg.env.theta;
    if (!cfg.env.theta_hat_0.empty()) e["theta_hat_0"] = cfg.env.theta_hat_0;
    e["noise"] = cfg.env.noise;
    e["noise_width"] = cfg.env.noise_width;

    json a = json::object();
    a["name"] = cfg.algorithm.name;
    a["theta0"] = cfg.algorithm.theta0;
    if (!cfg.algorithm.theta0_values.empty()) a["theta0_values"] = cfg.algorithm.theta0_values;
    if (cfg.algorithm.omega_override) a["omega_override"] = *cfg.algorithm.omega_override;

    json m = json::object();
    if (cfg.comm.v_min) m["v_min"] = *cfg.comm.v_min;
    if (cfg.comm.v_max) m["v_max"] = *cfg.comm.v_max;
    if (cfg.comm.precision) m["precision"] = *cfg.comm.precision;
    if (cfg.comm.budget_bits) m["budget_bits"] = *cfg.comm.budget_bits;

    json r = json::object();
    r["machines"] = cfg.run.machines;
    r["size"] = cfg.run.size;
    r["trials"] = cfg.run.trials;
    r["base_seed"] = cfg.run.base_seed;
    r["mode"] = cfg.run.mode;
    if (!cfg.run.sweep_axis.empty()) r["sweep_axis"] = cfg.run.sweep_axis;
    if (!cfg.run.sweep_values.empty()) r["sweep_values"] = cfg.run.sweep_values;
    if (!cfg.run.budgets.empty()) r["budgets"] = cfg.run.budgets;

    json o = json::object();
    if (!cfg.output.csv_path.empty()) o["csv"] = cfg.output.csv_path;
    if (!cfg.output.report_path.empty()) o["report"] = cfg.output.report_path;

    json doc;
    doc["env"] = e;
    doc["algorithm"] = a;
    doc["comm"] = m;
    doc["run"] = r;
    doc["output"] = o;
    return doc.dump(2);
}

namespace {

QuantizerConfig quantizer_for(const ExperimentConfig& cfg) {
    double range_dim = cfg.env.r_max * cfg.env.dim;
    double v_min = cfg.comm.v_min.value_or(-range_dim);
    double v_max = cfg.comm.v_max.value_or(range_dim);
    double range = v_max - v_min;
    if (cfg.comm.precision) return QuantizerConfig{v_min, v_max, *cfg.comm.precision};
    double bits = *cfg.comm.budget_bits;
    auto levels = static_cast<std::int64_t>(std::floor(std::pow(2.0, bits) + 1e-9));
    if (levels < 1) throw BudgetTooSmall("budget allows fewer than one level");
    double p = levels == 1 ? range
                           : std::nextafter(range / static_cast<double>(levels),
                                            std::numeric_limits<double>::infinity());
    return QuantizerConfig{v_min, v_max, p};
}

std::optional<TdOptions> td_options_for(const ExperimentConfig& cfg, const EnvironmentSpec& env) {
    if (algorithm_from_name(cfg.algorithm.name) != Algorithm::Td) return std::nullopt;
    TdOptions td;
    if (cfg.algorithm.theta0 == "zero") {
        td.theta0.assign(env.true_theta.size(), 0.0);
    } else if (cfg.algorithm.theta0 == "neg_theta") {
        td.theta0.resize(env.true_theta.size());
        for (std::size_t i = 0; i < td.theta0.size(); ++i) td.theta0[i] = -env.true_theta[i];
    } else {
        td.theta0 = cfg.algorithm.theta0_values;
    }
    double omega = cfg.algorithm.omega_override
                       ? *cfg.algorithm.omega_override
                       : weighted_gram_min_eigenvalue(*env.features, env.stationary_dist);
    td.schedule = TdSchedule::from(env.gamma, omega);
    return td;
}

}  // namespace

ResolvedExperiment resolve(const ExperimentConfig& cfg) {
    ResolvedExperiment out;
    out.config = cfg;
    const Algorithm algo = algorithm_from_name(cfg.algorithm.name);
    const QuantizerConfig qcfg = quantizer_for(cfg);

    auto build_at = [cfg, algo, qcfg](const std::string& axis, double value) -> RunSpec {
        ExperimentConfig point = cfg;
        QuantizerConfig q = qcfg;
        if (axis == "m") {
            point.run.machines = static_cast<int>(value);
        } else if (axis == "n" || axis == "E") {
            point.run.size = static_cast<long long>(value);
        } else if (axis == "P") {
            q.precision = value;
        } else if (axis == "B") {
            point.comm.precision.reset();
            point.comm.budget_bits = value;
            q = quantizer_for(point);
        }
        EnvironmentSpec env = build_environment(point.env, point.run.size);
        std::optional<TdOptions> td = td_options_for(point, env);
        if (axis == "bias") {
            if (!td) throw BadAxis("bias axis applies to TD runs");
            Vec dir(env.true_theta.size());
            double nrm = 0.0;
            for (std::size_t i = 0; i < dir.size(); ++i) {
                dir[i] = env.true_theta[i] - td->theta0[i];
                nrm += dir[i] * dir[i];
            }
            nrm = std::sqrt(nrm);
            if (!(nrm > 1e-12))
                throw BadAxis("bias axis needs a nonzero theta - theta0 direction to scale");
            for (std::size_t i = 0; i < dir.size(); ++i)
                td->theta0[i] = env.true_theta[i] - value * dir[i] / nrm;
        }
        return make_run_spec(std::move(env), algo, point.run.machines, point.run.size, q,
                             std::move(td));
    };

    out.base = build_at("", 0.0);
    if (cfg.run.mode == "sweep") {
        out.axis_values = cfg.run.sweep_values;
        std::string axis = cfg.run.sweep_axis;
        out.point_builder = [build_at, axis](double v) { return build_at(axis, v); };
    } else if (cfg.run.mode == "frontier") {
        out.axis_values = cfg.run.budgets;
    }
    return out;
}

}  // namespace dorl
