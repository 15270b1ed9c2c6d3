#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dorl/risk.hpp"

namespace dorl {

/// Carries every validation problem found in a config, not just the first.
struct ConfigError : Error {
    explicit ConfigError(std::vector<std::string> problems)
        : Error(join(problems)), issues(std::move(problems)) {}
    std::vector<std::string> issues;

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s = "config invalid:";
        for (const auto& p : v) s += "\n  - " + p;
        return s;
    }
};

struct SyntaxError : Error {
    SyntaxError(const std::string& msg, int line, int column)
        : Error("syntax error at line " + std::to_string(line) + ", column " +
                std::to_string(column) + ": " + msg),
          line(line),
          column(column) {}
    int line, column;
};

struct EnvConfig {
    std::string kind;  // hard_bandit | hard_episodic | hard_nonepisodic |
                       // adversarial_td | generic_bandit | generic_nonepisodic
    int arms = 1;
    int dim = 1;
    int states = 0;
    int horizon = 0;
    int level = 0;
    double r_max = 1.0;
    double gamma = 0.0;
    double jump_prob = 0.5;
    double lambda_min = 0.0;
    double delta = 0.0;
    bool delta_auto = false;  // delta chosen as half the admissible cap
    std::vector<int> signs;   // empty -> drawn from sign_seed
    std::uint64_t sign_seed = 1;
    Vec theta;        // generic envs
    Vec theta_hat_0;  // adversarial_td
    std::string noise = "uniform";
    double noise_width = 0.0;

    bool operator==(const EnvConfig&) const = default;
};

struct AlgorithmConfig {
    std::string name = "lse";     // lse | mc_lse | td
    std::string theta0 = "zero";  // zero | neg_theta | explicit
    Vec theta0_values;
    std::optional<double> omega_override;

    bool operator==(const AlgorithmConfig&) const = default;
};

struct CommConfig {
    std::optional<double> v_min;  // default -r_max * C
    std::optional<double> v_max;  // default +r_max * C
    std::optional<double> precision;
    std::optional<double> budget_bits;  // exactly one of precision/budget_bits

    bool operator==(const CommConfig&) const = default;
};

struct RunConfig {
    int machines = 1;
    long long size = 0;  // samples per arm | episodes per state | transitions
    long long trials = 1000;
    std::uint64_t base_seed = 1;
    std::string mode = "risk";  // risk | sweep | frontier
    std::string sweep_axis;
    std::vector<double> sweep_values;
    std::vector<double> budgets;

    bool operator==(const RunConfig&) const = default;
};

struct OutputConfig {
    std::string csv_path;
    std::string report_path;

    bool operator==(const OutputConfig&) const = default;
};

struct ExperimentConfig {
    EnvConfig env;
    AlgorithmConfig algorithm;
    CommConfig comm;
    RunConfig run;
    OutputConfig output;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Parses and fully validates a JSON config document. Throws SyntaxError on
/// malformed JSON and ConfigError listing every validation problem found.
ExperimentConfig parse_config(const std::string& text);

/// Emits the resolved config; parse_config(emit_config(c)) == c.
std::string emit_config(const ExperimentConfig& cfg);

/// Resolved pieces of a validated config, ready to run.
struct ResolvedExperiment {
    ExperimentConfig config;   // with defaults and auto fields filled
    RunSpec base;              // the point at the configured run shape
    std::vector<double> axis_values;              // sweep/frontier points
    std::function<RunSpec(double)> point_builder; // rebinds the swept axis
};

/// Builds the environment, quantizer and TD options implied by a validated
/// config. The returned builder is what sweep() consumes.
ResolvedExperiment resolve(const ExperimentConfig& cfg);

/// The environment alone (delta and signs resolved).
EnvironmentSpec build_environment(const EnvConfig& env, long long run_size);

}  // namespace dorl
