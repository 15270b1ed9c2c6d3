#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dorl/algos.hpp"

namespace dorl {

/// Everything needed to run one measurable configuration: environment,
/// algorithm, machine count, per-machine data size, quantizer, and the
/// matching theoretical-bound parameters.
struct RunSpec {
    EnvironmentSpec env;
    Algorithm algo = Algorithm::Lse;
    int machines = 1;
    long long size = 0;
    QuantizerConfig qcfg{-1.0, 1.0, 1.0};
    std::optional<TdOptions> td;
    BoundParams bound_params;
};

/// Fills in the bound parameters implied by the run shape. TD bias is taken
/// from the distance between the true parameter and the initial iterate.
RunSpec make_run_spec(EnvironmentSpec env, Algorithm algo, int machines, long long size,
                      QuantizerConfig qcfg, std::optional<TdOptions> td = std::nullopt);

struct RiskPoint {
    double axis_value;
    double mse_mean;
    double mse_stderr;
    long long trials;
    double theory_bound;

    bool operator==(const RiskPoint&) const = default;
};

struct RiskReport {
    std::string sweep_axis;  // m | n | E | B | P | bias
    std::vector<RiskPoint> points;
    double fitted_slope = 0.0;
    double slope_stderr = 0.0;
    std::optional<double> knee_budget;

    bool operator==(const RiskReport&) const = default;
};

/// Runs `count` tasks on up to `threads` workers. Outputs must be keyed by
/// the task index so results do not depend on scheduling.
void parallel_for(long long count, int threads, const std::function<void(long long)>& body);

/// Mean and standard error of ||theta_hat - theta||^2 over independent
/// full protocol simulations. Deterministic in base_seed and independent
/// of the worker count.
std::pair<double, double> estimate_risk(const RunSpec& spec, long long trials,
                                        std::uint64_t base_seed, int threads = 1);

/// Clamped components in one representative protocol round. A nonzero count
/// means the declared transmission range truncates the local estimates and
/// the measured risk is not the quantizer's alone.
long long probe_clamp_count(const RunSpec& spec, std::uint64_t base_seed);

/// Ordinary least squares of log(mse) on log(axis), solved with the same
/// normal-equation machinery as the estimators. Returns slope and its
/// standard error; NaNs when any mse is nonpositive.
std::pair<double, double> fit_loglog_slope(const std::vector<double>& xs,
                                           const std::vector<double>& ys);

/// One estimate_risk per axis value (the builder produces the RunSpec for
/// each value), with the theoretical bound attached per point and a fitted
/// log-log slope.
RiskReport sweep(const std::string& axis, const std::vector<double>& values,
                 const std::function<RunSpec(double)>& build, long long trials,
                 std::uint64_t base_seed, int threads = 1);

/// Risk versus per-machine bit budget over the base spec's transmission
/// range. Reports the knee: the smallest budget whose MSE is within 1.2x
/// of the lossless MSE.
RiskReport budget_frontier(const RunSpec& base, const std::vector<double>& budgets,
                           long long trials, std::uint64_t base_seed, int threads = 1);

/// CSV layout: header, one row per point, then `# slope=<v> stderr=<v>`
/// (and `# knee=<v>` for budget reports). All doubles printed with %.17g
/// so rereading is lossless.
void write_report_csv(std::ostream& os, const RiskReport& report);
RiskReport parse_report_csv(std::istream& is);

std::string report_to_json(const RiskReport& report);

}  // namespace dorl
