#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dorl/envs.hpp"
#include "dorl/quantize.hpp"

namespace dorl {

enum class Algorithm { Lse, McLse, Td };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

/// The decaying step-size schedule alpha_t = beta / (Lambda + t / omega)
/// with beta = 2 / ((1-gamma) omega) and Lambda = 16 / ((1-gamma)^2 omega).
/// omega is the smallest eigenvalue of the stationary-weighted feature
/// covariance; a caller may pass a different omega to model a
/// misspecified schedule.
struct TdSchedule {
    double gamma;
    double omega;
    double beta;
    double capital_lambda;

    static TdSchedule from(double gamma, double omega) {
        if (!(gamma > 0.0) || gamma >= 1.0) throw BadParams("gamma must lie in (0, 1)");
        if (!(omega > 0.0)) throw BadParams("omega must be positive");
        TdSchedule s;
        s.gamma = gamma;
        s.omega = omega;
        s.beta = 2.0 / ((1.0 - gamma) * omega);
        s.capital_lambda = 16.0 / ((1.0 - gamma) * (1.0 - gamma) * omega);
        return s;
    }

    /// alpha_t, t counted from 1.
    double step(long long t) const {
        return beta / (capital_lambda + static_cast<double>(t) / omega);
    }
};

struct TdOptions {
    Vec theta0;  // shared initial iterate across machines
    TdSchedule schedule;
};

/// One full single-round protocol execution: the per-machine quantized
/// messages and the centrally averaged estimate.
struct EstimateBundle {
    std::vector<QuantizedMessage> messages;
    Vec final_estimate;
    double total_bits_sent;
    long long clamp_count;
};

/// Per-arm least squares on one machine's bandit history, concatenated
/// over arms. RankDeficient names the offending arm.
Vec lse_local(const BanditHistory& history);

/// First-visit Monte-Carlo mean returns per level-h state, then least
/// squares of those returns onto the feature rows.
Vec mc_lse_local(const EpisodicHistory& history, const FeatureMatrix& features);

/// One pass of TD(0) over the stored transitions, steps alpha_t from the
/// schedule with t starting at 1.
Vec td_local(const NonEpisodicHistory& history, const Vec& theta0, const TdSchedule& schedule,
             const FeatureMatrix& features);

/// Simulates m machines (machine i seeded from base_seed and i), runs the
/// local estimator, quantizes each local estimate and averages the
/// dequantized messages. Exactly one message per machine.
EstimateBundle run_distributed(const EnvironmentSpec& env, Algorithm algo, int machines,
                               long long size, const QuantizerConfig& qcfg,
                               std::uint64_t base_seed,
                               const std::optional<TdOptions>& td = std::nullopt);

/// Elementwise mean of the vectors by fixed-tree pairwise summation, so the
/// result is independent of any execution order of the inputs.
Vec pairwise_mean(const std::vector<Vec>& vectors);

/// Parameters for the worst-case risk upper bounds (constant factor 1).
struct BoundParams {
    Algorithm algo = Algorithm::Lse;
    int arms = 1;
    int dim = 1;
    double r_max = 1.0;
    int machines = 1;
    double samples = 1;      // n per arm (LSE), transitions (TD)
    double lambda_min = 1.0;
    int horizon = 0;
    int level = 0;
    int states = 0;          // S_h (MC LSE) or S (TD)
    double episodes = 0;     // E per state (MC LSE)
    double gamma = 0.0;
    double pi_min = 0.0;
    double bias_sq = 0.0;    // ||theta - mean theta_0||^2 (TD)
    double precision = 0.0;  // quantization precision P, 0 for lossless
};

/// Upper-bound formula value:
///   LSE    -> A C max{R^2/(m n lambda), P}
///   MC LSE -> C max{(H-h)^2 R^2 / (m S E lambda), P}
///   TD     -> max{ max{R^2/(S pi_min lambda m), bias^2} / (1+(1-gamma)^2 n), C P }
double theoretical_bound(const BoundParams& p);

/// The bit budget at which quantization stops mattering, per algorithm:
/// AC log2(mn lambda / R), C log2(m S E lambda / ((H-h) R)), C log2(C / nu).
double optimal_bits(const BoundParams& p);

/// Bound parameters implied by an environment and run shape.
BoundParams bound_params_for(const EnvironmentSpec& env, Algorithm algo, int machines,
                             long long size, double precision, double bias_sq);

}  // namespace dorl
