#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <variant>
#include <vector>

#include "dorl/linalg.hpp"

namespace dorl {

enum class EnvKind { ContextualBandit, EpisodicMdp, NonEpisodicMdp };

enum class RewardScheme {
    HardBernoulli,  // sign-coin rewards from the lower-bound constructions
    BoundedNoise,   // mean reward plus bounded zero-mean noise
};

enum class NoiseKind { Uniform, TruncatedGaussian, TwoPoint };

/// A fully specified data-generating process. Knows its own true parameter
/// vector, so risk can be measured against ground truth. Immutable after
/// construction and safe to share across workers.
struct EnvironmentSpec {
    EnvKind kind;
    Vec true_theta;  // per-arm concatenated for bandits
    std::shared_ptr<const FeatureMatrix> features;
    double r_max = 0.0;
    double lambda_min = 0.0;  // rescaled smallest Gram eigenvalue (eta_min / rows)

    // bandit
    int arms = 1;

    // episodic
    int horizon = 0;
    int level = 0;
    int episodes_per_state = 0;

    // non-episodic
    double gamma = 0.0;
    double jump_prob = 0.0;
    Vec stationary_dist;
    Vec stay_mean;     // mean reward when staying, per state
    Vec jump_reward;   // deterministic reward on leaving, per source state

    RewardScheme scheme = RewardScheme::HardBernoulli;
    NoiseKind noise_kind = NoiseKind::Uniform;
    double noise_width = 0.0;
    Vec state_mean;  // per-state mean reward for BoundedNoise non-episodic envs

    int dim() const { return features->cols(); }
    int theta_dim() const { return static_cast<int>(true_theta.size()); }
};

/// Stacked orthonormal-basis features: row i is sqrt(lambda) * e_(i mod C),
/// giving XtX = lambda * (N/C) * I with every row norm sqrt(lambda).
FeatureMatrix make_orthogonal_features(int n_rows, int dim, double lambda_min);

/// The contextual-bandit lower-bound instance: per arm, the first C context
/// vectors are sqrt(lambda*n) times the coordinate basis and the remaining
/// n-C are zero; rewards are +-r_max sign coins whose mean matches c.theta.
EnvironmentSpec hard_bandit(int arms, int dim, int samples_per_arm, double lambda_min,
                            double r_max, double delta, const std::vector<int>& signs);

/// The episodic lower-bound instance at level h: each episode starts at a
/// level-h state, a single coin picks the good or bad action, and the
/// remaining H-h steps all pay +r_max or all pay -r_max.
EnvironmentSpec hard_episodic(int level_states, int dim, int horizon, int level,
                              int episodes_per_state, double lambda_min, double r_max,
                              double delta, const std::vector<int>& signs);

/// The non-episodic lower-bound instance: stay with probability 1-p earning
/// a scaled sign-coin reward, otherwise jump uniformly to another state for
/// a deterministic reward chosen so the discounted values come out exactly
/// linear in the features. Requires S == C (the only overlap between the
/// S <= C statement and the full-rank feature condition).
EnvironmentSpec hard_nonepisodic(int states, int dim, double gamma, double jump_prob,
                                 double lambda_min, double r_max, double delta,
                                 const std::vector<int>& signs);

/// Worst-case initial-bias construction for TD: a non-episodic environment
/// whose true parameter is the negation of (the direction of) theta_hat_0,
/// rescaled to the largest admissible norm, with theta_hat_0 an eigenvector
/// of XtX at the smallest eigenvalue. Starting TD at -true_theta gives
/// initial bias squared of exactly 4 * ||theta||^2.
EnvironmentSpec adversarial_td_bias_env(const Vec& theta_hat_0, int states, double gamma,
                                        double r_max, double lambda_min);

/// Bandit with arbitrary (normalised) features and bounded reward noise.
EnvironmentSpec generic_bandit(FeatureMatrix features, Vec theta, int arms, double r_max,
                               NoiseKind noise, double noise_width);

/// Non-episodic MRP on the symmetric stay/jump kernel with arbitrary
/// (normalised) features; mean rewards are derived from the Bellman
/// identity so that values are exactly X theta.
EnvironmentSpec generic_nonepisodic(FeatureMatrix features, Vec theta, double r_max,
                                    double gamma, double jump_prob, NoiseKind noise,
                                    double noise_width);

// --- gameplay histories ---

struct BanditHistory {
    std::shared_ptr<const FeatureMatrix> contexts;  // shared per-arm design
    int arms = 0;
    int samples_per_arm = 0;
    std::vector<double> rewards;  // arm-major: rewards[a * samples_per_arm + l]
};

struct EpisodeStep {
    int state;  // level-h state id on the first step, -1 past level h
    int action;
    double reward;
};

struct EpisodicHistory {
    std::vector<EpisodeStep> steps;
    std::vector<int> episode_offsets;  // episodes + 1 entries
    int level_states = 0;

    int episodes() const { return static_cast<int>(episode_offsets.size()) - 1; }
};

struct NonEpisodicTransition {
    int state;
    int action;
    double reward;
    int next_state;
};

struct NonEpisodicHistory {
    std::vector<NonEpisodicTransition> transitions;
};

using GameplayHistory = std::variant<BanditHistory, EpisodicHistory, NonEpisodicHistory>;

/// Draws one machine's gameplay history. Deterministic in (env, seed, size).
/// `size` is samples per arm for bandits (0 defaults to the env's design),
/// episodes per state for episodic (0 defaults to the env's E), and the
/// transition count for non-episodic environments (required).
GameplayHistory sample_history(const EnvironmentSpec& env, std::uint64_t machine_seed,
                               long long size = 0);

/// Chain rollout for the stationary-distribution and discounted-return
/// oracle tests; the estimator path never uses it.
struct ChainStep {
    int state;
    double reward;
};
std::vector<ChainStep> sample_chain(const EnvironmentSpec& env, std::uint64_t seed,
                                    long long steps, int start_state);

/// Exact discounted state values X theta for non-episodic environments.
Vec nonepisodic_values(const EnvironmentSpec& env);

/// Line-oriented record dump (documented header, one sample per line).
void write_history(std::ostream& os, const GameplayHistory& history);

}  // namespace dorl
