#include "dorl/envs.hpp"

#include <cmath>
#include <cstdio>

#include "dorl/rng.hpp"

namespace dorl {

namespace {

void check_signs(const std::vector<int>& signs, std::size_t expected) {
    if (signs.size() != expected)
        throw BadDims("sign vector has length " + std::to_string(signs.size()) + ", expected " +
                      std::to_string(expected));
    for (int s : signs)
        if (s != 1 && s != -1) throw BadDims("sign vector entries must be +1 or -1");
}

double draw_noise(Rng& rng, NoiseKind kind, double width) {
    switch (kind) {
        case NoiseKind::Uniform:
            return rng.uniform(-width, width);
        case NoiseKind::TruncatedGaussian:
            return rng.truncated_gaussian(width / 3.0, width);
        case NoiseKind::TwoPoint:
            return rng.bernoulli(0.5) ? width : -width;
    }
    return 0.0;
}

int jump_target(Rng& rng, int from, int states) {
    auto idx = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(states - 1)));
    return idx >= from ? idx + 1 : idx;
}

}  // namespace

FeatureMatrix make_orthogonal_features(int n_rows, int dim, double lambda_min) {
    if (n_rows < 1 || dim < 1) throw BadDims("feature counts must be positive");
    if (n_rows % dim != 0)
        throw NotDivisible("row count " + std::to_string(n_rows) + " is not a multiple of the dimension " +
                           std::to_string(dim));
    if (!(lambda_min > 0.0) || lambda_min > 1.0)
        throw BadLambda("lambda_min must lie in (0, 1], got " + std::to_string(lambda_min));
    Matrix x(n_rows, dim);
    const double s = std::sqrt(lambda_min);
    for (int i = 0; i < n_rows; ++i) x(i, i % dim) = s;
    return FeatureMatrix::checked(std::move(x));
}

EnvironmentSpec hard_bandit(int arms, int dim, int samples_per_arm, double lambda_min,
                            double r_max, double delta, const std::vector<int>& signs) {
    if (arms < 1 || dim < 1) throw BadDims("arms and dimension must be positive");
    if (samples_per_arm < dim)
        throw BadDims("need at least C=" + std::to_string(dim) + " samples per arm, got " +
                      std::to_string(samples_per_arm));
    check_signs(signs, static_cast<std::size_t>(arms) * dim);
    if (!(lambda_min > 0.0)) throw BadLambda("lambda_min must be positive");
    if (!(r_max > 0.0)) throw BadParams("r_max must be positive");
    const double signal = std::abs(delta) * std::sqrt(lambda_min * samples_per_arm);
    if (signal > r_max / 4.0 + 1e-12)
        throw DeltaTooLarge("delta*sqrt(n*lambda)=" + std::to_string(signal) + " exceeds r_max/4=" +
                            std::to_string(r_max / 4.0));

    Matrix x(samples_per_arm, dim);
    const double scale = std::sqrt(lambda_min * samples_per_arm);
    for (int k = 0; k < dim; ++k) x(k, k) = scale;

    EnvironmentSpec env;
    env.kind = EnvKind::ContextualBandit;
    env.arms = arms;
    env.r_max = r_max;
    env.lambda_min = lambda_min;
    env.features = std::make_shared<const FeatureMatrix>(FeatureMatrix::from(std::move(x)));
    env.true_theta.resize(signs.size());
    for (std::size_t i = 0; i < signs.size(); ++i) env.true_theta[i] = delta * signs[i];
    env.scheme = RewardScheme::HardBernoulli;
    return env;
}

EnvironmentSpec hard_episodic(int level_states, int dim, int horizon, int level,
                              int episodes_per_state, double lambda_min, double r_max,
                              double delta, const std::vector<int>& signs) {
    if (level_states < dim || dim < 1)
        throw BadDims("need at least C=" + std::to_string(dim) + " level states, got " +
                      std::to_string(level_states));
    if (level < 0 || level >= horizon) throw BadDims("level must satisfy 0 <= h < H");
    if (episodes_per_state < 1) throw BadDims("episodes per state must be positive");
    check_signs(signs, static_cast<std::size_t>(dim));
    if (!(lambda_min > 0.0)) throw BadLambda("lambda_min must be positive");
    if (!(r_max > 0.0)) throw BadParams("r_max must be positive");
    const int steps = horizon - level;
    const double offset = std::sqrt(lambda_min * level_states) * std::abs(delta) /
                          (2.0 * steps * r_max);
    if (offset > 0.25 + 1e-12)
        throw DeltaTooLarge("Bernoulli mean offset " + std::to_string(offset) + " exceeds 1/4");

    Matrix x(level_states, dim);
    const double scale = std::sqrt(lambda_min * level_states);
    for (int k = 0; k < dim; ++k) x(k, k) = scale;

    EnvironmentSpec env;
    env.kind = EnvKind::EpisodicMdp;
    env.horizon = horizon;
    env.level = level;
    env.episodes_per_state = episodes_per_state;
    env.r_max = r_max;
    env.lambda_min = lambda_min;
    env.features = std::make_shared<const FeatureMatrix>(FeatureMatrix::from(std::move(x)));
    env.true_theta.resize(signs.size());
    for (std::size_t i = 0; i < signs.size(); ++i) env.true_theta[i] = delta * signs[i];
    env.scheme = RewardScheme::HardBernoulli;
    return env;
}

EnvironmentSpec hard_nonepisodic(int states, int dim, double gamma, double jump_prob,
                                 double lambda_min, double r_max, double delta,
                                 const std::vector<int>& signs) {
    if (states != dim)
        throw BadDims("the construction requires S == C (S <= C per the bound statement, S >= C "
                      "for a full-rank feature Gram); got S=" +
                      std::to_string(states) + ", C=" + std::to_string(dim));
    if (states < 2) throw BadDims("need at least two states");
    if (states > 99) throw BadDims("uniform stationary distribution needs pi_max > 0.01, so S <= 99");
    if (!(gamma > 0.0) || gamma >= 0.99)
        throw GammaTooLarge("gamma must lie in (0, 0.99), got " + std::to_string(gamma));
    if (jump_prob < 0.0 || jump_prob > 1.0) throw BadParams("jump probability must lie in [0, 1]");
    check_signs(signs, static_cast<std::size_t>(dim));
    if (!(lambda_min > 0.0)) throw BadLambda("lambda_min must be positive");
    if (!(r_max > 0.0)) throw BadParams("r_max must be positive");

    const double p = jump_prob;
    if (p == 1.0 && delta != 0.0)
        throw DeltaTooLarge("with p=1 the stay reward never occurs; only delta=0 is consistent");
    const double ratio = p < 1.0 ? (1.0 - gamma + p * gamma) / (1.0 - p) : 0.0;
    const double scale = std::sqrt(lambda_min * states);
    const double offset = p < 1.0 ? 99.0 * scale * std::abs(delta) * ratio / (2.0 * r_max) : 0.0;
    if (offset > 0.25 + 1e-12)
        throw DeltaTooLarge("Bernoulli mean offset " + std::to_string(offset) + " exceeds 1/4");

    Matrix x(states, dim);
    for (int k = 0; k < dim; ++k) x(k, k) = scale;

    EnvironmentSpec env;
    env.kind = EnvKind::NonEpisodicMdp;
    env.gamma = gamma;
    env.jump_prob = p;
    env.r_max = r_max;
    env.lambda_min = lambda_min;
    env.features = std::make_shared<const FeatureMatrix>(FeatureMatrix::from(std::move(x)));
    env.true_theta.resize(signs.size());
    for (std::size_t i = 0; i < signs.size(); ++i) env.true_theta[i] = delta * signs[i];
    env.scheme = RewardScheme::HardBernoulli;
    env.stationary_dist.assign(states, 1.0 / states);

    // Values are exactly linear: v(j) = c_j . theta. The stay reward mean
    // and the per-source jump reward are then pinned by the Bellman
    // identity for the stay/jump kernel.
    Vec values = mat_vec(env.features->matrix(), env.true_theta);
    double total = 0.0;
    for (double v : values) total += v;
    env.stay_mean.resize(states);
    env.jump_reward.resize(states);
    for (int j = 0; j < states; ++j) {
        env.stay_mean[j] = p < 1.0 ? values[j] * ratio : 0.0;
        env.jump_reward[j] = -gamma * (total - values[j]) / (states - 1);
        if (std::abs(env.jump_reward[j]) > r_max + 1e-12)
            throw BadParams("constructed jump reward exceeds r_max");
    }
    return env;
}

EnvironmentSpec generic_bandit(FeatureMatrix features, Vec theta, int arms, double r_max,
                               NoiseKind noise, double noise_width) {
    if (arms < 1) throw BadDims("arms must be positive");
    if (static_cast<int>(theta.size()) != arms * features.cols())
        throw BadDims("theta must have length arms * dim");
    if (!(r_max > 0.0)) throw BadParams("r_max must be positive");
    if (noise_width < 0.0) throw BadParams("noise width must be nonnegative");
    for (int a = 0; a < arms; ++a) {
        std::span<const double> th{theta.data() + static_cast<std::size_t>(a) * features.cols(),
                                   static_cast<std::size_t>(features.cols())};
        for (int i = 0; i < features.rows(); ++i) {
            double mean = dot(features.row(i), th);
            if (std::abs(mean) + noise_width > r_max + 1e-12)
                throw BadParams("mean reward plus noise width exceeds r_max for arm " +
                                std::to_string(a));
        }
    }

    EnvironmentSpec env;
    env.kind = EnvKind::ContextualBandit;
    env.arms = arms;
    env.r_max = r_max;
    env.lambda_min = features.min_eigenvalue_gram() / features.rows();
    env.features = std::make_shared<const FeatureMatrix>(std::move(features));
    env.true_theta = std::move(theta);
    env.scheme = RewardScheme::BoundedNoise;
    env.noise_kind = noise;
    env.noise_width = noise_width;
    return env;
}

EnvironmentSpec generic_nonepisodic(FeatureMatrix features, Vec theta, double r_max,
                                    double gamma, double jump_prob, NoiseKind noise,
                                    double noise_width) {
    const int states = features.rows();
    if (states < 2) throw BadDims("need at least two states");
    if (states > 99) throw BadDims("uniform stationary distribution needs pi_max > 0.01, so S <= 99");
    if (static_cast<int>(theta.size()) != features.cols())
        throw BadDims("theta must have the feature dimension");
    if (!(gamma > 0.0) || gamma >= 0.99)
        throw GammaTooLarge("gamma must lie in (0, 0.99), got " + std::to_string(gamma));
    if (jump_prob < 0.0 || jump_prob > 1.0) throw BadParams("jump probability must lie in [0, 1]");
    if (!(r_max > 0.0)) throw BadParams("r_max must be positive");
    if (noise_width < 0.0) throw BadParams("noise width must be nonnegative");

    Vec values = mat_vec(features.matrix(), theta);
    double total = 0.0;
    for (double v : values) total += v;

    EnvironmentSpec env;
    env.kind = EnvKind::NonEpisodicMdp;
    env.gamma = gamma;
    env.jump_prob = jump_prob;
    env.r_max = r_max;
    env.lambda_min = features.min_eigenvalue_gram() / states;
    env.features = std::make_shared<const FeatureMatrix>(std::move(features));
    env.true_theta = std::move(theta);
    env.scheme = RewardScheme::BoundedNoise;
    env.noise_kind = noise;
    env.noise_width = noise_width;
    env.stationary_dist.assign(states, 1.0 / states);
    env.state_mean.resize(states);
    for (int j = 0; j < states; ++j) {
        double next_value = (1.0 - jump_prob) * values[j] +
                            (states > 1 ? jump_prob * (total - values[j]) / (states - 1) : 0.0);
        env.state_mean[j] = values[j] - gamma * next_value;
        if (std::abs(env.state_mean[j]) + noise_width > r_max + 1e-12)
            throw BadParams("state " + std::to_string(j) +
                            " mean reward plus noise width exceeds r_max");
    }
    return env;
}

EnvironmentSpec adversarial_td_bias_env(const Vec& theta_hat_0, int states, double gamma,
                                        double r_max, double lambda_min) {
    const int dim = static_cast<int>(theta_hat_0.size());
    if (dim < 1) throw ZeroVector("theta_hat_0 is empty");
    double nrm = norm2(theta_hat_0);
    if (!(nrm > 1e-12)) throw ZeroVector("theta_hat_0 is numerically zero");
    if (states < dim || states % dim != 0)
        throw BadDims("state count must be a positive multiple of dim(theta_hat_0)");
    if (!(lambda_min > 0.0) || lambda_min * dim > 1.0 + 1e-9)
        throw BadLambda("need 0 < lambda_min <= 1/C so feature rows stay normalised");

    // Orthonormal frame whose rows all share the same projection 1/sqrt(C)
    // onto the direction of theta_hat_0: a Householder reflection mapping
    // that direction onto the normalised all-ones vector.
    Vec q(dim), b(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
    for (int i = 0; i < dim; ++i) q[i] = theta_hat_0[i] / nrm;
    Vec u(dim);
    double usq = 0.0;
    for (int i = 0; i < dim; ++i) {
        u[i] = q[i] - b[i];
        usq += u[i] * u[i];
    }
    Matrix w = Matrix::identity(dim);
    if (usq > 1e-24) {
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) w(i, j) -= 2.0 * u[i] * u[j] / usq;
    }

    const double row_scale = std::sqrt(lambda_min * dim);
    Matrix x(states, dim);
    for (int i = 0; i < states; ++i)
        for (int j = 0; j < dim; ++j) x(i, j) = row_scale * w(i % dim, j);

    // Every state then has value -s * sqrt(lambda_min); pick s so the mean
    // reward uses 3/4 of the reward budget, leaving the rest as noise.
    const double kappa = 0.75;
    const double theta_norm = kappa * r_max / ((1.0 - gamma) * std::sqrt(lambda_min));
    Vec theta(dim);
    for (int i = 0; i < dim; ++i) theta[i] = -theta_norm * q[i];

    return generic_nonepisodic(FeatureMatrix::checked(std::move(x)), std::move(theta), r_max,
                               gamma, 0.5, NoiseKind::TwoPoint, (1.0 - kappa) * r_max);
}

GameplayHistory sample_history(const EnvironmentSpec& env, std::uint64_t machine_seed,
                               long long size) {
    Rng rng(machine_seed);
    switch (env.kind) {
        case EnvKind::ContextualBandit: {
            const int n = env.features->rows();
            if (size != 0 && size != n)
                throw BadParams("bandit sample count is fixed by the design matrix (" +
                                std::to_string(n) + " per arm)");
            BanditHistory h;
            h.contexts = env.features;
            h.arms = env.arms;
            h.samples_per_arm = n;
            h.rewards.resize(static_cast<std::size_t>(env.arms) * n);
            const int c = env.features->cols();
            for (int a = 0; a < env.arms; ++a) {
                std::span<const double> th{env.true_theta.data() + static_cast<std::size_t>(a) * c,
                                           static_cast<std::size_t>(c)};
                for (int l = 0; l < n; ++l) {
                    double mean = dot(env.features->row(l), th);
                    double r;
                    if (env.scheme == RewardScheme::HardBernoulli) {
                        double p = 0.5 + mean / (2.0 * env.r_max);
                        r = rng.bernoulli(p) ? env.r_max : -env.r_max;
                    } else {
                        r = mean + draw_noise(rng, env.noise_kind, env.noise_width);
                    }
                    h.rewards[static_cast<std::size_t>(a) * n + l] = r;
                }
            }
            return h;
        }
        case EnvKind::EpisodicMdp: {
            const int episodes_per_state =
                size != 0 ? static_cast<int>(size) : env.episodes_per_state;
            if (episodes_per_state < 1) throw BadParams("episodes per state must be positive");
            const int s_h = env.features->rows();
            const int steps = env.horizon - env.level;
            EpisodicHistory h;
            h.level_states = s_h;
            h.steps.reserve(static_cast<std::size_t>(s_h) * episodes_per_state * steps);
            h.episode_offsets.reserve(static_cast<std::size_t>(s_h) * episodes_per_state + 1);
            h.episode_offsets.push_back(0);
            for (int j = 0; j < s_h; ++j) {
                double mean = dot(env.features->row(j), env.true_theta);
                double p_good = 0.5 + mean / (2.0 * steps * env.r_max);
                for (int e = 0; e < episodes_per_state; ++e) {
                    bool good = rng.bernoulli(p_good);
                    double r = good ? env.r_max : -env.r_max;
                    for (int t = 0; t < steps; ++t)
                        h.steps.push_back({t == 0 ? j : -1, good ? 1 : 0, r});
                    h.episode_offsets.push_back(static_cast<int>(h.steps.size()));
                }
            }
            return h;
        }
        case EnvKind::NonEpisodicMdp: {
            if (size < 1) throw BadParams("non-episodic histories need an explicit transition count");
            const int s = env.features->rows();
            NonEpisodicHistory h;
            h.transitions.reserve(static_cast<std::size_t>(size));
            for (long long t = 0; t < size; ++t) {
                int state = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(s)));
                bool jump = rng.bernoulli(env.jump_prob);
                int next = jump ? jump_target(rng, state, s) : state;
                double r;
                if (env.scheme == RewardScheme::HardBernoulli) {
                    if (jump) {
                        r = env.jump_reward[state];
                    } else {
                        double p_up = 0.5 + 99.0 * env.stay_mean[state] / (2.0 * env.r_max);
                        r = (rng.bernoulli(p_up) ? 1.0 : -1.0) * env.r_max / 99.0;
                    }
                } else {
                    r = env.state_mean[state] + draw_noise(rng, env.noise_kind, env.noise_width);
                }
                h.transitions.push_back({state, 0, r, next});
            }
            return h;
        }
    }
    throw BadParams("unknown environment kind");
}

std::vector<ChainStep> sample_chain(const EnvironmentSpec& env, std::uint64_t seed,
                                    long long steps, int start_state) {
    if (env.kind != EnvKind::NonEpisodicMdp)
        throw BadParams("chain rollouts are defined for non-episodic environments");
    const int s_count = env.features->rows();
    if (start_state < 0 || start_state >= s_count) throw BadParams("start state out of range");
    Rng rng(seed);
    std::vector<ChainStep> out;
    out.reserve(static_cast<std::size_t>(steps));
    int state = start_state;
    for (long long t = 0; t < steps; ++t) {
        bool jump = rng.bernoulli(env.jump_prob);
        int next = jump ? jump_target(rng, state, s_count) : state;
        double r;
        if (env.scheme == RewardScheme::HardBernoulli) {
            if (jump) {
                r = env.jump_reward[state];
            } else {
                double p_up = 0.5 + 99.0 * env.stay_mean[state] / (2.0 * env.r_max);
                r = (rng.bernoulli(p_up) ? 1.0 : -1.0) * env.r_max / 99.0;
            }
        } else {
            r = env.state_mean[state] + draw_noise(rng, env.noise_kind, env.noise_width);
        }
        out.push_back({state, r});
        state = next;
    }
    return out;
}

Vec nonepisodic_values(const EnvironmentSpec& env) {
    if (env.kind != EnvKind::NonEpisodicMdp)
        throw BadParams("state values are defined for non-episodic environments");
    return mat_vec(env.features->matrix(), env.true_theta);
}

namespace {

void append_double(std::string& line, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    line += buf;
}

}  // namespace

void write_history(std::ostream& os, const GameplayHistory& history) {
    if (const auto* b = std::get_if<BanditHistory>(&history)) {
        os << "# arm,sample";
        for (int j = 0; j < b->contexts->cols(); ++j) os << ",c" << j;
        os << ",reward\n";
        for (int a = 0; a < b->arms; ++a) {
            for (int l = 0; l < b->samples_per_arm; ++l) {
                std::string line = std::to_string(a) + "," + std::to_string(l);
                for (double c : b->contexts->row(l)) {
                    line += ',';
                    append_double(line, c);
                }
                line += ',';
                append_double(line, b->rewards[static_cast<std::size_t>(a) * b->samples_per_arm + l]);
                os << line << '\n';
            }
        }
    } else if (const auto* e = std::get_if<EpisodicHistory>(&history)) {
        os << "# episode,step,state,action,reward\n";
        for (int ep = 0; ep < e->episodes(); ++ep) {
            for (int t = e->episode_offsets[ep]; t < e->episode_offsets[ep + 1]; ++t) {
                const auto& st = e->steps[t];
                std::string line = std::to_string(ep) + "," +
                                   std::to_string(t - e->episode_offsets[ep]) + "," +
                                   std::to_string(st.state) + "," + std::to_string(st.action) + ",";
                append_double(line, st.reward);
                os << line << '\n';
            }
        }
    } else if (const auto* n = std::get_if<NonEpisodicHistory>(&history)) {
        os << "# t,state,action,reward,next_state\n";
        for (std::size_t t = 0; t < n->transitions.size(); ++t) {
            const auto& tr = n->transitions[t];
            std::string line = std::to_string(t) + "," + std::to_string(tr.state) + "," +
                               std::to_string(tr.action) + ",";
            append_double(line, tr.reward);
            line += ',' + std::to_string(tr.next_state);
            os << line << '\n';
        }
    }
}

}  // namespace dorl
