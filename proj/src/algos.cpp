#include "dorl/algos.hpp"

#include <cmath>

#include "dorl/rng.hpp"

namespace dorl {

std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::Lse: return "lse";
        case Algorithm::McLse: return "mc_lse";
        case Algorithm::Td: return "td";
    }
    return "?";
}

Algorithm algorithm_from_name(const std::string& name) {
    if (name == "lse") return Algorithm::Lse;
    if (name == "mc_lse") return Algorithm::McLse;
    if (name == "td") return Algorithm::Td;
    throw BadParams("unknown algorithm '" + name + "'");
}

Vec lse_local(const BanditHistory& history) {
    const auto& x = *history.contexts;
    const int c = x.cols();
    Vec out(static_cast<std::size_t>(history.arms) * c);
    for (int a = 0; a < history.arms; ++a) {
        Vec r(history.rewards.begin() + static_cast<std::size_t>(a) * history.samples_per_arm,
              history.rewards.begin() + static_cast<std::size_t>(a + 1) * history.samples_per_arm);
        Vec theta;
        try {
            theta = least_squares(x, r);
        } catch (const RankDeficient& e) {
            throw RankDeficient("arm " + std::to_string(a) + ": " + e.what(), a);
        }
        for (int k = 0; k < c; ++k) out[static_cast<std::size_t>(a) * c + k] = theta[k];
    }
    return out;
}

Vec mc_lse_local(const EpisodicHistory& history, const FeatureMatrix& features) {
    const int s_count = history.level_states;
    if (features.rows() != s_count)
        throw DimensionMismatch("feature rows " + std::to_string(features.rows()) +
                                " do not match level state count " + std::to_string(s_count));
    Vec total_return(s_count, 0.0);
    std::vector<long long> visits(s_count, 0);
    std::vector<int> first_visit(s_count, -1);

    for (int ep = 0; ep < history.episodes(); ++ep) {
        const int lo = history.episode_offsets[ep];
        const int hi = history.episode_offsets[ep + 1];
        for (int t = lo; t < hi; ++t) {
            int s = history.steps[t].state;
            if (s >= 0 && first_visit[s] < 0) first_visit[s] = t;
        }
        // Suffix sums give the return from each first visit in one pass.
        double suffix = 0.0;
        for (int t = hi - 1; t >= lo; --t) {
            suffix += history.steps[t].reward;
            int s = history.steps[t].state;
            if (s >= 0 && first_visit[s] == t) {
                total_return[s] += suffix;
                ++visits[s];
                first_visit[s] = -1;
            }
        }
    }

    Vec mean_return(s_count);
    for (int s = 0; s < s_count; ++s) {
        if (visits[s] == 0)
            throw UnvisitedState("state " + std::to_string(s) + " never visited at its level");
        mean_return[s] = total_return[s] / static_cast<double>(visits[s]);
    }
    return least_squares(features, mean_return);
}

Vec td_local(const NonEpisodicHistory& history, const Vec& theta0, const TdSchedule& schedule,
             const FeatureMatrix& features) {
    if (history.transitions.empty()) throw BadParams("TD needs a nonempty history");
    if (static_cast<int>(theta0.size()) != features.cols())
        throw DimensionMismatch("theta0 length " + std::to_string(theta0.size()) +
                                " does not match feature dimension " +
                                std::to_string(features.cols()));
    const int c = features.cols();
    Vec theta = theta0;
    long long t = 1;
    for (const auto& tr : history.transitions) {
        if (tr.state < 0 || tr.state >= features.rows() || tr.next_state < 0 ||
            tr.next_state >= features.rows())
            throw DimensionMismatch("transition state id out of feature range");
        auto ct = features.row(tr.state);
        auto cn = features.row(tr.next_state);
        double td_error = tr.reward + schedule.gamma * dot(cn, theta) - dot(ct, theta);
        double alpha = schedule.step(t++);
        for (int k = 0; k < c; ++k) theta[k] += alpha * td_error * ct[k];
    }
    return theta;
}

namespace {

void pairwise_accumulate(const std::vector<Vec>& vs, std::size_t lo, std::size_t hi, Vec& out) {
    if (hi - lo == 1) {
        out = vs[lo];
        return;
    }
    std::size_t mid = lo + (hi - lo) / 2;
    Vec right;
    pairwise_accumulate(vs, lo, mid, out);
    pairwise_accumulate(vs, mid, hi, right);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += right[k];
}

}  // namespace

Vec pairwise_mean(const std::vector<Vec>& vectors) {
    if (vectors.empty()) throw BadParams("cannot average zero vectors");
    Vec sum;
    pairwise_accumulate(vectors, 0, vectors.size(), sum);
    const double inv = 1.0 / static_cast<double>(vectors.size());
    for (double& v : sum) v *= inv;
    return sum;
}

EstimateBundle run_distributed(const EnvironmentSpec& env, Algorithm algo, int machines,
                               long long size, const QuantizerConfig& qcfg,
                               std::uint64_t base_seed, const std::optional<TdOptions>& td) {
    if (machines < 1) throw BadParams("need at least one machine");
    qcfg.validate();
    switch (algo) {
        case Algorithm::Lse:
            if (env.kind != EnvKind::ContextualBandit)
                throw BadParams("LSE runs on contextual bandit environments");
            break;
        case Algorithm::McLse:
            if (env.kind != EnvKind::EpisodicMdp)
                throw BadParams("MC LSE runs on episodic environments");
            break;
        case Algorithm::Td:
            if (env.kind != EnvKind::NonEpisodicMdp)
                throw BadParams("TD runs on non-episodic environments");
            if (!td) throw BadParams("TD requires initial iterate and schedule options");
            break;
    }

    EstimateBundle bundle;
    bundle.messages.reserve(machines);
    bundle.total_bits_sent = 0.0;
    bundle.clamp_count = 0;
    std::vector<Vec> decoded(machines);
    for (int i = 0; i < machines; ++i) {
        std::uint64_t seed = derive_seed(base_seed, kStreamMachine, static_cast<std::uint64_t>(i));
        GameplayHistory history = sample_history(env, seed, size);
        Vec local;
        try {
            switch (algo) {
                case Algorithm::Lse:
                    local = lse_local(std::get<BanditHistory>(history));
                    break;
                case Algorithm::McLse:
                    local = mc_lse_local(std::get<EpisodicHistory>(history), *env.features);
                    break;
                case Algorithm::Td:
                    local = td_local(std::get<NonEpisodicHistory>(history), td->theta0,
                                     td->schedule, *env.features);
                    break;
            }
        } catch (const RankDeficient& e) {
            throw RankDeficient("machine " + std::to_string(i) + ": " + e.what(), e.arm_index);
        } catch (const UnvisitedState& e) {
            throw UnvisitedState("machine " + std::to_string(i) + ": " + e.what());
        }
        QuantizedMessage msg = quantize(local, qcfg);
        bundle.total_bits_sent += msg.total_bits;
        bundle.clamp_count += msg.clamp_count;
        decoded[i] = dequantize(msg);
        bundle.messages.push_back(std::move(msg));
    }
    bundle.final_estimate = pairwise_mean(decoded);
    return bundle;
}

double theoretical_bound(const BoundParams& p) {
    if (p.machines < 1 || !(p.r_max > 0.0) || !(p.lambda_min > 0.0) || p.precision < 0.0)
        throw BadParams("bound parameters must be positive");
    const double r_sq = p.r_max * p.r_max;
    switch (p.algo) {
        case Algorithm::Lse: {
            if (p.arms < 1 || p.dim < 1 || !(p.samples > 0)) throw BadParams("bad LSE parameters");
            double stat = r_sq / (p.machines * p.samples * p.lambda_min);
            return p.arms * p.dim * std::max(stat, p.precision);
        }
        case Algorithm::McLse: {
            if (p.dim < 1 || p.states < 1 || !(p.episodes > 0) || p.horizon <= p.level)
                throw BadParams("bad MC LSE parameters");
            double span = static_cast<double>(p.horizon - p.level);
            double stat = span * span * r_sq / (p.machines * p.states * p.episodes * p.lambda_min);
            return p.dim * std::max(stat, p.precision);
        }
        case Algorithm::Td: {
            if (p.dim < 1 || p.states < 1 || !(p.pi_min > 0.0) || !(p.gamma > 0.0) ||
                p.gamma >= 1.0 || !(p.samples > 0) || p.bias_sq < 0.0)
                throw BadParams("bad TD parameters");
            double variance = r_sq / (p.states * p.pi_min * p.lambda_min * p.machines);
            double nu = std::max(variance, p.bias_sq);
            double attenuation = 1.0 + (1.0 - p.gamma) * (1.0 - p.gamma) * p.samples;
            return std::max(nu / attenuation, p.dim * p.precision);
        }
    }
    throw BadParams("unknown algorithm");
}

double optimal_bits(const BoundParams& p) {
    const double r = p.r_max;
    switch (p.algo) {
        case Algorithm::Lse:
            return p.arms * p.dim *
                   std::log2(p.machines * p.samples * p.lambda_min / r);
        case Algorithm::McLse:
            return p.dim * std::log2(p.machines * p.states * p.episodes * p.lambda_min /
                                     ((p.horizon - p.level) * r));
        case Algorithm::Td: {
            double variance = r * r / (p.states * p.pi_min * p.lambda_min * p.machines);
            double nu = std::max(variance, p.bias_sq);
            return p.dim * std::log2(p.dim / nu);
        }
    }
    throw BadParams("unknown algorithm");
}

BoundParams bound_params_for(const EnvironmentSpec& env, Algorithm algo, int machines,
                             long long size, double precision, double bias_sq) {
    BoundParams p;
    p.algo = algo;
    p.arms = env.arms;
    p.dim = env.features->cols();
    p.r_max = env.r_max;
    p.machines = machines;
    p.lambda_min = env.lambda_min;
    p.precision = precision;
    switch (algo) {
        case Algorithm::Lse:
            p.samples = static_cast<double>(env.features->rows());
            break;
        case Algorithm::McLse:
            p.states = env.features->rows();
            p.episodes = static_cast<double>(size != 0 ? size : env.episodes_per_state);
            p.horizon = env.horizon;
            p.level = env.level;
            break;
        case Algorithm::Td: {
            p.states = env.features->rows();
            p.samples = static_cast<double>(size);
            p.gamma = env.gamma;
            double pi_min = 1.0;
            for (double w : env.stationary_dist) pi_min = std::min(pi_min, w);
            p.pi_min = pi_min;
            p.bias_sq = bias_sq;
            break;
        }
    }
    return p;
}

}  // namespace dorl
