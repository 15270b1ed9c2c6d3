#include <doctest.h>

#include <cmath>

#include "dorl/algos.hpp"
#include "dorl/rng.hpp"

using namespace dorl;

namespace {

std::shared_ptr<const FeatureMatrix> shared_features(Matrix m) {
    return std::make_shared<const FeatureMatrix>(FeatureMatrix::from(std::move(m)));
}

}  // namespace

TEST_CASE("per-arm least squares with disjoint identity designs") {
    BanditHistory h;
    h.contexts = shared_features(Matrix::identity(2));
    h.arms = 2;
    h.samples_per_arm = 2;
    h.rewards = {1.0, 2.0, 3.0, 4.0};
    Vec theta = lse_local(h);
    REQUIRE(theta.size() == 4);
    CHECK(theta[0] == doctest::Approx(1.0));
    CHECK(theta[1] == doctest::Approx(2.0));
    CHECK(theta[2] == doctest::Approx(3.0));
    CHECK(theta[3] == doctest::Approx(4.0));
}

TEST_CASE("noiseless rewards recover theta exactly") {
    EnvironmentSpec env = generic_bandit(make_orthogonal_features(6, 3, 0.5),
                                         {0.2, -0.4, 0.1}, 1, 1.0, NoiseKind::Uniform, 0.0);
    auto h = std::get<BanditHistory>(sample_history(env, 5));
    Vec theta = lse_local(h);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(theta[k] - env.true_theta[k]) <= 1e-10);
}

TEST_CASE("zero-context arm raises RankDeficient naming the arm") {
    BanditHistory h;
    h.contexts = shared_features(Matrix(2, 1));
    h.arms = 2;
    h.samples_per_arm = 2;
    h.rewards = {1.0, 2.0, 3.0, 4.0};
    try {
        lse_local(h);
        FAIL("expected RankDeficient");
    } catch (const RankDeficient& e) {
        CHECK(e.arm_index == 0);
        CHECK(std::string(e.what()).find("arm 0") != std::string::npos);
    }
}

TEST_CASE("first-visit Monte-Carlo averages returns per state") {
    // single state with feature (1); two episodes with returns 2 and 4
    EpisodicHistory h;
    h.level_states = 1;
    h.steps = {{0, 0, 2.0}, {0, 0, 4.0}};
    h.episode_offsets = {0, 1, 2};
    FeatureMatrix f = FeatureMatrix::checked(Matrix::identity(1));
    Vec theta = mc_lse_local(h, f);
    CHECK(theta[0] == doctest::Approx(3.0));
}

TEST_CASE("only the first visit in an episode contributes") {
    // one episode: state 0 at steps 0 and 2, rewards (1, 1, -1)
    EpisodicHistory h;
    h.level_states = 1;
    h.steps = {{0, 0, 1.0}, {-1, 0, 1.0}, {0, 0, -1.0}};
    h.episode_offsets = {0, 3};
    FeatureMatrix f = FeatureMatrix::checked(Matrix::identity(1));
    Vec theta = mc_lse_local(h, f);
    CHECK(theta[0] == doctest::Approx(1.0));  // 1 + 1 - 1, counted once
}

TEST_CASE("identity features pass mean returns through") {
    EpisodicHistory h;
    h.level_states = 2;
    h.steps = {{0, 0, 1.5}, {1, 0, -0.5}};
    h.episode_offsets = {0, 1, 2};
    FeatureMatrix f = FeatureMatrix::checked(Matrix::identity(2));
    Vec theta = mc_lse_local(h, f);
    CHECK(theta[0] == doctest::Approx(1.5));
    CHECK(theta[1] == doctest::Approx(-0.5));
}

TEST_CASE("unvisited states are reported") {
    EpisodicHistory h;
    h.level_states = 2;
    h.steps = {{0, 0, 1.0}};
    h.episode_offsets = {0, 1};
    FeatureMatrix f = FeatureMatrix::checked(Matrix::identity(2));
    CHECK_THROWS_AS(mc_lse_local(h, f), UnvisitedState);
}

TEST_CASE("TD schedule constants and steps") {
    TdSchedule s = TdSchedule::from(0.5, 1.0);
    CHECK(s.beta == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(s.capital_lambda == doctest::Approx(64.0).epsilon(1e-12));
    CHECK(s.step(1) == doctest::Approx(4.0 / 65.0).epsilon(1e-12));

    // invariants: formulas hold to 1e-12 and steps strictly decrease
    for (double gamma : {0.3, 0.9}) {
        for (double omega : {0.125, 0.25, 1.0}) {
            TdSchedule t = TdSchedule::from(gamma, omega);
            CHECK(std::abs(t.beta - 2.0 / ((1 - gamma) * omega)) <= 1e-12 * t.beta);
            CHECK(std::abs(t.capital_lambda - 16.0 / ((1 - gamma) * (1 - gamma) * omega)) <=
                  1e-12 * t.capital_lambda);
            double prev = t.step(0);
            for (long long k : {1LL, 2LL, 10LL, 100LL, 10000LL}) {
                CHECK(t.step(k) > 0.0);
                CHECK(t.step(k) < prev);
                prev = t.step(k);
            }
            // alpha_t <= (1-gamma) omega for all t >= 0 (omega >= 1/8 here;
            // alpha_0 = beta/Lambda = (1-gamma)/8 meets it with equality at 1/8)
            CHECK(t.step(0) <= (1 - gamma) * omega + 1e-15);
        }
    }
}

TEST_CASE("TD local updates") {
    TdSchedule s = TdSchedule::from(0.5, 1.0);

    // features: row 0 = e1, row 1 = zero
    Matrix m(2, 2);
    m(0, 0) = 1.0;
    FeatureMatrix f = FeatureMatrix::from(std::move(m));

    NonEpisodicHistory empty;
    CHECK_THROWS_AS(td_local(empty, {0.0, 0.0}, s, f), BadParams);

    // zero context transition: theta unchanged
    NonEpisodicHistory null_step;
    null_step.transitions = {{1, 0, 0.0, 1}};
    Vec theta = td_local(null_step, {0.7, -0.3}, s, f);
    CHECK(theta[0] == doctest::Approx(0.7));
    CHECK(theta[1] == doctest::Approx(-0.3));

    // single transition c=e1, c'=0, r=1, theta0=0 -> alpha_1 * e1
    NonEpisodicHistory one;
    one.transitions = {{0, 0, 1.0, 1}};
    Vec theta1 = td_local(one, {0.0, 0.0}, s, f);
    CHECK(theta1[0] == doctest::Approx(4.0 / 65.0).epsilon(1e-12));
    CHECK(theta1[1] == doctest::Approx(0.0));

    NonEpisodicHistory bad;
    bad.transitions = {{5, 0, 1.0, 0}};
    CHECK_THROWS_AS(td_local(bad, {0.0, 0.0}, s, f), DimensionMismatch);
    CHECK_THROWS_AS(td_local(one, {0.0}, s, f), DimensionMismatch);
}

TEST_CASE("pairwise mean averages exactly") {
    Vec mean = pairwise_mean({{1.0}, {2.0}, {3.0}});
    CHECK(mean[0] == doctest::Approx(2.0).epsilon(1e-15));

    // stays within 1e-12 of a long-double reference for a thousand machines
    Rng rng(314);
    std::vector<Vec> vs(1000, Vec(3));
    long double ref[3] = {0.0L, 0.0L, 0.0L};
    for (auto& v : vs)
        for (int k = 0; k < 3; ++k) {
            v[k] = rng.uniform(-1e6, 1e6);
            ref[k] += v[k];
        }
    Vec got = pairwise_mean(vs);
    for (int k = 0; k < 3; ++k) {
        double want = static_cast<double>(ref[k] / 1000.0L);
        CHECK(std::abs(got[k] - want) <= 1e-12 * std::abs(want) + 1e-12);
    }
}

TEST_CASE("hard bandit reward means track c.theta arm by arm") {
    EnvironmentSpec env = hard_bandit(2, 2, 2, 0.2, 1.0, 0.15, {1, -1, -1, 1});
    const int draws = 40000;
    // empirical mean of reward (a, l) over independent histories
    std::vector<double> sums(4, 0.0);
    for (int t = 0; t < draws; ++t) {
        auto h = std::get<BanditHistory>(sample_history(env, derive_seed(606, 1, t)));
        for (int a = 0; a < 2; ++a)
            for (int l = 0; l < 2; ++l) sums[a * 2 + l] += h.rewards[a * 2 + l];
    }
    const double se = 1.0 / std::sqrt(static_cast<double>(draws));  // rewards are +-1
    for (int a = 0; a < 2; ++a) {
        std::span<const double> th{env.true_theta.data() + a * 2, 2};
        for (int l = 0; l < 2; ++l) {
            double want = dot(env.features->row(l), th);
            CHECK(std::abs(sums[a * 2 + l] / draws - want) <= 4.0 * se);
        }
    }
}

TEST_CASE("single machine with lossless transmission reproduces the local estimate") {
    EnvironmentSpec env = hard_bandit(2, 2, 8, 0.05, 1.0, 0.1, {1, -1, -1, 1});
    QuantizerConfig q = lossless_config(8.0);
    EstimateBundle bundle = run_distributed(env, Algorithm::Lse, 1, 0, q, 321);

    auto h = std::get<BanditHistory>(sample_history(env, derive_seed(321, kStreamMachine, 0)));
    Vec local = lse_local(h);
    REQUIRE(bundle.final_estimate.size() == local.size());
    for (std::size_t k = 0; k < local.size(); ++k)
        CHECK(std::abs(bundle.final_estimate[k] - local[k]) <= 1e-11);
    CHECK(bundle.messages.size() == 1);
    CHECK(bundle.clamp_count == 0);
}

TEST_CASE("central averaging over noiseless machines returns theta and counts bits") {
    EnvironmentSpec env = generic_bandit(make_orthogonal_features(4, 2, 0.25),
                                         {0.5, -0.25}, 1, 1.0, NoiseKind::Uniform, 0.0);
    QuantizerConfig q = lossless_config(4.0);
    EstimateBundle bundle = run_distributed(env, Algorithm::Lse, 3, 0, q, 77);
    CHECK(bundle.messages.size() == 3);  // one message per machine, single round
    for (std::size_t k = 0; k < 2; ++k)
        CHECK(std::abs(bundle.final_estimate[k] - env.true_theta[k]) <= 1e-9);
    CHECK(bundle.total_bits_sent ==
          doctest::Approx(3.0 * 2.0 * bits_for_precision(q)).epsilon(1e-12));
    CHECK(bundle.clamp_count == 0);
}

TEST_CASE("local failures carry the machine index") {
    EnvironmentSpec env = generic_bandit(FeatureMatrix::from(Matrix(2, 1)), {0.0}, 1, 1.0,
                                         NoiseKind::Uniform, 0.5);
    QuantizerConfig q = lossless_config(4.0);
    try {
        run_distributed(env, Algorithm::Lse, 2, 0, q, 5);
        FAIL("expected RankDeficient");
    } catch (const RankDeficient& e) {
        CHECK(std::string(e.what()).find("machine 0") != std::string::npos);
    }
}

TEST_CASE("theoretical bound formulas") {
    BoundParams lse;
    lse.algo = Algorithm::Lse;
    lse.arms = 2;
    lse.dim = 3;
    lse.r_max = 1.0;
    lse.machines = 10;
    lse.samples = 100;
    lse.lambda_min = 0.1;
    lse.precision = 0.0;
    CHECK(theoretical_bound(lse) == doctest::Approx(0.06).epsilon(1e-12));

    BoundParams mc;
    mc.algo = Algorithm::McLse;
    mc.dim = 2;
    mc.horizon = 3;
    mc.level = 0;
    mc.r_max = 1.0;
    mc.machines = 4;
    mc.states = 2;
    mc.episodes = 25;
    mc.lambda_min = 0.5;
    CHECK(theoretical_bound(mc) == doctest::Approx(0.18).epsilon(1e-12));

    BoundParams td;
    td.algo = Algorithm::Td;
    td.dim = 4;
    td.r_max = 1.0;
    td.machines = 5;
    td.states = 4;
    td.pi_min = 0.25;
    td.lambda_min = 0.2;
    td.gamma = 0.5;
    td.samples = 100;
    td.precision = 0.0;
    double variance_term = 1.0 / (4 * 0.25 * 0.2 * 5);
    td.bias_sq = variance_term / 2;  // below the crossover: variance branch
    CHECK(theoretical_bound(td) ==
          doctest::Approx(variance_term / (1 + 0.25 * 100)).epsilon(1e-12));
    td.bias_sq = variance_term * 2;  // above: bias branch
    CHECK(theoretical_bound(td) ==
          doctest::Approx(2 * variance_term / (1 + 0.25 * 100)).epsilon(1e-12));

    BoundParams bad = lse;
    bad.lambda_min = 0.0;
    CHECK_THROWS_AS(theoretical_bound(bad), BadParams);

    // budget expressions: AC log2(mn lambda / R) and the MC/TD analogues
    CHECK(optimal_bits(lse) == doctest::Approx(6.0 * std::log2(100.0)).epsilon(1e-12));
    CHECK(optimal_bits(mc) ==
          doctest::Approx(2.0 * std::log2(4.0 * 2.0 * 25.0 * 0.5 / 3.0)).epsilon(1e-12));
}

TEST_CASE("the averaged estimate is exactly the mean of the decoded messages") {
    EnvironmentSpec env = hard_bandit(1, 2, 4, 0.1, 1.0, 0.1, {1, -1});
    QuantizerConfig q{-4.0, 4.0, 0.125};
    EstimateBundle bundle = run_distributed(env, Algorithm::Lse, 5, 0, q, 2042);
    std::vector<Vec> decoded;
    for (const auto& msg : bundle.messages) decoded.push_back(dequantize(msg));
    Vec mean = pairwise_mean(decoded);
    for (std::size_t k = 0; k < mean.size(); ++k)
        CHECK(std::abs(bundle.final_estimate[k] - mean[k]) <= 1e-12);
}

TEST_CASE("distributed LSE is unbiased over many lossless runs") {
    EnvironmentSpec env = generic_bandit(make_orthogonal_features(4, 2, 0.5),
                                         {0.3, -0.2}, 1, 1.0, NoiseKind::Uniform, 0.4);
    QuantizerConfig q = lossless_config(8.0);
    const int runs = 10000;
    Vec acc(2, 0.0), acc_sq(2, 0.0);
    for (int t = 0; t < runs; ++t) {
        EstimateBundle b = run_distributed(env, Algorithm::Lse, 2, 0, q,
                                           derive_seed(9001, 0, static_cast<std::uint64_t>(t)));
        for (int k = 0; k < 2; ++k) {
            double e = b.final_estimate[k] - env.true_theta[k];
            acc[k] += e;
            acc_sq[k] += e * e;
        }
    }
    double bias_norm = 0.0, se_norm = 0.0;
    for (int k = 0; k < 2; ++k) {
        double mean = acc[k] / runs;
        double var = acc_sq[k] / runs - mean * mean;
        bias_norm += mean * mean;
        se_norm += var / runs;
    }
    CHECK(std::sqrt(bias_norm) <= 5.0 * std::sqrt(se_norm));
}

TEST_CASE("TD gradient steps align with the distance to theta") {
    EnvironmentSpec env = adversarial_td_bias_env({0.6, -0.8}, 2, 0.8, 1.0, 0.3);
    double omega = weighted_gram_min_eigenvalue(*env.features, env.stationary_dist);
    const Vec& theta = env.true_theta;
    Rng dir_rng(2718);

    for (int rep = 0; rep < 5; ++rep) {
        Vec theta_t(2);
        for (auto& v : theta_t) v = dir_rng.uniform(-3.0, 3.0);
        Vec diff(2);
        for (int k = 0; k < 2; ++k) diff[k] = theta[k] - theta_t[k];
        double dist_sq = diff[0] * diff[0] + diff[1] * diff[1];

        auto h = std::get<NonEpisodicHistory>(
            sample_history(env, derive_seed(100, 7, rep), 20000));
        double sum = 0.0, sum_sq = 0.0;
        for (const auto& tr : h.transitions) {
            auto ct = env.features->row(tr.state);
            auto cn = env.features->row(tr.next_state);
            double err = tr.reward + env.gamma * dot(cn, theta_t) - dot(ct, theta_t);
            double proj = err * (diff[0] * ct[0] + diff[1] * ct[1]);
            sum += proj;
            sum_sq += proj * proj;
        }
        double n = static_cast<double>(h.transitions.size());
        double mean = sum / n;
        double se = std::sqrt((sum_sq / n - mean * mean) / n);
        CHECK(mean >= omega * (1 - env.gamma) * dist_sq - 4.0 * se);
    }
}
