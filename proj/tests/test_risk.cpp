#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dorl/risk.hpp"
#include "dorl/rng.hpp"

using namespace dorl;

namespace {

EnvironmentSpec scalar_bandit(double noise_width) {
    // identity design repeated n times: every row is the 1-d feature (1)
    return generic_bandit(make_orthogonal_features(16, 1, 1.0), {0.3}, 1, 1.0,
                          NoiseKind::Uniform, noise_width);
}

}  // namespace

TEST_CASE("noiseless environments yield zero risk under lossless transmission") {
    EnvironmentSpec env = generic_bandit(make_orthogonal_features(4, 2, 0.5), {0.4, -0.1}, 1,
                                         1.0, NoiseKind::Uniform, 0.0);
    RunSpec spec = make_run_spec(env, Algorithm::Lse, 3, 0, lossless_config(4.0));
    auto [mse, se] = estimate_risk(spec, 50, 1, 1);
    CHECK(mse <= 1e-18);
    CHECK(se <= 1e-18);
}

TEST_CASE("scalar bandit risk matches the closed-form sigma^2/(mn)") {
    const double width = 0.6;
    const double sigma_sq = width * width / 3.0;  // uniform noise variance
    RunSpec spec = make_run_spec(scalar_bandit(width), Algorithm::Lse, 5, 0, lossless_config(4.0));
    auto [mse, se] = estimate_risk(spec, 20000, 2024, 1);
    CHECK(std::abs(mse - sigma_sq / (5.0 * 16.0)) <= 4.0 * se);
}

TEST_CASE("risk estimates are deterministic and thread-count independent") {
    RunSpec spec = make_run_spec(scalar_bandit(0.5), Algorithm::Lse, 3, 0, lossless_config(4.0));
    auto a = estimate_risk(spec, 200, 7, 1);
    auto b = estimate_risk(spec, 200, 7, 1);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
    auto c = estimate_risk(spec, 200, 7, 4);
    CHECK(a.first == c.first);
    CHECK(a.second == c.second);
    auto d = estimate_risk(spec, 200, 8, 1);
    CHECK(a.first != d.first);
}

TEST_CASE("standard error shrinks like one over root trials") {
    RunSpec spec = make_run_spec(scalar_bandit(0.5), Algorithm::Lse, 2, 0, lossless_config(4.0));
    auto coarse = estimate_risk(spec, 400, 31, 1);
    auto fine = estimate_risk(spec, 10000, 32, 1);
    double ratio = coarse.second / fine.second;
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 7.0);
}

TEST_CASE("log-log regression recovers exact power laws") {
    std::vector<double> xs = {1, 2, 4, 8, 16, 32};
    for (double k : {-1.0, -0.5, 0.0, 2.0}) {
        std::vector<double> ys;
        for (double x : xs) ys.push_back(3.7 * std::pow(x, k));
        auto [slope, se] = fit_loglog_slope(xs, ys);
        CHECK(std::abs(slope - k) <= 1e-9);
        CHECK(se <= 1e-9);
    }
    auto [slope, se] = fit_loglog_slope({1, 2, 4}, {0.0, 1.0, 1.0});
    CHECK(std::isnan(slope));
    CHECK(std::isnan(se));
}

TEST_CASE("doubling machines halves the risk for unbiased estimators") {
    RunSpec two = make_run_spec(scalar_bandit(0.6), Algorithm::Lse, 2, 0, lossless_config(4.0));
    RunSpec four = make_run_spec(scalar_bandit(0.6), Algorithm::Lse, 4, 0, lossless_config(4.0));
    auto [mse2, se2] = estimate_risk(two, 10000, 5, 1);
    auto [mse4, se4] = estimate_risk(four, 10000, 6, 1);
    double ratio = mse2 / mse4;
    CHECK(ratio >= 2.0 * 0.8);
    CHECK(ratio <= 2.0 * 1.2);
}

TEST_CASE("quantization adds at most dim (P/2)^2 to the risk") {
    EnvironmentSpec env = generic_bandit(make_orthogonal_features(8, 2, 0.5), {0.37, -0.22}, 1,
                                         1.0, NoiseKind::Uniform, 0.4);
    RunSpec ll = make_run_spec(env, Algorithm::Lse, 4, 0, lossless_config(4.0));
    RunSpec coarse = make_run_spec(env, Algorithm::Lse, 4, 0, QuantizerConfig{-4.0, 4.0, 0.25});
    auto [mse_ll, se_ll] = estimate_risk(ll, 8000, 77, 1);
    auto [mse_q, se_q] = estimate_risk(coarse, 8000, 77, 1);
    CHECK(mse_q - mse_ll <= 2.0 * (0.25 / 2) * (0.25 / 2) + 4.0 * (se_ll + se_q));
}

TEST_CASE("sweep attaches bounds and fits the machine-count slope") {
    auto build = [](double m) {
        return make_run_spec(scalar_bandit(0.6), Algorithm::Lse, static_cast<int>(m), 0,
                             lossless_config(4.0));
    };
    RiskReport rep = sweep("m", {1, 2, 4, 8, 16}, build, 3000, 11, 1);
    REQUIRE(rep.points.size() == 5);
    for (const auto& p : rep.points) {
        CHECK(p.trials == 3000);
        CHECK(p.theory_bound > 0.0);
        CHECK(p.mse_mean <= 10.0 * p.theory_bound);
    }
    CHECK(rep.fitted_slope == doctest::Approx(-1.0).epsilon(0.1));

    CHECK_THROWS_AS(sweep("q", {1, 2, 4}, build, 100, 1, 1), BadAxis);
    CHECK_THROWS_AS(sweep("m", {1, 2}, build, 100, 1, 1), BadParams);
    CHECK_THROWS_AS(sweep("m", {1, 2, 2}, build, 100, 1, 1), BadParams);
    CHECK_THROWS_AS(sweep("m", {1, 2, 4}, build, 20, 1, 1), BadParams);  // < 30 trials/point
}

TEST_CASE("budget frontier finds the knee and validates budgets") {
    RunSpec base = make_run_spec(scalar_bandit(0.5), Algorithm::Lse, 4, 0,
                                 QuantizerConfig{-2.0, 2.0, 1.0});
    RiskReport rep = budget_frontier(base, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 2000, 3, 1);
    REQUIRE(rep.knee_budget.has_value());
    CHECK(*rep.knee_budget >= 1.0);
    CHECK(*rep.knee_budget <= 10.0);
    CHECK(rep.sweep_axis == "B");
    // past the knee the risk stays near lossless: the finest budget cannot
    // exceed the coarsest
    CHECK(rep.points.back().mse_mean <= rep.points.front().mse_mean);

    CHECK_THROWS_AS(budget_frontier(base, {-1.0, 2.0}, 100, 1, 1), BudgetTooSmall);
    CHECK_THROWS_AS(budget_frontier(base, {2.0, 2.0}, 100, 1, 1), BadParams);
}

TEST_CASE("CSV round trip preserves every field") {
    RiskReport rep;
    rep.sweep_axis = "n";
    rep.points = {{8, 0.12345678901234567, 0.001, 1000, 0.5},
                  {16, 0.0625, 0.0005, 1000, 0.25},
                  {32, 1e-300, 3.14159e-10, 1000, 0.125}};
    rep.fitted_slope = -1.0000000000000002;
    rep.slope_stderr = 0.003;

    std::ostringstream os;
    write_report_csv(os, rep);
    std::istringstream is(os.str());
    RiskReport back = parse_report_csv(is);
    CHECK(back == rep);

    rep.knee_budget = 6.0;
    std::ostringstream os2;
    write_report_csv(os2, rep);
    std::istringstream is2(os2.str());
    CHECK(parse_report_csv(is2) == rep);

    std::istringstream bad("nonsense\n");
    CHECK_THROWS_AS(parse_report_csv(bad), BadParams);
}

TEST_CASE("json report mirrors the CSV fields") {
    RiskReport rep;
    rep.sweep_axis = "m";
    rep.points = {{1, 0.5, 0.01, 100, 1.0}};
    rep.fitted_slope = -1.0;
    rep.slope_stderr = 0.1;
    std::string j = report_to_json(rep);
    CHECK(j.find("\"sweep_axis\": \"m\"") != std::string::npos);
    CHECK(j.find("\"mse_mean\": 0.5") != std::string::npos);
    CHECK(j.find("\"theory_bound\": 1.0") != std::string::npos);
}

TEST_CASE("risk grows quadratically along the bias axis when bias dominates") {
    EnvironmentSpec env = adversarial_td_bias_env({1.0, -0.7}, 2, 0.9, 1.0, 0.5);
    double omega = weighted_gram_min_eigenvalue(*env.features, env.stationary_dist);
    TdSchedule schedule = TdSchedule::from(env.gamma, omega);
    auto build = [&](double bias) {
        TdOptions td{Vec(2), schedule};
        double norm = std::sqrt(dot(env.true_theta, env.true_theta));
        for (int k = 0; k < 2; ++k)
            td.theta0[k] = env.true_theta[k] * (1.0 - bias / norm);  // ||theta - theta0|| = bias
        return make_run_spec(env, Algorithm::Td, 2, 500, lossless_config(256.0), td);
    };
    RiskReport rep = sweep("bias", {2.0, 4.0, 8.0, 16.0}, build, 60, 5150, 1);
    for (std::size_t i = 1; i < rep.points.size(); ++i)
        CHECK(rep.points[i].mse_mean > rep.points[i - 1].mse_mean);
    CHECK(rep.fitted_slope == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("generous budgets reproduce the lossless risk") {
    RunSpec base = make_run_spec(scalar_bandit(0.5), Algorithm::Lse, 4, 0,
                                 QuantizerConfig{-2.0, 2.0, 1.0});
    RiskReport rep = budget_frontier(base, {2, 8, 20}, 3000, 64, 1);
    RunSpec ll = base;
    ll.qcfg = lossless_config(2.0);
    auto [mse_ll, se_ll] = estimate_risk(ll, 3000, derive_seed(64, 0x66726f6e74ULL, 0), 1);
    const auto& last = rep.points.back();
    CHECK(std::abs(last.mse_mean - mse_ll) <= 2.0 * (last.mse_stderr + se_ll));
}

TEST_CASE("clamp probe flags transmission ranges that truncate estimates") {
    EnvironmentSpec env = generic_bandit(make_orthogonal_features(4, 1, 1.0), {0.9}, 1, 1.0,
                                         NoiseKind::Uniform, 0.1);
    RunSpec wide = make_run_spec(env, Algorithm::Lse, 4, 0, QuantizerConfig{-2.0, 2.0, 0.01});
    CHECK(probe_clamp_count(wide, 5) == 0);
    // grid over [-0.5, 0.5] cannot reach estimates near 0.9
    RunSpec narrow = make_run_spec(env, Algorithm::Lse, 4, 0, QuantizerConfig{-0.5, 0.5, 0.01});
    CHECK(probe_clamp_count(narrow, 5) == 4);
}

TEST_CASE("parallel_for propagates the first failure by index") {
    CHECK_THROWS_AS(parallel_for(10, 4,
                                 [](long long i) {
                                     if (i >= 3) throw BadParams("boom");
                                 }),
                    BadParams);
}
