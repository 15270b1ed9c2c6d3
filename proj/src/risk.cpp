#include "dorl/risk.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <cstdio>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "dorl/rng.hpp"

namespace dorl {

namespace {

constexpr std::uint64_t kStreamSweepPoint = 0x706f696e74ULL;
constexpr std::uint64_t kStreamFrontier = 0x66726f6e74ULL;

double pairwise_sum(const std::vector<double>& xs, std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return xs[lo];
    std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum(xs, lo, mid) + pairwise_sum(xs, mid, hi);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

RunSpec make_run_spec(EnvironmentSpec env, Algorithm algo, int machines, long long size,
                      QuantizerConfig qcfg, std::optional<TdOptions> td) {
    RunSpec spec;
    double bias_sq = 0.0;
    if (algo == Algorithm::Td) {
        if (!td) throw BadParams("TD runs need TdOptions");
        if (td->theta0.size() != env.true_theta.size())
            throw DimensionMismatch("theta0 length does not match the environment parameter");
        for (std::size_t k = 0; k < td->theta0.size(); ++k) {
            double d = env.true_theta[k] - td->theta0[k];
            bias_sq += d * d;
        }
    }
    spec.bound_params = bound_params_for(env, algo, machines, size, qcfg.precision, bias_sq);
    spec.env = std::move(env);
    spec.algo = algo;
    spec.machines = machines;
    spec.size = size;
    spec.qcfg = qcfg;
    spec.td = std::move(td);
    return spec;
}

void parallel_for(long long count, int threads, const std::function<void(long long)>& body) {
    if (count <= 0) return;
    const int workers = std::max(1, static_cast<int>(std::min<long long>(threads, count)));
    if (workers == 1) {
        for (long long i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<long long> next{0};
    std::mutex err_mutex;
    long long err_index = -1;
    std::exception_ptr err;
    auto run = [&] {
        for (;;) {
            long long i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (err_index < 0 || i < err_index) {
                    err_index = i;
                    err = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

std::pair<double, double> estimate_risk(const RunSpec& spec, long long trials,
                                        std::uint64_t base_seed, int threads) {
    if (trials < 2) throw BadParams("need at least two trials for a standard error");
    std::vector<double> mse(static_cast<std::size_t>(trials));
    const Vec& truth = spec.env.true_theta;
    parallel_for(trials, threads, [&](long long t) {
        std::uint64_t seed = derive_seed(base_seed, kStreamTrial, static_cast<std::uint64_t>(t));
        EstimateBundle run =
            run_distributed(spec.env, spec.algo, spec.machines, spec.size, spec.qcfg, seed, spec.td);
        double err = 0.0;
        for (std::size_t k = 0; k < truth.size(); ++k) {
            double d = run.final_estimate[k] - truth[k];
            err += d * d;
        }
        mse[static_cast<std::size_t>(t)] = err;
    });
    const double n = static_cast<double>(trials);
    double mean = pairwise_sum(mse, 0, mse.size()) / n;
    std::vector<double> sq(mse.size());
    for (std::size_t i = 0; i < mse.size(); ++i) {
        double d = mse[i] - mean;
        sq[i] = d * d;
    }
    double var = pairwise_sum(sq, 0, sq.size()) / (n - 1.0);
    return {mean, std::sqrt(var / n)};
}

long long probe_clamp_count(const RunSpec& spec, std::uint64_t base_seed) {
    std::uint64_t seed = derive_seed(base_seed, kStreamTrial, 0);
    EstimateBundle run =
        run_distributed(spec.env, spec.algo, spec.machines, spec.size, spec.qcfg, seed, spec.td);
    return run.clamp_count;
}

std::pair<double, double> fit_loglog_slope(const std::vector<double>& xs,
                                           const std::vector<double>& ys) {
    const int k = static_cast<int>(xs.size());
    if (k < 2 || ys.size() != xs.size()) throw BadParams("need matching xs/ys with >= 2 points");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int i = 0; i < k; ++i)
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0) || !std::isfinite(ys[i])) return {nan, nan};

    Matrix design(k, 2);
    Vec logy(k);
    for (int i = 0; i < k; ++i) {
        design(i, 0) = 1.0;
        design(i, 1) = std::log(xs[i]);
        logy[i] = std::log(ys[i]);
    }
    FeatureMatrix fm = FeatureMatrix::from(design);
    Vec coef = least_squares(fm, logy);

    double rss = 0.0;
    for (int i = 0; i < k; ++i) {
        double fit = coef[0] + coef[1] * design(i, 1);
        double r = logy[i] - fit;
        rss += r * r;
    }
    double stderr_slope = nan;
    if (k > 2) {
        double sigma_sq = rss / (k - 2);
        SymEigen e = sym_eigen(gram(fm.matrix()));
        // [ (XtX)^-1 ]_{11}
        double inv11 = 0.0;
        for (int j = 0; j < 2; ++j) inv11 += e.vectors(1, j) * e.vectors(1, j) / e.values[j];
        stderr_slope = std::sqrt(sigma_sq * inv11);
    }
    return {coef[1], stderr_slope};
}

namespace {

const std::vector<std::string> kAxes = {"m", "n", "E", "B", "P", "bias"};

void check_axis(const std::string& axis) {
    for (const auto& a : kAxes)
        if (axis == a) return;
    throw BadAxis("unknown sweep axis '" + axis + "'");
}

}  // namespace

RiskReport sweep(const std::string& axis, const std::vector<double>& values,
                 const std::function<RunSpec(double)>& build, long long trials,
                 std::uint64_t base_seed, int threads) {
    check_axis(axis);
    if (trials < 30) throw BadParams("report points need at least 30 trials");
    if (values.size() < 3) throw BadParams("sweeps need at least three axis values");
    for (std::size_t i = 1; i < values.size(); ++i)
        if (!(values[i] > values[i - 1])) throw BadParams("sweep values must be strictly increasing");

    RiskReport report;
    report.sweep_axis = axis;
    std::vector<double> mses;
    for (std::size_t i = 0; i < values.size(); ++i) {
        RunSpec spec = build(values[i]);
        std::uint64_t point_seed = derive_seed(base_seed, kStreamSweepPoint, i);
        auto [mean, se] = estimate_risk(spec, trials, point_seed, threads);
        report.points.push_back(
            {values[i], mean, se, trials, theoretical_bound(spec.bound_params)});
        mses.push_back(mean);
    }
    auto [slope, se] = fit_loglog_slope(values, mses);
    report.fitted_slope = slope;
    report.slope_stderr = se;
    return report;
}

RiskReport budget_frontier(const RunSpec& base, const std::vector<double>& budgets,
                           long long trials, std::uint64_t base_seed, int threads) {
    if (budgets.empty()) throw BadParams("budget list is empty");
    if (trials < 30) throw BadParams("report points need at least 30 trials");
    for (std::size_t i = 0; i < budgets.size(); ++i) {
        if (!(budgets[i] > 0.0)) throw BudgetTooSmall("budgets must be positive bit counts");
        if (i > 0 && !(budgets[i] > budgets[i - 1]))
            throw BadParams("budgets must be strictly increasing");
    }
    const double range = base.qcfg.v_max - base.qcfg.v_min;

    RunSpec lossless = base;
    lossless.qcfg = QuantizerConfig{base.qcfg.v_min, base.qcfg.v_max, range / 1125899906842624.0};
    lossless.bound_params.precision = lossless.qcfg.precision;
    std::uint64_t ll_seed = derive_seed(base_seed, kStreamFrontier, 0);
    auto [ll_mse, ll_se] = estimate_risk(lossless, trials, ll_seed, threads);

    RiskReport report;
    report.sweep_axis = "B";
    std::vector<double> mses;
    for (std::size_t i = 0; i < budgets.size(); ++i) {
        auto levels = static_cast<std::int64_t>(std::floor(std::pow(2.0, budgets[i]) + 1e-9));
        if (levels < 1) throw BudgetTooSmall("budget " + std::to_string(budgets[i]) +
                                             " bits allows fewer than one level");
        RunSpec spec = base;
        double p = levels == 1 ? range : std::nextafter(range / static_cast<double>(levels),
                                                        std::numeric_limits<double>::infinity());
        spec.qcfg = QuantizerConfig{base.qcfg.v_min, base.qcfg.v_max, p};
        spec.bound_params.precision = p;
        std::uint64_t point_seed = derive_seed(base_seed, kStreamFrontier, i + 1);
        auto [mean, se] = estimate_risk(spec, trials, point_seed, threads);
        report.points.push_back(
            {budgets[i], mean, se, trials, theoretical_bound(spec.bound_params)});
        mses.push_back(mean);
        if (!report.knee_budget && mean <= 1.2 * ll_mse) report.knee_budget = budgets[i];
    }
    auto [slope, se] = fit_loglog_slope(budgets, mses);
    report.fitted_slope = slope;
    report.slope_stderr = se;
    return report;
}

void write_report_csv(std::ostream& os, const RiskReport& report) {
    os << "axis,value,mse_mean,mse_stderr,trials,theory_bound\n";
    for (const auto& p : report.points) {
        os << report.sweep_axis << ',' << fmt_double(p.axis_value) << ',' << fmt_double(p.mse_mean)
           << ',' << fmt_double(p.mse_stderr) << ',' << p.trials << ','
           << fmt_double(p.theory_bound) << '\n';
    }
    os << "# slope=" << fmt_double(report.fitted_slope) << " stderr="
       << fmt_double(report.slope_stderr) << '\n';
    if (report.knee_budget) os << "# knee=" << fmt_double(*report.knee_budget) << '\n';
}

RiskReport parse_report_csv(std::istream& is) {
    RiskReport report;
    std::string line;
    if (!std::getline(is, line) || line != "axis,value,mse_mean,mse_stderr,trials,theory_bound")
        throw BadParams("missing or malformed CSV header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            double slope, se;
            if (std::sscanf(line.c_str(), "# slope=%lf stderr=%lf", &slope, &se) == 2) {
                report.fitted_slope = slope;
                report.slope_stderr = se;
            } else {
                double knee;
                if (std::sscanf(line.c_str(), "# knee=%lf", &knee) == 1) report.knee_budget = knee;
            }
            continue;
        }
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        report.sweep_axis = field;
        RiskPoint p{};
        std::getline(ss, field, ',');
        p.axis_value = std::strtod(field.c_str(), nullptr);
        std::getline(ss, field, ',');
        p.mse_mean = std::strtod(field.c_str(), nullptr);
        std::getline(ss, field, ',');
        p.mse_stderr = std::strtod(field.c_str(), nullptr);
        std::getline(ss, field, ',');
        p.trials = std::strtoll(field.c_str(), nullptr, 10);
        std::getline(ss, field, ',');
        p.theory_bound = std::strtod(field.c_str(), nullptr);
        report.points.push_back(p);
    }
    return report;
}

std::string report_to_json(const RiskReport& report) {
    nlohmann::json j;
    j["sweep_axis"] = report.sweep_axis;
    j["fitted_slope"] = report.fitted_slope;
    j["slope_stderr"] = report.slope_stderr;
    if (report.knee_budget) j["knee_budget"] = *report.knee_budget;
    j["points"] = nlohmann::json::array();
    for (const auto& p : report.points) {
        j["points"].push_back({{"value", p.axis_value},
                               {"mse_mean", p.mse_mean},
                               {"mse_stderr", p.mse_stderr},
                               {"trials", p.trials},
                               {"theory_bound", p.theory_bound}});
    }
    return j.dump(2);
}

}  // namespace dorl
