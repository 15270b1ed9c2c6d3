#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dorl/config.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSimulation = 3;
constexpr int kExitIo = 4;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::ios_base::failure("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 1;
    bool dry_run = false;
};

dorl::ExperimentConfig load_config(const CommonArgs& args) {
    std::string text = read_file(args.config_path);
    dorl::ExperimentConfig cfg = dorl::parse_config(text);
    if (args.seed_set) cfg.run.base_seed = args.seed;
    return cfg;
}

void print_plan(const dorl::ResolvedExperiment& exp) {
    const auto& cfg = exp.config;
    std::size_t points = std::max<std::size_t>(1, exp.axis_values.size());
    long long sims = static_cast<long long>(points) * cfg.run.trials;
    double bits = dorl::bits_for_precision(exp.base.qcfg) * exp.base.env.theta_dim();
    std::cout << "plan: mode=" << cfg.run.mode << " points=" << points
              << " trials/point=" << cfg.run.trials << " simulations=" << sims
              << " machines=" << cfg.run.machines << " bits/message=" << bits << "\n";
    std::cout << dorl::emit_config(cfg) << "\n";
}

int cmd_run(const CommonArgs& args) {
    dorl::ExperimentConfig cfg;
    dorl::ResolvedExperiment exp;
    try {
        cfg = load_config(args);
        exp = dorl::resolve(cfg);
    } catch (const std::ios_base::failure& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const dorl::Error& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    }

    if (args.dry_run) {
        print_plan(exp);
        return kExitOk;
    }

    dorl::RiskReport report;
    try {
        if (cfg.run.mode == "risk") {
            auto [mse, se] =
                dorl::estimate_risk(exp.base, cfg.run.trials, cfg.run.base_seed, args.threads);
            report.sweep_axis = "m";
            report.points.push_back({static_cast<double>(cfg.run.machines), mse, se,
                                     cfg.run.trials,
                                     dorl::theoretical_bound(exp.base.bound_params)});
            report.fitted_slope = std::numeric_limits<double>::quiet_NaN();
            report.slope_stderr = std::numeric_limits<double>::quiet_NaN();
        } else if (cfg.run.mode == "sweep") {
            report = dorl::sweep(cfg.run.sweep_axis, exp.axis_values, exp.point_builder,
                                 cfg.run.trials, cfg.run.base_seed, args.threads);
        } else {
            report = dorl::budget_frontier(exp.base, cfg.run.budgets, cfg.run.trials,
                                           cfg.run.base_seed, args.threads);
        }
    } catch (const dorl::Error& e) {
        std::cerr << "simulation error: " << e.what() << "\n";
        return kExitSimulation;
    }

    try {
        if (cfg.output.csv_path.empty()) {
            dorl::write_report_csv(std::cout, report);
        } else {
            std::ofstream out(cfg.output.csv_path, std::ios::binary);
            if (!out) throw std::ios_base::failure("cannot write '" + cfg.output.csv_path + "'");
            dorl::write_report_csv(out, report);
            if (!out.good())
                throw std::ios_base::failure("write failed for '" + cfg.output.csv_path + "'");
        }
        if (!cfg.output.report_path.empty()) {
            std::ofstream out(cfg.output.report_path, std::ios::binary);
            if (!out)
                throw std::ios_base::failure("cannot write '" + cfg.output.report_path + "'");
            out << dorl::report_to_json(report) << "\n";
        }
    } catch (const std::ios_base::failure& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    }

    long long clamps = dorl::probe_clamp_count(exp.base, cfg.run.base_seed);
    if (clamps > 0)
        std::fprintf(stderr,
                     "warning: %lld component(s) clamped in a probe round; widen "
                     "comm.v_min/v_max to keep the range covering the local estimates\n",
                     clamps);

    // One-line summary against theory.
    if (cfg.run.mode == "risk") {
        const auto& p = report.points.front();
        std::printf("mse=%.6g stderr=%.3g theory_bound=%.6g ratio=%.3g\n", p.mse_mean,
                    p.mse_stderr, p.theory_bound, p.mse_mean / p.theory_bound);
    } else if (cfg.run.mode == "sweep") {
        double worst = 0.0;
        for (const auto& p : report.points)
            worst = std::max(worst, p.mse_mean / p.theory_bound);
        std::printf("axis=%s slope=%.4f stderr=%.4f max_mse/bound=%.3g\n",
                    report.sweep_axis.c_str(), report.fitted_slope, report.slope_stderr, worst);
    } else {
        if (report.knee_budget)
            std::printf("knee_budget=%g bits\n", *report.knee_budget);
        else
            std::printf("knee_budget=none (no budget reached 1.2x lossless)\n");
    }
    return kExitOk;
}

int cmd_bounds(const CommonArgs& args) {
    try {
        dorl::ExperimentConfig cfg = load_config(args);
        dorl::ResolvedExperiment exp = dorl::resolve(cfg);
        const auto& bp = exp.base.bound_params;
        std::printf("algorithm=%s\n", dorl::algorithm_name(exp.base.algo).c_str());
        std::printf("risk_bound=%.10g\n", dorl::theoretical_bound(bp));
        std::printf("optimal_bits=%.10g\n", dorl::optimal_bits(bp));
        std::printf("configured_bits_per_value=%.10g\n", dorl::bits_for_precision(exp.base.qcfg));
        return kExitOk;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const dorl::Error& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    }
}

int cmd_validate(const CommonArgs& args) {
    try {
        dorl::ExperimentConfig cfg = load_config(args);
        (void)dorl::resolve(cfg);
        std::cout << "config ok\n";
        return kExitOk;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const dorl::Error& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Single-round bit-budgeted distributed offline RL simulator"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App* sub, bool with_dry_run) {
        sub->add_option("--config", args.config_path, "experiment config (JSON)")->required();
        sub->add_option("--seed", args.seed, "override run.base_seed")
            ->each([&](const std::string&) { args.seed_set = true; });
        sub->add_option("--threads", args.threads, "worker count (outputs are identical for any value)")
            ->check(CLI::PositiveNumber);
        if (with_dry_run)
            sub->add_flag("--dry-run", args.dry_run, "validate and print the resolved plan only");
    };

    CLI::App* run = app.add_subcommand("run", "execute the configured experiment");
    add_common(run, true);
    CLI::App* bounds = app.add_subcommand("bounds", "print the theoretical bounds, no simulation");
    add_common(bounds, false);
    CLI::App* validate = app.add_subcommand("validate", "parse and validate the config only");
    add_common(validate, false);

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(args);
    if (bounds->parsed()) return cmd_bounds(args);
    return cmd_validate(args);
}
