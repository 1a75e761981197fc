#include "qpanel/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include "qpanel/correction.hpp"
#include "qpanel/csv.hpp"
#include "qpanel/errors.hpp"
#include "qpanel/inference.hpp"
#include "qpanel/quantile.hpp"
#include "qpanel/report.hpp"
#include "qpanel/simulate.hpp"
#include "qpanel/sqr.hpp"

namespace qpanel {

namespace {

struct EstimateArgs {
    std::string input;
    std::vector<double> taus;
    std::vector<std::string> estimators{"all"};
    double bandwidth = 0.8;
    double level = 0.95;
    std::string output;
    std::string format = "csv";
};

struct SimulateArgs {
    std::vector<int> models{1};
    std::vector<long> n_values;
    std::vector<long> t_values;
    std::vector<double> taus;
    std::vector<std::string> estimators{"canay", "abc", "spj"};
    int reps = 0;
    std::uint64_t seed = 1;
    int jobs = 0;
    double bandwidth = 0.8;
    double level = 0.95;
    std::string output;
    std::string format;
};

std::vector<EstimatorKind> resolve_estimators(const std::vector<std::string>& names) {
    std::vector<EstimatorKind> out;
    for (const auto& name : names) {
        if (name == "all") {
            for (EstimatorKind e : {EstimatorKind::canay, EstimatorKind::sqr, EstimatorKind::abc,
                                    EstimatorKind::spj}) {
                if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
            }
            continue;
        }
        const EstimatorKind e = parse_estimator(name);
        if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Writes to --output when given, otherwise to `out`.
template <class F>
int emit(const std::string& path, std::ostream& out, std::ostream& err, F&& write) {
    if (path.empty()) {
        write(out);
        return exit_ok;
    }
    std::ofstream file(path);
    if (!file) {
        err << "error: cannot open output file '" << path << "'\n";
        return exit_failure;
    }
    write(file);
    return exit_ok;
}

int cmd_estimate(const EstimateArgs& args, std::ostream& out, std::ostream& err) {
    std::vector<EstimatorKind> estimators;
    SqrConfig config;
    try {
        if (args.taus.empty()) throw InvalidArgument("--tau needs at least one value");
        for (double tau : args.taus) require_quantile(tau);
        estimators = resolve_estimators(args.estimators);
        config.bandwidth = args.bandwidth;
        validate(config);
        normal_critical_value(args.level);
        if (args.format != "csv" && args.format != "markdown") {
            throw InvalidArgument("--format must be csv or markdown");
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_invalid_arguments;
    }

    std::optional<LoadedPanel> loaded;
    try {
        loaded.emplace(read_panel_csv_file(args.input));
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_data_error;
    }
    const PanelData& panel = loaded->panel;

    const bool needs_sqr = std::any_of(estimators.begin(), estimators.end(),
                                       [](EstimatorKind e) { return e != EstimatorKind::canay; });
    std::vector<CoefficientRow> rows;
    try {
        const FirstStepFit first_step = fixed_effects_fit(panel);
        for (double tau : args.taus) {
            const Eigen::VectorXd canay = canay_estimate(panel, tau, first_step);
            EstimateResult fit;
            InferenceResult inference;
            if (needs_sqr) {
                SqrConfig sqr = config;
                sqr.init = canay;
                fit = sqr_estimate(panel, tau, first_step, sqr);
                inference = covariance(panel, tau, first_step, fit, config, args.level);
            } else {
                inference = covariance(panel, tau, first_step, canay, config, args.level);
            }
            for (EstimatorKind e : estimators) {
                Eigen::VectorXd estimate;
                switch (e) {
                    case EstimatorKind::canay: estimate = canay; break;
                    case EstimatorKind::sqr: estimate = fit.beta; break;
                    case EstimatorKind::abc:
                        estimate = analytically_corrected(
                            fit, bias_components(panel, tau, first_step, fit, config), panel.n_periods());
                        break;
                    case EstimatorKind::spj:
                        estimate = split_panel_jackknife(panel, tau, config, fit).corrected;
                        break;
                }
                const InferenceResult centered = centered_at(inference, estimate);
                for (Eigen::Index j = 0; j < estimate.size(); ++j) {
                    rows.push_back({tau, to_string(e), j, estimate(j), centered.std_errors(j),
                                    centered.ci_lower(j), centered.ci_upper(j)});
                }
            }
        }
    } catch (const NoConvergence& e) {
        err << "error: " << e.kind() << ": " << e.what() << '\n'
            << "  iterations: " << e.iterations() << ", last gradient max-norm: "
            << e.last_gradient_norm() << '\n';
        return exit_numerical_failure;
    } catch (const NumericalError& e) {
        err << "error: " << e.kind() << ": " << e.what() << '\n';
        return exit_numerical_failure;
    } catch (const Error& e) {
        err << "error: " << e.kind() << ": " << e.what() << '\n';
        return exit_data_error;
    }

    return emit(args.output, out, err, [&](std::ostream& os) {
        if (args.format == "markdown") {
            write_estimates_markdown(os, panel.n_individuals(), panel.n_periods(), rows);
        } else {
            write_estimates_csv(os, panel.n_individuals(), panel.n_periods(), rows);
        }
    });
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
    McConfig config;
    std::string format = args.format;
    try {
        config.models = args.models;
        config.n_values.assign(args.n_values.begin(), args.n_values.end());
        config.t_values.assign(args.t_values.begin(), args.t_values.end());
        config.taus = args.taus;
        config.estimators = resolve_estimators(args.estimators);
        config.replications = args.reps;
        config.seed = args.seed;
        config.jobs = args.jobs > 0 ? args.jobs
                                    : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
        config.sqr.bandwidth = args.bandwidth;
        config.level = args.level;
        validate(config);
        if (format.empty()) format = args.output.empty() ? "markdown" : "csv";
        if (format != "csv" && format != "markdown") {
            throw InvalidArgument("--format must be csv or markdown");
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_invalid_arguments;
    }

    McReport report;
    try {
        report = run_monte_carlo(config);
    } catch (const Error& e) {
        err << "error: " << e.kind() << ": " << e.what() << '\n';
        return exit_numerical_failure;
    }
    for (const auto& w : report.warnings) err << "warning: " << w << '\n';

    return emit(args.output, out, err, [&](std::ostream& os) {
        if (format == "markdown") {
            write_mc_markdown(os, report);
        } else {
            write_mc_csv(os, report);
        }
    });
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Quantile regression for panel data with fixed effects"};
    app.require_subcommand(1);

    EstimateArgs est;
    auto* estimate = app.add_subcommand("estimate", "Estimate quantile coefficients from a CSV panel");
    estimate->add_option("--input", est.input, "Long-format CSV: id,t,y,x1,...,xd")->required();
    estimate->add_option("--tau", est.taus, "Quantile levels, comma separated")->required()->delimiter(',');
    estimate->add_option("--estimator", est.estimators, "canay, sqr, abc, spj or all")->delimiter(',');
    estimate->add_option("--bandwidth", est.bandwidth, "Smoothing bandwidth h");
    estimate->add_option("--level", est.level, "Confidence level");
    estimate->add_option("--output", est.output, "Output file (default: stdout)");
    estimate->add_option("--format", est.format, "csv or markdown");

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run the Monte Carlo study");
    simulate->add_option("--model", sim.models, "Models 1-4, comma separated")->delimiter(',');
    simulate->add_option("--n", sim.n_values, "Numbers of individuals")->required()->delimiter(',');
    simulate->add_option("--t", sim.t_values, "Numbers of periods")->required()->delimiter(',');
    simulate->add_option("--tau", sim.taus, "Quantile levels")->required()->delimiter(',');
    simulate->add_option("--reps", sim.reps, "Replications per cell")->required();
    simulate->add_option("--seed", sim.seed, "Master seed")->required();
    simulate->add_option("--jobs", sim.jobs, "Worker threads (default: available parallelism)");
    simulate->add_option("--estimator", sim.estimators, "canay, sqr, abc, spj or all")->delimiter(',');
    simulate->add_option("--bandwidth", sim.bandwidth, "Smoothing bandwidth h");
    simulate->add_option("--level", sim.level, "Confidence level");
    simulate->add_option("--output", sim.output, "Output file (default: stdout)");
    simulate->add_option("--format", sim.format, "csv or markdown (default: csv for --output)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_invalid_arguments;
    }

    if (estimate->parsed()) return cmd_estimate(est, out, err);
    if (simulate->parsed()) return cmd_simulate(sim, out, err);
    return exit_invalid_arguments;
}

}  // namespace qpanel
