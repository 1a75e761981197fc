#include "qpanel/simulate.hpp"

#include <atomic>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/student_t_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "qpanel/correction.hpp"
#include "qpanel/errors.hpp"
#include "qpanel/inference.hpp"
#include "qpanel/quantile.hpp"

namespace qpanel {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coordinates) {
    std::uint64_t h = mix64(master);
    for (std::uint64_t c : coordinates) h = mix64(h ^ mix64(c));
    return h;
}

void validate(const DgpSpec& spec) {
    if (spec.model < 1 || spec.model > 4) {
        throw InvalidArgument("model must be 1, 2, 3 or 4, got " + std::to_string(spec.model));
    }
    if (spec.n_individuals < 2 || spec.n_periods < 2) {
        throw InvalidArgument("simulated panels need N >= 2 and T >= 2");
    }
    if (!std::isfinite(spec.gamma)) throw InvalidArgument("gamma must be finite");
}

double draw_error(int model, Engine& engine, bool* first_component) {
    switch (model) {
        case 1:
            return boost::random::normal_distribution<double>(2.0, 1.0)(engine);
        case 2:
            return boost::random::exponential_distribution<double>(1.0)(engine) + 2.0;
        case 3: {
            const bool first = boost::random::bernoulli_distribution<double>(0.3)(engine);
            if (first_component) *first_component = first;
            return boost::random::normal_distribution<double>(first ? 1.0 : 3.0, 1.0)(engine);
        }
        case 4:
            return boost::random::student_t_distribution<double>(5.0)(engine);
        default:
            throw InvalidArgument("model must be 1, 2, 3 or 4, got " + std::to_string(model));
    }
}

double error_cdf(int model, double e) {
    const boost::math::normal standard;
    switch (model) {
        case 1:
            return boost::math::cdf(standard, e - 2.0);
        case 2:
            return e <= 2.0 ? 0.0 : -std::expm1(-(e - 2.0));
        case 3:
            return 0.3 * boost::math::cdf(standard, e - 1.0) + 0.7 * boost::math::cdf(standard, e - 3.0);
        case 4:
            return boost::math::cdf(boost::math::students_t(5.0), e);
        default:
            throw InvalidArgument("model must be 1, 2, 3 or 4, got " + std::to_string(model));
    }
}

double true_beta_x(int model, double tau) {
    require_quantile(tau);
    const boost::math::normal standard;
    switch (model) {
        case 1:
            return 2.0 + boost::math::quantile(standard, tau);
        case 2:
            return 2.0 - std::log1p(-tau);
        case 3: {
            // The mixture quantile lies between the component quantiles.
            const double lo = 1.0 + boost::math::quantile(standard, tau) - 1e-9;
            const double hi = 3.0 + boost::math::quantile(standard, tau) + 1e-9;
            std::uintmax_t iterations = 200;
            const auto root = boost::math::tools::toms748_solve(
                [tau](double q) { return error_cdf(3, q) - tau; }, lo, hi,
                boost::math::tools::eps_tolerance<double>(52), iterations);
            return 0.5 * (root.first + root.second);
        }
        case 4:
            return boost::math::quantile(boost::math::students_t(5.0), tau);
        default:
            throw InvalidArgument("model must be 1, 2, 3 or 4, got " + std::to_string(model));
    }
}

GeneratedPanel generate_panel_detailed(const DgpSpec& spec) {
    validate(spec);
    const Index n = spec.n_individuals;
    const Index t = spec.n_periods;
    Engine engine(spec.seed);
    boost::random::uniform_01<double> uniform;
    boost::random::normal_distribution<double> normal(0.0, 1.0);

    VectorXd y(n * t);
    MatrixXd x(n * t, 1);
    VectorXd errors(n * t);
    std::vector<char> first_component(spec.model == 3 ? static_cast<std::size_t>(n * t) : 0, 0);
    // E(alpha_i) = gamma (T E[X] + E[lambda]) = gamma T / 2.
    const double alpha_mean = spec.gamma * static_cast<double>(t) * 0.5;

    for (Index i = 0; i < n; ++i) {
        const double lambda = normal(engine);
        double x_sum = 0.0;
        for (Index s = 0; s < t; ++s) {
            const Index k = i * t + s;
            x(k, 0) = uniform(engine);
            bool first = false;
            errors(k) = draw_error(spec.model, engine, &first);
            if (spec.model == 3) first_component[static_cast<std::size_t>(k)] = first;
            x_sum += x(k, 0);
        }
        const double alpha = spec.gamma * (x_sum + lambda) - alpha_mean;
        for (Index s = 0; s < t; ++s) {
            const Index k = i * t + s;
            y(k) = (errors(k) - 1.0) + errors(k) * x(k, 0) + alpha;
        }
    }
    return GeneratedPanel{PanelData(n, t, std::move(y), std::move(x)), std::move(errors),
                          std::move(first_component)};
}

PanelData generate_panel(const DgpSpec& spec) { return generate_panel_detailed(spec).panel; }

std::string to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::canay: return "canay";
        case EstimatorKind::sqr: return "sqr";
        case EstimatorKind::abc: return "abc";
        case EstimatorKind::spj: return "spj";
    }
    return "unknown";
}

EstimatorKind parse_estimator(const std::string& name) {
    if (name == "canay") return EstimatorKind::canay;
    if (name == "sqr") return EstimatorKind::sqr;
    if (name == "abc") return EstimatorKind::abc;
    if (name == "spj") return EstimatorKind::spj;
    throw InvalidArgument("unknown estimator '" + name + "' (expected canay, sqr, abc or spj)");
}

void validate(const McConfig& config) {
    if (config.models.empty() || config.n_values.empty() || config.t_values.empty() ||
        config.taus.empty() || config.estimators.empty()) {
        throw InvalidArgument("Monte Carlo grid has an empty dimension");
    }
    for (int m : config.models) {
        if (m < 1 || m > 4) throw InvalidArgument("model must be 1, 2, 3 or 4, got " + std::to_string(m));
    }
    for (Index n : config.n_values) {
        if (n < 2) throw InvalidArgument("N must be at least 2");
    }
    bool needs_split = false;
    for (EstimatorKind e : config.estimators) needs_split |= e == EstimatorKind::spj;
    for (Index t : config.t_values) {
        if (t < 2) throw InvalidArgument("T must be at least 2");
        if (needs_split && t < 4) throw InvalidArgument("the jackknife needs T >= 4");
    }
    for (double tau : config.taus) require_quantile(tau);
    if (config.replications < 1) throw InvalidArgument("replications must be at least 1");
    if (config.jobs < 1) throw InvalidArgument("jobs must be at least 1");
    if (!(config.level > 0.0 && config.level < 1.0)) throw InvalidArgument("level must lie in (0, 1)");
    validate(config.sqr);
}

ReplicationOutcome run_replication(const PanelData& panel, double tau, double truth,
                                   const McConfig& config) {
    ReplicationOutcome out;
    bool needs_sqr = false;
    for (EstimatorKind e : config.estimators) needs_sqr |= e != EstimatorKind::canay;

    try {
        const FirstStepFit first_step = fixed_effects_fit(panel);
        const VectorXd canay = canay_estimate(panel, tau, first_step, config.sqr.canay_options);

        InferenceResult inference;
        EstimateResult fit;
        if (needs_sqr) {
            SqrConfig sqr = config.sqr;
            sqr.init = canay;
            fit = sqr_estimate(panel, tau, first_step, sqr);
            inference = covariance(panel, tau, first_step, fit, config.sqr, config.level);
        } else {
            inference = covariance(panel, tau, first_step, canay, config.sqr, config.level);
        }

        const double se = inference.std_errors(1);
        const double half_width = inference.critical_value * se;
        for (EstimatorKind e : config.estimators) {
            double estimate = 0.0;
            switch (e) {
                case EstimatorKind::canay:
                    estimate = canay(1);
                    break;
                case EstimatorKind::sqr:
                    estimate = fit.beta(1);
                    break;
                case EstimatorKind::abc: {
                    const BiasComponents bias = bias_components(panel, tau, first_step, fit, config.sqr);
                    estimate = analytically_corrected(fit, bias, panel.n_periods())(1);
                    break;
                }
                case EstimatorKind::spj:
                    estimate = split_panel_jackknife(panel, tau, config.sqr, fit).corrected(1);
                    break;
            }
            out.estimates.push_back(estimate);
            out.covered.push_back(std::abs(estimate - truth) <= half_width);
        }
        out.ok = true;
    } catch (const Error& e) {
        out.ok = false;
        out.error = e.kind() + ": " + e.what();
        out.estimates.clear();
        out.covered.clear();
    }
    return out;
}

McReport run_monte_carlo(const McConfig& config) {
    validate(config);

    struct Cell {
        int model;
        Index n;
        Index t;
    };
    std::vector<Cell> cells;
    for (int m : config.models)
        for (Index n : config.n_values)
            for (Index t : config.t_values) cells.push_back({m, n, t});

    const std::size_t reps = static_cast<std::size_t>(config.replications);
    const std::size_t n_taus = config.taus.size();
    // outcomes[(cell * reps + r) * n_taus + tau]
    std::vector<ReplicationOutcome> outcomes(cells.size() * reps * n_taus);

    std::vector<std::vector<double>> truths(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        for (double tau : config.taus) truths[c].push_back(true_beta_x(cells[c].model, tau));
    }

    std::atomic<std::size_t> next{0};
    const std::size_t n_tasks = cells.size() * reps;
    auto worker = [&] {
        for (std::size_t task = next.fetch_add(1); task < n_tasks; task = next.fetch_add(1)) {
            const std::size_t c = task / reps;
            const std::size_t r = task % reps;
            DgpSpec spec;
            spec.model = cells[c].model;
            spec.n_individuals = cells[c].n;
            spec.n_periods = cells[c].t;
            spec.gamma = config.gamma;
            spec.seed = stream_seed(config.seed, {static_cast<std::uint64_t>(cells[c].model),
                                                  static_cast<std::uint64_t>(cells[c].n),
                                                  static_cast<std::uint64_t>(cells[c].t),
                                                  static_cast<std::uint64_t>(r)});
            ReplicationOutcome* slot = &outcomes[task * n_taus];
            try {
                const PanelData panel = generate_panel(spec);
                for (std::size_t q = 0; q < n_taus; ++q) {
                    slot[q] = run_replication(panel, config.taus[q], truths[c][q], config);
                }
            } catch (const Error& e) {
                for (std::size_t q = 0; q < n_taus; ++q) {
                    slot[q].ok = false;
                    slot[q].error = e.kind() + ": " + e.what();
                }
            }
        }
    };

    const int jobs = std::max(1, std::min<int>(config.jobs, static_cast<int>(n_tasks)));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    McReport report;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t c = 0; c < cells.size(); ++c) {
        for (std::size_t q = 0; q < n_taus; ++q) {
            int failed = 0;
            std::string first_error;
            for (std::size_t r = 0; r < reps; ++r) {
                const auto& o = outcomes[(c * reps + r) * n_taus + q];
                if (!o.ok) {
                    if (failed == 0) first_error = o.error;
                    ++failed;
                }
            }
            const int succeeded = static_cast<int>(reps) - failed;
            const bool aborted =
                succeeded == 0 ||
                static_cast<double>(failed) > config.max_failure_fraction * static_cast<double>(reps);
            if (failed > 0) {
                std::ostringstream os;
                os << "model " << cells[c].model << " (N,T)=(" << cells[c].n << "," << cells[c].t
                   << ") tau=" << config.taus[q] << ": " << failed << " of " << reps
                   << " replications failed" << (aborted ? ", cell aborted" : ", excluded")
                   << "; first failure: " << first_error;
                report.warnings.push_back(os.str());
            }
            for (std::size_t e = 0; e < config.estimators.size(); ++e) {
                McRow row;
                row.model = cells[c].model;
                row.n = cells[c].n;
                row.t = cells[c].t;
                row.tau = config.taus[q];
                row.estimator = config.estimators[e];
                row.replications = succeeded;
                row.failed = failed;
                row.aborted = aborted;
                if (aborted) {
                    row.bias = row.mse = row.coverage = nan;
                } else {
                    double sum = 0.0;
                    double sum_sq = 0.0;
                    int hits = 0;
                    for (std::size_t r = 0; r < reps; ++r) {
                        const auto& o = outcomes[(c * reps + r) * n_taus + q];
                        if (!o.ok) continue;
                        const double err = o.estimates[e] - truths[c][q];
                        sum += err;
                        sum_sq += err * err;
                        hits += o.covered[e] ? 1 : 0;
                    }
                    row.bias = sum / succeeded;
                    row.mse = sum_sq / succeeded;
                    row.coverage = static_cast<double>(hits) / succeeded;
                }
                report.rows.push_back(row);
            }
        }
    }
    return report;
}

}  // namespace qpanel
