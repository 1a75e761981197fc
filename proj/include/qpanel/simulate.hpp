#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qpanel/panel.hpp"
#include "qpanel/sqr.hpp"

namespace qpanel {

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z);

/// Seed of an independent stream: SplitMix64 folded over the master seed and
/// the stream coordinates, e.g. (model, N, T, replication).
std::uint64_t stream_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coordinates);

/// Every stream is a 64-bit Mersenne Twister seeded with `stream_seed`.
using Engine = std::mt19937_64;

// ---------------------------------------------------------------------------
// Data generating processes
// ---------------------------------------------------------------------------

/// Y_it = (e_it - 1) + e_it X_it + alpha_i, with
/// alpha_i = gamma (X_i1 + ... + X_iT + lambda_i) - gamma T / 2,
/// X_it ~ U(0,1), lambda_i ~ N(0,1) and an error law chosen by `model`:
///   1: N(2, 1)   2: Exp(1) + 2   3: 0.3 N(1,1) + 0.7 N(3,1)   4: t(5)
struct DgpSpec {
    int model = 1;
    Eigen::Index n_individuals = 100;
    Eigen::Index n_periods = 10;
    double gamma = 2.0;
    std::uint64_t seed = 0;
};

void validate(const DgpSpec& spec);

struct GeneratedPanel {
    PanelData panel;
    Eigen::VectorXd errors;           // e_it, stacked like the panel
    std::vector<char> first_component;  // model 3 only: e_it drawn from N(1,1)
};

GeneratedPanel generate_panel_detailed(const DgpSpec& spec);
PanelData generate_panel(const DgpSpec& spec);

/// One draw of the model's error; `first_component` reports the model 3
/// mixture label (left untouched for other models).
double draw_error(int model, Engine& engine, bool* first_component = nullptr);

/// CDF of the model's error distribution.
double error_cdf(int model, double e);

/// Coefficient of X_it at quantile tau, i.e. the tau-quantile of the error.
double true_beta_x(int model, double tau);

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

enum class EstimatorKind { canay, sqr, abc, spj };

std::string to_string(EstimatorKind kind);
/// Accepts canay, sqr, abc, spj. Throws InvalidArgument otherwise.
EstimatorKind parse_estimator(const std::string& name);

struct McConfig {
    std::vector<int> models{1};
    std::vector<Eigen::Index> n_values{100};
    std::vector<Eigen::Index> t_values{10};
    std::vector<double> taus{0.25};
    std::vector<EstimatorKind> estimators{EstimatorKind::canay, EstimatorKind::abc,
                                          EstimatorKind::spj};
    int replications = 100;
    std::uint64_t seed = 1;
    int jobs = 1;
    double gamma = 2.0;
    double level = 0.95;
    double max_failure_fraction = 0.01;
    SqrConfig sqr;
};

/// Throws InvalidArgument for an empty or invalid grid.
void validate(const McConfig& config);

struct McRow {
    int model = 1;
    Eigen::Index n = 0;
    Eigen::Index t = 0;
    double tau = 0.0;
    EstimatorKind estimator = EstimatorKind::canay;
    double bias = 0.0;      // mean of estimate - Q(tau), X coefficient
    double mse = 0.0;
    double coverage = 0.0;  // share of intervals containing Q(tau)
    int replications = 0;   // successful replications
    int failed = 0;
    bool aborted = false;   // failures above the threshold: statistics are NaN
};

struct McReport {
    std::vector<McRow> rows;  // grid order: model, N, T, tau, estimator
    std::vector<std::string> warnings;
};

/// Per-replication outcome for one (panel, tau): X-coefficient estimates and
/// interval coverage for each requested estimator, in request order.
struct ReplicationOutcome {
    bool ok = false;
    std::string error;
    std::vector<double> estimates;
    std::vector<char> covered;
};

/// Fits every requested estimator on one panel at one tau. The shared
/// variance comes from the smoothed fit whenever one is computed, otherwise
/// from the influence terms evaluated at Canay's estimate.
ReplicationOutcome run_replication(const PanelData& panel, double tau, double truth,
                                   const McConfig& config);

/// Replication r of cell (model, N, T) draws its panel from
/// stream_seed(seed, {model, N, T, r}); results are reduced in replication
/// order, so the report does not depend on `jobs`.
McReport run_monte_carlo(const McConfig& config);

}  // namespace qpanel
