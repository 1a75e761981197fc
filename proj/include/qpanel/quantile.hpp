#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qpanel/panel.hpp"

namespace qpanel {

/// Check function rho_tau(u) = (tau - 1{u <= 0}) * u: tau*u for u > 0 and
/// (tau - 1)*u for u <= 0. Throws InvalidQuantile unless 0 < tau < 1.
double check_loss(double u, double tau);

/// Summed check loss of y - X*beta.
double check_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                       const Eigen::VectorXd& beta, double tau);

struct QuantileRegressionOptions {
    int max_smoothing_stages = 8;
    int max_newton_iterations = 50;
    int max_pivots = 0;  // 0 selects 20 * m + 1000
    double rank_tolerance = 1e-10;
};

struct QuantileRegressionFit {
    Eigen::VectorXd coefficients;
    double objective = 0.0;
    std::vector<Eigen::Index> basis;  // observations interpolated exactly
    int newton_iterations = 0;
    int pivots = 0;
};

/// Linear quantile regression: argmin_b sum_k rho_tau(y_k - x_k'b).
///
/// A Huberized check loss with a shrinking smoothing window provides a warm
/// start; vertex pivoting with exact line search then finishes at a basic
/// solution (p observations interpolated). Throws RankDeficient when x lacks
/// full column rank or m <= p, NoConvergence if pivoting does not terminate.
QuantileRegressionFit quantile_regression_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                              double tau,
                                              const QuantileRegressionOptions& options = {});

Eigen::VectorXd quantile_regression(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, double tau,
                                    const QuantileRegressionOptions& options = {});

/// Residual of the subgradient optimality condition, for diagnostics and
/// tests. Returns, per coefficient, |sum_{k not fit} psi(r_k) x_k| minus
/// sum_{k fit} |x_k|, where "fit" means |r_k| <= 1e-8 (1 + |y_k|). All entries
/// are <= 0 (up to rounding) at a minimizer.
Eigen::VectorXd subgradient_slack(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& beta, double tau);

/// Canay's second step: quantile regression of Y_it - alpha_i on [1, X_it'].
Eigen::VectorXd canay_estimate(const PanelData& panel, double tau, const FirstStepFit& first_step,
                               const QuantileRegressionOptions& options = {});

/// Responses with the first-step fixed effects removed, stacked like the panel.
Eigen::VectorXd adjusted_responses(const PanelData& panel, const FirstStepFit& first_step);

}  // namespace qpanel
