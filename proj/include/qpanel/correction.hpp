#pragma once

#include <Eigen/Dense>

#include "qpanel/panel.hpp"
#include "qpanel/sqr.hpp"

namespace qpanel {

/// Plug-in pieces of the leading 1/T bias of the smoothed two-step estimator.
struct BiasComponents {
    Eigen::VectorXd lambda_hat;  // [0, theta_hat']'
    Eigen::MatrixXd sigma_hat;   // (NT)^-1 sum k(u/h)/h W W'
    Eigen::MatrixXd eta_hat;     // N x (d+1), row i = T^-1 sum_t k'(u/h)/h^2 W_it'
    Eigen::VectorXd b_hat;
};

struct CorrectionOptions {
    double min_reciprocal_condition = 1e-12;  // for sigma_hat
};

/// Sigma_hat = (NT)^-1 sum k(u_it/h)/h W_it W_it' at u_it = Y_it - beta'W_it - alpha_i.
/// Throws SingularSigma when its reciprocal condition (in absolute eigenvalues)
/// falls below `min_reciprocal_condition`.
Eigen::MatrixXd sigma_hat(const PanelData& panel, double tau, const FirstStepFit& first_step,
                          const Eigen::VectorXd& beta, const SqrConfig& config,
                          const CorrectionOptions& options = {});

/// b_hat = lambda_hat - beta + 0.5 Sigma_hat^-1 (NT)^-1 sum_i sum_t eta_i eps_it^2.
BiasComponents bias_components(const PanelData& panel, double tau, const FirstStepFit& first_step,
                               const EstimateResult& sqr_fit, const SqrConfig& config,
                               const CorrectionOptions& options = {});

/// beta - b_hat / T.
Eigen::VectorXd analytically_corrected(const EstimateResult& sqr_fit, const BiasComponents& bias,
                                       Eigen::Index n_periods);

/// 2 * full - 0.5 * (first + second).
Eigen::VectorXd jackknife_combine(const Eigen::VectorXd& full, const Eigen::VectorXd& first_half,
                                  const Eigen::VectorXd& second_half);

struct JackknifeResult {
    Eigen::VectorXd corrected;
    Eigen::VectorXd full;
    Eigen::VectorXd first_half;
    Eigen::VectorXd second_half;
};

/// Split-panel jackknife of the smoothed two-step estimator. Each half reruns
/// the first step and starts its Newton solve from the full-sample estimate.
/// Errors from a half are rethrown with "first half" / "second half" in the
/// message and the original error type.
JackknifeResult split_panel_jackknife(const PanelData& panel, double tau, const SqrConfig& config,
                                      const EstimateResult& full_fit);

/// As above, fitting the full sample first.
JackknifeResult split_panel_jackknife(const PanelData& panel, double tau,
                                      const SqrConfig& config = {});

}  // namespace qpanel
