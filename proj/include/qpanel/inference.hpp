#pragma once

#include <Eigen/Dense>

#include "qpanel/correction.hpp"
#include "qpanel/panel.hpp"
#include "qpanel/sqr.hpp"

namespace qpanel {

/// Influence terms Z_it = rho1_it W_it - gamma_i eps_it - A B^-1 Xdd_it eps_it
/// with the plug-in rho1 = tau - K(u/h), gamma_i = T^-1 sum_t k(u_it/h)/h W_it,
/// A = N^-1 sum_i gamma_i Xbar_i' and B the within Gram matrix over NT.
struct InfluenceTerms {
    Eigen::MatrixXd z;          // NT x (d+1), row (i,t)
    Eigen::MatrixXd gamma_hat;  // N x (d+1)
    Eigen::MatrixXd a_hat;      // (d+1) x d
    Eigen::MatrixXd b_hat;      // d x d
};

/// Throws SingularDesign when B is not invertible.
InfluenceTerms influence_terms(const PanelData& panel, double tau, const FirstStepFit& first_step,
                               const Eigen::VectorXd& beta, const SqrConfig& config);

struct InferenceResult {
    Eigen::VectorXd estimate;
    Eigen::MatrixXd sigma_hat;
    Eigen::MatrixXd omega_hat;  // (NT)^-1 sum Z Z'
    Eigen::MatrixXd sandwich;   // Sigma^-1 Omega Sigma^-1
    Eigen::VectorXd std_errors; // sqrt(sandwich_jj / NT)
    Eigen::VectorXd ci_lower;
    Eigen::VectorXd ci_upper;
    double level = 0.95;
    double critical_value = 0.0;
};

/// Two-sided standard normal critical value for a confidence level in (0, 1).
double normal_critical_value(double level);

/// Sandwich covariance evaluated at `beta` (the smoothed estimate), with
/// normal confidence intervals centered at `beta`. Throws SingularSigma.
InferenceResult covariance(const PanelData& panel, double tau, const FirstStepFit& first_step,
                           const Eigen::VectorXd& beta, const SqrConfig& config, double level = 0.95,
                           const CorrectionOptions& options = {});

InferenceResult covariance(const PanelData& panel, double tau, const FirstStepFit& first_step,
                           const EstimateResult& sqr_fit, const SqrConfig& config,
                           double level = 0.95, const CorrectionOptions& options = {});

/// Same variance, intervals recentered at another point estimate.
InferenceResult centered_at(const InferenceResult& inference, const Eigen::VectorXd& estimate);

}  // namespace qpanel
