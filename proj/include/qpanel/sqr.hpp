#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "qpanel/kernel.hpp"
#include "qpanel/panel.hpp"
#include "qpanel/quantile.hpp"

namespace qpanel {

/// Smoothed check loss rho(u) = [tau - K(u/h)] u and its first four
/// derivatives in u. Outside |u| < h the loss is the ordinary check function.
class RhoDerivatives {
public:
    RhoDerivatives(const Kernel& kernel, double tau, double bandwidth);

    double rho(double u) const;
    double rho1(double u) const;  // tau - K(u/h) + k(u/h) u/h
    double rho2(double u) const;  // 2 k(u/h)/h + k'(u/h) u/h^2
    double rho3(double u) const;  // 3 k'(u/h)/h^2 + k''(u/h) u/h^3
    double rho4(double u) const;  // 4 k''(u/h)/h^3 + k'''(u/h) u/h^4

    double tau() const { return tau_; }
    double bandwidth() const { return h_; }

private:
    const Kernel* kernel_;
    double tau_;
    double h_;
};

/// Plug-in quantities used by the bias correction and covariance estimators:
/// tau - K(u/h), k(u/h)/h and k'(u/h)/h^2. These are not derivatives of each
/// other; the optimizer uses RhoDerivatives instead.
class PluginRho {
public:
    PluginRho(const Kernel& kernel, double tau, double bandwidth);

    double first(double u) const;
    double second(double u) const;
    double third(double u) const;

private:
    const Kernel* kernel_;
    double tau_;
    double h_;
};

struct SqrConfig {
    double bandwidth = 0.8;
    int max_iterations = 200;
    double gradient_tolerance = 1e-8;  // max-norm of the gradient
    std::optional<Eigen::VectorXd> init;  // empty: start from Canay's estimate
    const Kernel* kernel = &default_kernel();
    QuantileRegressionOptions canay_options;

    const Kernel& kernel_ref() const { return *kernel; }
};

/// Throws InvalidArgument for a nonpositive bandwidth or tolerance.
void validate(const SqrConfig& config);

/// Smoothed second-step objective (NT)^-1 sum rho(Y_it - b'W_it - alpha_i) for
/// a fixed set of adjusted responses.
class SqrObjective {
public:
    SqrObjective(Eigen::VectorXd adjusted_y, Eigen::MatrixXd design, double tau,
                 const SqrConfig& config);

    double value(const Eigen::VectorXd& beta) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& beta) const;

    /// value, gradient and Hessian from one pass over the data.
    void evaluate(const Eigen::VectorXd& beta, double& value, Eigen::VectorXd& gradient,
                  Eigen::MatrixXd& hessian) const;

    const Eigen::VectorXd& adjusted_y() const { return y_; }
    const Eigen::MatrixXd& design() const { return w_; }
    const RhoDerivatives& rho() const { return rho_; }

private:
    Eigen::VectorXd y_;
    Eigen::MatrixXd w_;
    RhoDerivatives rho_;
};

double sqr_objective(const Eigen::VectorXd& beta, const PanelData& panel,
                     const Eigen::VectorXd& alpha_hat, double tau, const SqrConfig& config = {});
Eigen::VectorXd sqr_gradient(const Eigen::VectorXd& beta, const PanelData& panel,
                             const Eigen::VectorXd& alpha_hat, double tau,
                             const SqrConfig& config = {});
Eigen::MatrixXd sqr_hessian(const Eigen::VectorXd& beta, const PanelData& panel,
                            const Eigen::VectorXd& alpha_hat, double tau,
                            const SqrConfig& config = {});

/// u_it = Y_it - beta'W_it - alpha_i, stacked like the panel.
Eigen::VectorXd second_step_residuals(const PanelData& panel, const Eigen::VectorXd& alpha_hat,
                                      const Eigen::VectorXd& beta);

struct EstimateResult {
    Eigen::VectorXd beta;        // d+1, intercept first
    Eigen::VectorXd alpha_hat;   // N
    Eigen::VectorXd theta_hat;   // d
    Eigen::VectorXd initial;     // starting point of the Newton solve
    int iterations = 0;
    double gradient_norm = 0.0;  // max-norm at beta
    double objective = 0.0;
    bool regularized = false;    // a ridge was added to the Hessian at some step
    std::vector<double> objective_trace;  // value at each accepted iterate, start included
};

/// Smoothed quantile regression second step by damped Newton.
///
/// The Hessian is ridged (Levenberg style) whenever it is not positive
/// definite or a step fails the Armijo backtracking search. Throws
/// NoConvergence carrying the last iterate after `max_iterations`.
EstimateResult sqr_estimate(const PanelData& panel, double tau, const FirstStepFit& first_step,
                            const SqrConfig& config = {});

/// Newton solve on an already assembled objective.
EstimateResult minimize_sqr(const SqrObjective& objective, const Eigen::VectorXd& start,
                            const SqrConfig& config);

}  // namespace qpanel
