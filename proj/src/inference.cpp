#include "qpanel/inference.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "qpanel/errors.hpp"

namespace qpanel {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

InfluenceTerms influence_terms(const PanelData& panel, double tau, const FirstStepFit& first_step,
                               const VectorXd& beta, const SqrConfig& config) {
    validate(config);
    const Index n = panel.n_individuals();
    const Index t = panel.n_periods();
    const Index d = panel.n_regressors();
    const PluginRho plug(config.kernel_ref(), tau, config.bandwidth);
    const VectorXd u = second_step_residuals(panel, first_step.alpha_hat, beta);

    InfluenceTerms out;
    out.b_hat = first_step.b_matrix;
    out.gamma_hat = MatrixXd::Zero(n, d + 1);
    for (Index i = 0; i < n; ++i) {
        for (Index s = 0; s < t; ++s) {
            const Index k = i * t + s;
            const double w2 = plug.second(u(k));
            out.gamma_hat(i, 0) += w2;
            out.gamma_hat.row(i).tail(d) += w2 * panel.x().row(k);
        }
    }
    out.gamma_hat /= static_cast<double>(t);
    out.a_hat = out.gamma_hat.transpose() * first_step.x_bar / static_cast<double>(n);

    if (reciprocal_condition(out.b_hat) < 1e-12) {
        throw SingularDesign("within Gram matrix B is singular");
    }
    // (A B^-1) as a (d+1) x d matrix: solve B' M' = A'.
    const MatrixXd ab_inv = out.b_hat.llt().solve(out.a_hat.transpose()).transpose();

    out.z.resize(n * t, d + 1);
    for (Index i = 0; i < n; ++i) {
        for (Index s = 0; s < t; ++s) {
            const Index k = i * t + s;
            const double eps = first_step.eps_hat(k);
            const double w1 = plug.first(u(k));
            out.z(k, 0) = w1;
            out.z.row(k).tail(d) = w1 * panel.x().row(k);
            out.z.row(k) -= eps * out.gamma_hat.row(i);
            out.z.row(k) -= eps * (ab_inv * first_step.x_within.row(k).transpose()).transpose();
        }
    }
    return out;
}

double normal_critical_value(double level) {
    if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("confidence level must lie in (0, 1)");
    const boost::math::normal standard;
    return boost::math::quantile(standard, 0.5 + 0.5 * level);
}

InferenceResult covariance(const PanelData& panel, double tau, const FirstStepFit& first_step,
                           const VectorXd& beta, const SqrConfig& config, double level,
                           const CorrectionOptions& options) {
    InferenceResult out;
    out.level = level;
    out.critical_value = normal_critical_value(level);
    out.sigma_hat = sigma_hat(panel, tau, first_step, beta, config, options);

    const InfluenceTerms terms = influence_terms(panel, tau, first_step, beta, config);
    const double nt = static_cast<double>(panel.n_observations());
    out.omega_hat = terms.z.transpose() * terms.z / nt;
    out.omega_hat = 0.5 * (out.omega_hat + out.omega_hat.transpose());

    const Eigen::PartialPivLU<MatrixXd> lu(out.sigma_hat);
    const MatrixXd sigma_inv = lu.inverse();
    out.sandwich = sigma_inv * out.omega_hat * sigma_inv.transpose();
    out.sandwich = 0.5 * (out.sandwich + out.sandwich.transpose());
    out.std_errors = (out.sandwich.diagonal().array().max(0.0) / nt).sqrt();
    return centered_at(out, beta);
}

InferenceResult covariance(const PanelData& panel, double tau, const FirstStepFit& first_step,
                           const EstimateResult& sqr_fit, const SqrConfig& config, double level,
                           const CorrectionOptions& options) {
    return covariance(panel, tau, first_step, sqr_fit.beta, config, level, options);
}

InferenceResult centered_at(const InferenceResult& inference, const VectorXd& estimate) {
    InferenceResult out = inference;
    out.estimate = estimate;
    out.ci_lower = estimate - out.critical_value * out.std_errors;
    out.ci_upper = estimate + out.critical_value * out.std_errors;
    return out;
}

}  // namespace qpanel
