#include "qpanel/correction.hpp"

#include <sstream>

#include "qpanel/errors.hpp"

namespace qpanel {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double abs_reciprocal_condition(const MatrixXd& symmetric) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetric, Eigen::EigenvaluesOnly);
    const VectorXd ev = eig.eigenvalues().cwiseAbs();
    const double hi = ev.maxCoeff();
    if (!(hi > 0.0)) return 0.0;
    return ev.minCoeff() / hi;
}

template <class F>
auto with_label(const char* label, F&& f) -> decltype(f()) {
    const std::string prefix = std::string(label) + ": ";
    try {
        return f();
    } catch (const NoConvergence& e) {
        throw NoConvergence(prefix + e.what(), e.iterations(), e.last_gradient_norm(), e.last_iterate());
    } catch (const SingularDesign& e) {
        throw SingularDesign(prefix + e.what());
    } catch (const RankDeficient& e) {
        throw RankDeficient(prefix + e.what());
    } catch (const SingularSigma& e) {
        throw SingularSigma(prefix + e.what());
    } catch (const DataError& e) {
        throw DataError(prefix + e.what());
    }
}

}  // namespace

MatrixXd sigma_hat(const PanelData& panel, double tau, const FirstStepFit& first_step,
                   const VectorXd& beta, const SqrConfig& config, const CorrectionOptions& options) {
    validate(config);
    const PluginRho plug(config.kernel_ref(), tau, config.bandwidth);
    const VectorXd u = second_step_residuals(panel, first_step.alpha_hat, beta);
    const Index d1 = panel.n_regressors() + 1;
    MatrixXd sigma = MatrixXd::Zero(d1, d1);
    VectorXd w(d1);
    w(0) = 1.0;
    for (Index k = 0; k < u.size(); ++k) {
        const double weight = plug.second(u(k));
        if (weight == 0.0) continue;
        w.tail(d1 - 1) = panel.x().row(k).transpose();
        sigma.noalias() += weight * w * w.transpose();
    }
    sigma /= static_cast<double>(u.size());
    const double rcond = abs_reciprocal_condition(sigma);
    if (!(rcond >= options.min_reciprocal_condition)) {
        std::ostringstream os;
        os << "Sigma_hat is singular (reciprocal condition " << rcond
           << "); the bandwidth may be too small for the fitted residuals";
        throw SingularSigma(os.str());
    }
    return sigma;
}

BiasComponents bias_components(const PanelData& panel, double tau, const FirstStepFit& first_step,
                               const EstimateResult& sqr_fit, const SqrConfig& config,
                               const CorrectionOptions& options) {
    const Index n = panel.n_individuals();
    const Index t = panel.n_periods();
    const Index d = panel.n_regressors();

    BiasComponents out;
    out.sigma_hat = sigma_hat(panel, tau, first_step, sqr_fit.beta, config, options);

    const PluginRho plug(config.kernel_ref(), tau, config.bandwidth);
    const VectorXd u = second_step_residuals(panel, first_step.alpha_hat, sqr_fit.beta);
    out.eta_hat = MatrixXd::Zero(n, d + 1);
    VectorXd weighted = VectorXd::Zero(d + 1);  // sum_i eta_i * sum_t eps_it^2
    for (Index i = 0; i < n; ++i) {
        double eps_sq = 0.0;
        for (Index s = 0; s < t; ++s) {
            const Index k = i * t + s;
            const double w3 = plug.third(u(k));
            out.eta_hat(i, 0) += w3;
            out.eta_hat.row(i).tail(d) += w3 * panel.x().row(k);
            eps_sq += first_step.eps_hat(k) * first_step.eps_hat(k);
        }
        out.eta_hat.row(i) /= static_cast<double>(t);
        weighted += out.eta_hat.row(i).transpose() * eps_sq;
    }
    weighted /= static_cast<double>(n * t);

    out.lambda_hat = VectorXd::Zero(d + 1);
    out.lambda_hat.tail(d) = first_step.theta_hat;
    out.b_hat = out.lambda_hat - sqr_fit.beta + 0.5 * out.sigma_hat.partialPivLu().solve(weighted);
    return out;
}

VectorXd analytically_corrected(const EstimateResult& sqr_fit, const BiasComponents& bias,
                                Index n_periods) {
    return sqr_fit.beta - bias.b_hat / static_cast<double>(n_periods);
}

VectorXd jackknife_combine(const VectorXd& full, const VectorXd& first_half, const VectorXd& second_half) {
    return 2.0 * full - 0.5 * (first_half + second_half);
}

JackknifeResult split_panel_jackknife(const PanelData& panel, double tau, const SqrConfig& config,
                                      const EstimateResult& full_fit) {
    const auto [first, second] = split_halves(panel);
    SqrConfig half_config = config;
    half_config.init = full_fit.beta;

    auto fit_half = [&](const PanelData& half) {
        const FirstStepFit fs = fixed_effects_fit(half);
        return sqr_estimate(half, tau, fs, half_config).beta;
    };

    JackknifeResult out;
    out.full = full_fit.beta;
    out.first_half = with_label("first half", [&] { return fit_half(first); });
    out.second_half = with_label("second half", [&] { return fit_half(second); });
    out.corrected = jackknife_combine(out.full, out.first_half, out.second_half);
    return out;
}

JackknifeResult split_panel_jackknife(const PanelData& panel, double tau, const SqrConfig& config) {
    split_halves(panel);  // reject T < 4 before doing any work
    const FirstStepFit fs = fixed_effects_fit(panel);
    return split_panel_jackknife(panel, tau, config, sqr_estimate(panel, tau, fs, config));
}

}  // namespace qpanel
