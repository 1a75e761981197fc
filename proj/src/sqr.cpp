#include "qpanel/sqr.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "qpanel/errors.hpp"

namespace qpanel {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

RhoDerivatives::RhoDerivatives(const Kernel& kernel, double tau, double bandwidth)
    : kernel_(&kernel), tau_(tau), h_(bandwidth) {
    require_quantile(tau);
    if (!(bandwidth > 0.0)) throw InvalidArgument("bandwidth must be positive");
}

double RhoDerivatives::rho(double u) const { return (tau_ - kernel_->big_k(u / h_)) * u; }

double RhoDerivatives::rho1(double u) const {
    const double z = u / h_;
    return tau_ - kernel_->big_k(z) + kernel_->k(z) * z;
}

double RhoDerivatives::rho2(double u) const {
    const double z = u / h_;
    return (2.0 * kernel_->k(z) + kernel_->k1(z) * z) / h_;
}

double RhoDerivatives::rho3(double u) const {
    const double z = u / h_;
    return (3.0 * kernel_->k1(z) + kernel_->k2(z) * z) / (h_ * h_);
}

double RhoDerivatives::rho4(double u) const {
    const double z = u / h_;
    return (4.0 * kernel_->k2(z) + kernel_->k3(z) * z) / (h_ * h_ * h_);
}

PluginRho::PluginRho(const Kernel& kernel, double tau, double bandwidth)
    : kernel_(&kernel), tau_(tau), h_(bandwidth) {
    require_quantile(tau);
    if (!(bandwidth > 0.0)) throw InvalidArgument("bandwidth must be positive");
}

double PluginRho::first(double u) const { return tau_ - kernel_->big_k(u / h_); }
double PluginRho::second(double u) const { return kernel_->k(u / h_) / h_; }
double PluginRho::third(double u) const { return kernel_->k1(u / h_) / (h_ * h_); }

void validate(const SqrConfig& config) {
    if (!(config.bandwidth > 0.0) || !std::isfinite(config.bandwidth)) {
        throw InvalidArgument("bandwidth must be positive");
    }
    if (!(config.gradient_tolerance > 0.0)) throw InvalidArgument("gradient tolerance must be positive");
    if (config.max_iterations < 1) throw InvalidArgument("max_iterations must be at least 1");
    if (config.kernel == nullptr) throw InvalidArgument("kernel is not set");
}

SqrObjective::SqrObjective(VectorXd adjusted_y, MatrixXd design, double tau, const SqrConfig& config)
    : y_(std::move(adjusted_y)),
      w_(std::move(design)),
      rho_(config.kernel_ref(), tau, config.bandwidth) {
    validate(config);
    if (y_.size() != w_.rows()) throw InvalidArgument("responses and design have different lengths");
}

double SqrObjective::value(const VectorXd& beta) const {
    const VectorXd r = y_ - w_ * beta;
    double f = 0.0;
    for (Index k = 0; k < r.size(); ++k) f += rho_.rho(r(k));
    return f / static_cast<double>(r.size());
}

VectorXd SqrObjective::gradient(const VectorXd& beta) const {
    const VectorXd r = y_ - w_ * beta;
    VectorXd s(r.size());
    for (Index k = 0; k < r.size(); ++k) s(k) = rho_.rho1(r(k));
    return -(w_.transpose() * s) / static_cast<double>(r.size());
}

MatrixXd SqrObjective::hessian(const VectorXd& beta) const {
    const VectorXd r = y_ - w_ * beta;
    VectorXd s(r.size());
    for (Index k = 0; k < r.size(); ++k) s(k) = rho_.rho2(r(k));
    MatrixXd h = w_.transpose() * s.asDiagonal() * w_ / static_cast<double>(r.size());
    return 0.5 * (h + h.transpose());
}

void SqrObjective::evaluate(const VectorXd& beta, double& value, VectorXd& gradient,
                            MatrixXd& hessian) const {
    const Index m = y_.size();
    const VectorXd r = y_ - w_ * beta;
    VectorXd s1(m);
    VectorXd s2(m);
    double f = 0.0;
    for (Index k = 0; k < m; ++k) {
        f += rho_.rho(r(k));
        s1(k) = rho_.rho1(r(k));
        s2(k) = rho_.rho2(r(k));
    }
    const double nt = static_cast<double>(m);
    value = f / nt;
    gradient = -(w_.transpose() * s1) / nt;
    hessian = w_.transpose() * s2.asDiagonal() * w_ / nt;
    hessian = 0.5 * (hessian + hessian.transpose());
}

namespace {
SqrObjective panel_objective(const PanelData& panel, const VectorXd& alpha_hat, double tau,
                             const SqrConfig& config) {
    if (alpha_hat.size() != panel.n_individuals()) {
        throw InvalidArgument("alpha_hat length does not match the number of individuals");
    }
    const Index t = panel.n_periods();
    VectorXd y(panel.n_observations());
    for (Index i = 0; i < panel.n_individuals(); ++i) {
        y.segment(i * t, t) = panel.y().segment(i * t, t).array() - alpha_hat(i);
    }
    return SqrObjective(std::move(y), panel.design(), tau, config);
}
}  // namespace

double sqr_objective(const VectorXd& beta, const PanelData& panel, const VectorXd& alpha_hat,
                     double tau, const SqrConfig& config) {
    return panel_objective(panel, alpha_hat, tau, config).value(beta);
}

VectorXd sqr_gradient(const VectorXd& beta, const PanelData& panel, const VectorXd& alpha_hat,
                      double tau, const SqrConfig& config) {
    return panel_objective(panel, alpha_hat, tau, config).gradient(beta);
}

MatrixXd sqr_hessian(const VectorXd& beta, const PanelData& panel, const VectorXd& alpha_hat,
                     double tau, const SqrConfig& config) {
    return panel_objective(panel, alpha_hat, tau, config).hessian(beta);
}

VectorXd second_step_residuals(const PanelData& panel, const VectorXd& alpha_hat, const VectorXd& beta) {
    const Index t = panel.n_periods();
    VectorXd u = (panel.y() - panel.x() * beta.tail(panel.n_regressors())).array() - beta(0);
    for (Index i = 0; i < panel.n_individuals(); ++i) u.segment(i * t, t).array() -= alpha_hat(i);
    return u;
}

EstimateResult minimize_sqr(const SqrObjective& objective, const VectorXd& start,
                            const SqrConfig& config) {
    validate(config);
    const Index p = objective.design().cols();
    if (start.size() != p) throw InvalidArgument("initial coefficient vector has the wrong length");

    constexpr double armijo = 1e-4;
    constexpr double backtrack = 0.5;
    constexpr int max_backtracks = 40;
    constexpr double roundoff = 4.0 * std::numeric_limits<double>::epsilon();

    EstimateResult out;
    out.initial = start;
    VectorXd beta = start;
    double f = 0.0;
    VectorXd g;
    MatrixXd h;
    objective.evaluate(beta, f, g, h);
    out.objective_trace.push_back(f);

    int it = 0;
    double gnorm = g.lpNorm<Eigen::Infinity>();
    while (gnorm > config.gradient_tolerance) {
        if (it >= config.max_iterations) {
            std::ostringstream os;
            os << "smoothed quantile regression did not converge in " << it
               << " iterations (gradient max-norm " << gnorm << ")";
            throw NoConvergence(os.str(), it, gnorm, std::vector<double>(beta.data(), beta.data() + p));
        }
        ++it;

        // Ridge only when needed: first try the plain Newton system.
        const double trace = std::abs(h.trace());
        double ridge = 0.0;
        const double ridge0 = 1e-4 * (trace > 0.0 ? trace : 1.0) / static_cast<double>(p);
        bool stepped = false;
        for (int attempt = 0; attempt < 30 && !stepped; ++attempt) {
            MatrixXd hr = h;
            hr.diagonal().array() += ridge;
            Eigen::LLT<MatrixXd> llt(hr);
            if (llt.info() != Eigen::Success) {
                ridge = ridge == 0.0 ? ridge0 : ridge * 10.0;
                out.regularized = true;
                continue;
            }
            const VectorXd step = -llt.solve(g);
            const double slope = g.dot(step);
            if (!(slope < 0.0)) {
                ridge = ridge == 0.0 ? ridge0 : ridge * 10.0;
                out.regularized = true;
                continue;
            }
            double alpha = 1.0;
            for (int ls = 0; ls < max_backtracks; ++ls) {
                const VectorXd trial = beta + alpha * step;
                double ft = 0.0;
                VectorXd gt;
                MatrixXd ht;
                objective.evaluate(trial, ft, gt, ht);
                if (ft <= f + armijo * alpha * slope + roundoff * std::abs(f)) {
                    beta = trial;
                    f = ft;
                    g = std::move(gt);
                    h = std::move(ht);
                    stepped = true;
                    break;
                }
                alpha *= backtrack;
            }
            if (!stepped) {
                ridge = ridge == 0.0 ? ridge0 : ridge * 10.0;
                out.regularized = true;
            }
        }
        if (!stepped) {
            std::ostringstream os;
            os << "smoothed quantile regression line search failed at iteration " << it
               << " (gradient max-norm " << gnorm << ")";
            throw NoConvergence(os.str(), it, gnorm, std::vector<double>(beta.data(), beta.data() + p));
        }
        out.objective_trace.push_back(f);
        gnorm = g.lpNorm<Eigen::Infinity>();
    }

    out.beta = beta;
    out.iterations = it;
    out.gradient_norm = gnorm;
    out.objective = f;
    return out;
}

EstimateResult sqr_estimate(const PanelData& panel, double tau, const FirstStepFit& first_step,
                            const SqrConfig& config) {
    validate(config);
    SqrObjective objective = panel_objective(panel, first_step.alpha_hat, tau, config);
    VectorXd start;
    if (config.init) {
        start = *config.init;
    } else {
        start = quantile_regression(objective.adjusted_y(), objective.design(), tau, config.canay_options);
    }
    EstimateResult out = minimize_sqr(objective, start, config);
    out.alpha_hat = first_step.alpha_hat;
    out.theta_hat = first_step.theta_hat;
    return out;
}

}  // namespace qpanel
