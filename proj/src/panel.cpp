#include "qpanel/panel.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "qpanel/errors.hpp"

namespace qpanel {

PanelData::PanelData(Eigen::Index n_individuals, Eigen::Index n_periods, Eigen::VectorXd y,
                     Eigen::MatrixXd x)
    : n_(n_individuals), t_(n_periods), y_(std::move(y)), x_(std::move(x)) {
    if (n_ < 2) throw DataError("panel needs at least 2 individuals");
    if (t_ < 2) throw DataError("panel needs at least 2 periods");
    if (x_.cols() < 1) throw DataError("panel needs at least one regressor");
    if (y_.size() != n_ * t_ || x_.rows() != n_ * t_) {
        std::ostringstream os;
        os << "panel shape mismatch: expected " << n_ * t_ << " observations, got y=" << y_.size()
           << " x=" << x_.rows();
        throw DataError(os.str());
    }
    if (!y_.allFinite() || !x_.allFinite()) throw DataError("panel contains non-finite values");
}

Eigen::MatrixXd PanelData::design() const {
    Eigen::MatrixXd w(n_observations(), n_regressors() + 1);
    w.col(0).setOnes();
    w.rightCols(n_regressors()) = x_;
    return w;
}

PanelData PanelData::periods(Eigen::Index first, Eigen::Index count) const {
    Eigen::VectorXd y(n_ * count);
    Eigen::MatrixXd x(n_ * count, x_.cols());
    for (Eigen::Index i = 0; i < n_; ++i) {
        y.segment(i * count, count) = y_.segment(row(i, first), count);
        x.middleRows(i * count, count) = x_.middleRows(row(i, first), count);
    }
    return PanelData(n_, count, std::move(y), std::move(x));
}

WithinTransform within_transform(const PanelData& panel) {
    const Eigen::Index n = panel.n_individuals();
    const Eigen::Index t = panel.n_periods();
    const Eigen::Index d = panel.n_regressors();

    WithinTransform out;
    out.x_within.resize(n * t, d);
    out.y_within.resize(n * t);
    out.x_bar.resize(n, d);
    out.y_bar.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto xi = panel.x().middleRows(i * t, t);
        const auto yi = panel.y().segment(i * t, t);
        out.x_bar.row(i) = xi.colwise().mean();
        out.y_bar(i) = yi.mean();
        out.x_within.middleRows(i * t, t) = xi.rowwise() - out.x_bar.row(i);
        // Responses are demeaned by their own mean (Y_it - Ybar_i).
        out.y_within.segment(i * t, t) = yi.array() - out.y_bar(i);
    }
    return out;
}

double reciprocal_condition(const Eigen::MatrixXd& symmetric) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetric, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    const double hi = ev.cwiseAbs().maxCoeff();
    const double lo = ev.minCoeff();
    if (!(hi > 0.0) || !(lo > 0.0)) return 0.0;
    return lo / hi;
}

FirstStepFit fixed_effects_fit(const PanelData& panel, const FixedEffectsOptions& options) {
    const Eigen::Index n = panel.n_individuals();
    const Eigen::Index t = panel.n_periods();
    const double nt = static_cast<double>(panel.n_observations());

    WithinTransform within = within_transform(panel);

    const Eigen::MatrixXd gram = within.x_within.transpose() * within.x_within;
    const double rcond = reciprocal_condition(gram);
    if (rcond < options.min_reciprocal_condition) {
        std::ostringstream os;
        os << "within Gram matrix is singular (reciprocal condition " << rcond
           << "); regressors are collinear or constant over time";
        throw SingularDesign(os.str());
    }
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) throw SingularDesign("within Gram matrix is not positive definite");

    FirstStepFit fit;
    fit.theta_hat = llt.solve(within.x_within.transpose() * within.y_within);
    fit.alpha_hat = within.y_bar - within.x_bar * fit.theta_hat;
    fit.eps_hat.resize(n * t);
    for (Eigen::Index i = 0; i < n; ++i) {
        fit.eps_hat.segment(i * t, t) =
            (panel.y().segment(i * t, t) - panel.x().middleRows(i * t, t) * fit.theta_hat).array() -
            fit.alpha_hat(i);
    }
    fit.b_matrix = gram / nt;
    fit.x_bar = std::move(within.x_bar);
    fit.x_within = std::move(within.x_within);
    return fit;
}

std::pair<PanelData, PanelData> split_halves(const PanelData& panel) {
    const Eigen::Index t = panel.n_periods();
    if (t < 4) {
        throw PanelTooShort("split-panel jackknife needs T >= 4, got T=" + std::to_string(t));
    }
    const Eigen::Index first = t / 2;
    return {panel.periods(0, first), panel.periods(first, t - first)};
}

}  // namespace qpanel
