#pragma once

#include <Eigen/Dense>
#include <utility>

namespace qpanel {

/// Balanced N x T panel with d regressors.
///
/// Observations are stored row-major by individual: the row for (i, t) is
/// `i * T + t` in both the response vector and the regressor matrix, so
/// `x()` is directly the stacked (NT x d) design without the intercept.
class PanelData {
public:
    /// Throws DataError if the shapes disagree, N < 2, T < 2, d < 1, or any
    /// cell is non-finite.
    PanelData(Eigen::Index n_individuals, Eigen::Index n_periods, Eigen::VectorXd y,
              Eigen::MatrixXd x);

    Eigen::Index n_individuals() const { return n_; }
    Eigen::Index n_periods() const { return t_; }
    Eigen::Index n_regressors() const { return x_.cols(); }
    Eigen::Index n_observations() const { return n_ * t_; }

    Eigen::Index row(Eigen::Index i, Eigen::Index t) const { return i * t_ + t; }

    double y(Eigen::Index i, Eigen::Index t) const { return y_(row(i, t)); }
    double x(Eigen::Index i, Eigen::Index t, Eigen::Index j) const { return x_(row(i, t), j); }

    const Eigen::VectorXd& y() const { return y_; }
    const Eigen::MatrixXd& x() const { return x_; }

    /// Stacked design W with rows [1, X_it'].
    Eigen::MatrixXd design() const;

    /// Sub-panel holding periods [first, first + count) for every individual.
    PanelData periods(Eigen::Index first, Eigen::Index count) const;

private:
    Eigen::Index n_;
    Eigen::Index t_;
    Eigen::VectorXd y_;
    Eigen::MatrixXd x_;
};

struct WithinTransform {
    Eigen::MatrixXd x_within;  // NT x d, X_it - Xbar_i
    Eigen::VectorXd y_within;  // NT, Y_it - Ybar_i
    Eigen::MatrixXd x_bar;     // N x d
    Eigen::VectorXd y_bar;     // N
};

/// Removes per-individual time means from y and x.
WithinTransform within_transform(const PanelData& panel);

/// First-step linear fixed-effects fit shared by every second-step estimator.
struct FirstStepFit {
    Eigen::VectorXd theta_hat;  // d
    Eigen::VectorXd alpha_hat;  // N
    Eigen::VectorXd eps_hat;    // NT, Y_it - theta'X_it - alpha_i
    Eigen::MatrixXd b_matrix;   // d x d, within Gram matrix / NT
    Eigen::MatrixXd x_bar;      // N x d
    Eigen::MatrixXd x_within;   // NT x d

    double eps(const PanelData& panel, Eigen::Index i, Eigen::Index t) const {
        return eps_hat(panel.row(i, t));
    }
};

struct FixedEffectsOptions {
    // Reject the within Gram matrix when its reciprocal condition number
    // falls below this value.
    double min_reciprocal_condition = 1e-12;
};

/// Within (fixed-effects) estimator of theta, alpha_i = Ybar_i - theta'Xbar_i,
/// and the first-step residuals. Throws SingularDesign when the within Gram
/// matrix is numerically singular (time-invariant or collinear regressors).
FirstStepFit fixed_effects_fit(const PanelData& panel, const FixedEffectsOptions& options = {});

/// Splits the time dimension at floor(T/2). Throws PanelTooShort if T < 4.
std::pair<PanelData, PanelData> split_halves(const PanelData& panel);

/// Reciprocal condition number of a symmetric positive semidefinite matrix,
/// from its eigenvalues (0 when the smallest eigenvalue is not positive).
double reciprocal_condition(const Eigen::MatrixXd& symmetric);

}  // namespace qpanel
