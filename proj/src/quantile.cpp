#include "qpanel/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "qpanel/errors.hpp"

namespace qpanel {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// rho_tau without validation, for inner loops.
inline double rho(double u, double tau) { return u > 0.0 ? tau * u : (tau - 1.0) * u; }

// Huberized check loss: quadratic on |u| <= c, matches rho_tau outside with a
// continuous first derivative.
inline double huber_rho(double u, double tau, double c) {
    if (u > c) return tau * u;
    if (u < -c) return (tau - 1.0) * u;
    return u * u / (4.0 * c) + (tau - 0.5) * u + c / 4.0;
}

inline double huber_slope(double u, double tau, double c) {
    if (u > c) return tau;
    if (u < -c) return tau - 1.0;
    return u / (2.0 * c) + tau - 0.5;
}

double huber_objective(const VectorXd& r, double tau, double c) {
    double f = 0.0;
    for (Index k = 0; k < r.size(); ++k) f += huber_rho(r(k), tau, c);
    return f;
}

// Damped Newton on the Huberized loss for one smoothing level. Returns the
// number of Newton steps taken.
int huber_stage(const VectorXd& y, const MatrixXd& x, double tau, double c, VectorXd& beta,
                int max_iterations) {
    const Index m = x.rows();
    const Index p = x.cols();
    VectorXd r = y - x * beta;
    double f = huber_objective(r, tau, c);
    int it = 0;
    for (; it < max_iterations; ++it) {
        VectorXd grad = VectorXd::Zero(p);
        MatrixXd hess = MatrixXd::Zero(p, p);
        for (Index k = 0; k < m; ++k) {
            grad.noalias() -= huber_slope(r(k), tau, c) * x.row(k).transpose();
            if (std::abs(r(k)) <= c) hess.selfadjointView<Eigen::Lower>().rankUpdate(x.row(k).transpose(), 1.0 / (2.0 * c));
        }
        hess = hess.selfadjointView<Eigen::Lower>();
        if (grad.lpNorm<Eigen::Infinity>() <= 1e-12 * static_cast<double>(m)) break;

        // The window may hold too few points for a nonsingular Hessian.
        const double ridge = 1e-8 * (hess.trace() / static_cast<double>(p) + 1.0 / c);
        hess.diagonal().array() += ridge;
        Eigen::LLT<MatrixXd> llt(hess);
        if (llt.info() != Eigen::Success) break;
        const VectorXd step = -llt.solve(grad);
        const double directional = grad.dot(step);
        if (!(directional < 0.0)) break;

        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            const VectorXd trial = beta + alpha * step;
            const VectorXd rt = y - x * trial;
            const double ft = huber_objective(rt, tau, c);
            if (ft <= f + 1e-4 * alpha * directional) {
                beta = trial;
                r = rt;
                accepted = (f - ft) > 1e-15 * (1.0 + std::abs(f));
                f = ft;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
    }
    return it;
}

void require_full_rank(const MatrixXd& x, double tolerance) {
    const Index m = x.rows();
    const Index p = x.cols();
    if (p < 1) throw RankDeficient("design has no columns");
    if (m <= p) {
        std::ostringstream os;
        os << "quantile regression needs more observations than coefficients (m=" << m
           << ", p=" << p << ")";
        throw RankDeficient(os.str());
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
    qr.setThreshold(tolerance);
    if (qr.rank() < p) {
        std::ostringstream os;
        os << "design matrix has rank " << qr.rank() << " < " << p << " columns";
        throw RankDeficient(os.str());
    }
}

// Greedy basis: observations ordered by |residual|, kept when they raise the
// rank of the selected rows.
std::vector<Index> initial_basis(const MatrixXd& x, const VectorXd& r) {
    const Index m = x.rows();
    const Index p = x.cols();
    std::vector<Index> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(r(a)) < std::abs(r(b)); });

    std::vector<Index> basis;
    MatrixXd q(p, p);  // orthonormal rows spanning the selected observations
    Index rank = 0;
    for (Index k : order) {
        VectorXd v = x.row(k).transpose();
        const double scale = v.norm();
        if (scale == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass) {
            for (Index j = 0; j < rank; ++j) v -= q.row(j).dot(v) * q.row(j).transpose();
        }
        if (v.norm() > 1e-9 * scale) {
            q.row(rank) = (v / v.norm()).transpose();
            ++rank;
            basis.push_back(k);
            if (rank == p) break;
        }
    }
    return basis;
}

}  // namespace

double check_loss(double u, double tau) {
    require_quantile(tau);
    return rho(u, tau);
}

double check_objective(const VectorXd& y, const MatrixXd& x, const VectorXd& beta, double tau) {
    require_quantile(tau);
    const VectorXd r = y - x * beta;
    double f = 0.0;
    for (Index k = 0; k < r.size(); ++k) f += rho(r(k), tau);
    return f;
}

QuantileRegressionFit quantile_regression_fit(const VectorXd& y, const MatrixXd& x, double tau,
                                              const QuantileRegressionOptions& options) {
    require_quantile(tau);
    if (y.size() != x.rows()) throw InvalidArgument("responses and design have different lengths");
    if (!y.allFinite() || !x.allFinite()) throw InvalidArgument("non-finite responses or design");
    require_full_rank(x, options.rank_tolerance);

    const Index m = x.rows();
    const Index p = x.cols();
    QuantileRegressionFit fit;

    // Warm start: least squares, then Huberized check loss with a shrinking window.
    VectorXd beta = x.colPivHouseholderQr().solve(y);
    {
        VectorXd r = y - x * beta;
        std::vector<double> abs_r(r.data(), r.data() + r.size());
        std::nth_element(abs_r.begin(), abs_r.begin() + m / 2, abs_r.end());
        double c = abs_r[static_cast<std::size_t>(m / 2)];
        const double floor_c = 1e-6 * (1.0 + y.cwiseAbs().mean());
        if (!(c > floor_c)) c = floor_c;
        for (int stage = 0; stage < options.max_smoothing_stages && c >= floor_c; ++stage) {
            fit.newton_iterations += huber_stage(y, x, tau, c, beta, options.max_newton_iterations);
            r = y - x * beta;
            const Index inside = (r.array().abs() <= c).count();
            if (inside <= 2 * p) break;
            c *= 0.1;
        }
    }

    // Vertex pivoting with exact line search along the 2p edges of the basis.
    const std::vector<Index> start = initial_basis(x, y - x * beta);
    if (static_cast<Index>(start.size()) < p) throw RankDeficient("no nonsingular basis found");
    std::vector<Index> basis = start;

    const int max_pivots = options.max_pivots > 0 ? options.max_pivots : static_cast<int>(20 * m + 1000);
    std::vector<char> in_basis(static_cast<std::size_t>(m), 0);
    for (Index k : basis) in_basis[static_cast<std::size_t>(k)] = 1;

    MatrixXd xb(p, p);
    VectorXd yb(p);
    VectorXd r(m);
    VectorXd tol(m);
    for (Index k = 0; k < m; ++k) tol(k) = 1e-11 * (1.0 + std::abs(y(k)));
    std::vector<std::pair<double, Index>> breaks;
    breaks.reserve(static_cast<std::size_t>(m));

    int pivots = 0;
    for (;; ++pivots) {
        for (Index j = 0; j < p; ++j) {
            xb.row(j) = x.row(basis[static_cast<std::size_t>(j)]);
            yb(j) = y(basis[static_cast<std::size_t>(j)]);
        }
        Eigen::PartialPivLU<MatrixXd> lu(xb);
        beta = lu.solve(yb);
        r = y - x * beta;
        for (Index j = 0; j < p; ++j) r(basis[static_cast<std::size_t>(j)]) = 0.0;
        const double objective = [&] {
            double f = 0.0;
            for (Index k = 0; k < m; ++k) f += rho(r(k), tau);
            return f;
        }();

        if (pivots >= max_pivots) {
            throw NoConvergence("quantile regression pivoting did not terminate after " +
                                    std::to_string(pivots) + " pivots",
                                pivots, objective);
        }
        // Z(:, j) = x * Xb^{-1} e_j: rate of change of x_k'beta when basis
        // residual j is moved while the other basis residuals stay zero.
        const MatrixXd z = x * lu.inverse();

        // One-sided directional derivatives. Along +s*Z(:,j), residual k moves
        // by -t*s*Z(k,j).
        double best = 0.0;
        Index best_j = -1;
        double best_s = 0.0;
        for (Index j = 0; j < p; ++j) {
            double g_nonzero = 0.0;  // linear part from nonzero residuals
            double g_pos = 0.0;      // kink contributions for s = +1
            double g_neg = 0.0;      // kink contributions for s = -1
            for (Index k = 0; k < m; ++k) {
                const double zk = z(k, j);
                if (zk == 0.0) continue;
                if (in_basis[static_cast<std::size_t>(k)] || std::abs(r(k)) <= tol(k)) {
                    g_pos += rho(-zk, tau);
                    g_neg += rho(zk, tau);
                } else {
                    g_nonzero += -zk * (r(k) > 0.0 ? tau : tau - 1.0);
                }
            }
            const double g_plus = g_nonzero + g_pos;
            const double g_minus = -g_nonzero + g_neg;
            const double scale = 1e-12 * (1.0 + z.col(j).cwiseAbs().sum());
            if (g_plus < best - scale) {
                best = g_plus;
                best_j = j;
                best_s = 1.0;
            }
            if (g_minus < best - scale) {
                best = g_minus;
                best_j = j;
                best_s = -1.0;
            }
        }
        if (best_j < 0) {
            fit.objective = objective;
            break;
        }

        // Exact line search: the objective along the edge is convex piecewise
        // linear; each nonbasic residual crossing zero raises the slope by |z_k|.
        breaks.clear();
        for (Index k = 0; k < m; ++k) {
            if (in_basis[static_cast<std::size_t>(k)] || std::abs(r(k)) <= tol(k)) continue;
            const double zk = best_s * z(k, best_j);
            if (zk == 0.0) continue;
            const double t = r(k) / zk;
            if (t > 0.0) breaks.emplace_back(t, k);
        }
        std::sort(breaks.begin(), breaks.end());
        double slope = best;
        Index entering = -1;
        for (const auto& [t, k] : breaks) {
            slope += std::abs(z(k, best_j));
            if (slope >= 0.0) {
                entering = k;
                break;
            }
        }
        if (entering < 0) {
            throw NoConvergence("quantile regression objective is unbounded along a basis edge",
                                pivots, objective);
        }
        const Index leaving = basis[static_cast<std::size_t>(best_j)];
        in_basis[static_cast<std::size_t>(leaving)] = 0;
        in_basis[static_cast<std::size_t>(entering)] = 1;
        basis[static_cast<std::size_t>(best_j)] = entering;
    }

    fit.coefficients = beta;
    fit.basis = basis;
    fit.pivots = pivots;
    return fit;
}

VectorXd quantile_regression(const VectorXd& y, const MatrixXd& x, double tau,
                             const QuantileRegressionOptions& options) {
    return quantile_regression_fit(y, x, tau, options).coefficients;
}

VectorXd subgradient_slack(const VectorXd& y, const MatrixXd& x, const VectorXd& beta, double tau) {
    require_quantile(tau);
    const Index p = x.cols();
    const VectorXd r = y - x * beta;
    VectorXd free_sum = VectorXd::Zero(p);
    VectorXd fit_bound = VectorXd::Zero(p);
    for (Index k = 0; k < r.size(); ++k) {
        if (std::abs(r(k)) <= 1e-8 * (1.0 + std::abs(y(k)))) {
            fit_bound += x.row(k).transpose().cwiseAbs();
        } else {
            const double psi = tau - (r(k) <= 0.0 ? 1.0 : 0.0);
            free_sum += psi * x.row(k).transpose();
        }
    }
    return free_sum.cwiseAbs() - fit_bound;
}

VectorXd adjusted_responses(const PanelData& panel, const FirstStepFit& first_step) {
    const Index n = panel.n_individuals();
    const Index t = panel.n_periods();
    VectorXd out(n * t);
    for (Index i = 0; i < n; ++i) {
        out.segment(i * t, t) = panel.y().segment(i * t, t).array() - first_step.alpha_hat(i);
    }
    return out;
}

VectorXd canay_estimate(const PanelData& panel, double tau, const FirstStepFit& first_step,
                        const QuantileRegressionOptions& options) {
    return quantile_regression(adjusted_responses(panel, first_step), panel.design(), tau, options);
}

}  // namespace qpanel
