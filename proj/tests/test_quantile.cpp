#include <doctest.h>

#include <algorithm>
#include <limits>

#include "qpanel/errors.hpp"
#include "qpanel/quantile.hpp"
#include "support.hpp"

using namespace qpanel;
using namespace qpanel::testing;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Minimum summed check loss over all fits interpolating p observations.
double brute_force_minimum(const VectorXd& y, const MatrixXd& x, double tau) {
    const int m = static_cast<int>(y.size());
    const int p = static_cast<int>(x.cols());
    std::vector<int> mask(m, 0);
    std::fill(mask.begin(), mask.begin() + p, 1);
    double best = std::numeric_limits<double>::infinity();
    do {
        MatrixXd a(p, p);
        VectorXd rhs(p);
        int row = 0;
        for (int k = 0; k < m; ++k)
            if (mask[k]) {
                a.row(row) = x.row(k);
                rhs(row) = y(k);
                ++row;
            }
        Eigen::FullPivLU<MatrixXd> lu(a);
        if (!lu.isInvertible()) continue;
        const VectorXd b = lu.solve(rhs);
        double total = 0.0;
        for (int k = 0; k < m; ++k) {
            const double u = y(k) - x.row(k).dot(b);
            total += u > 0 ? tau * u : (tau - 1.0) * u;
        }
        best = std::min(best, total);
    } while (std::prev_permutation(mask.begin(), mask.end()));
    return best;
}

MatrixXd with_intercept(const MatrixXd& x) {
    MatrixXd w(x.rows(), x.cols() + 1);
    w.col(0).setOnes();
    w.rightCols(x.cols()) = x;
    return w;
}

}  // namespace

TEST_CASE("check loss values") {
    CHECK(check_loss(0.0, 0.3) == 0.0);
    CHECK(check_loss(2.0, 0.25) == 0.5);
    CHECK(check_loss(-2.0, 0.25) == 1.5);
    CHECK_THROWS_AS(check_loss(1.0, 0.0), InvalidQuantile);
    CHECK_THROWS_AS(check_loss(1.0, 1.0), InvalidQuantile);
    CHECK_THROWS_AS(check_loss(1.0, std::nan("")), InvalidQuantile);
    for (double u : {-3.0, -0.1, 0.4, 7.0})
        for (double tau : {0.1, 0.5, 0.9}) CHECK(check_loss(u, tau) >= 0.0);
}

TEST_CASE("median of five") {
    VectorXd y(5);
    y << 4, 1, 5, 3, 2;
    const VectorXd b = quantile_regression(y, MatrixXd::Ones(5, 1), 0.5);
    CHECK(b(0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("intercept-only bracketing") {
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 40; ++rep) {
        const int m = 5 + rep;
        const VectorXd y = normal_vector(rng, m);
        for (double tau : {0.1, 0.25, 0.5, 0.77, 0.9}) {
            const double q = quantile_regression(y, MatrixXd::Ones(m, 1), tau)(0);
            const auto below = (y.array() < q - 1e-12).count();
            const auto above = (y.array() > q + 1e-12).count();
            CHECK(below <= tau * m + 1e-9);
            CHECK(above <= (1.0 - tau) * m + 1e-9);
        }
    }
}

TEST_CASE("six observations against exhaustive search") {
    std::mt19937_64 rng(6);
    const MatrixXd x = with_intercept(uniform_matrix(rng, 6, 1));
    const VectorXd y = normal_vector(rng, 6);
    for (double tau : {0.2, 0.5, 0.8}) {
        const auto fit = quantile_regression_fit(y, x, tau);
        CHECK(fit.objective == doctest::Approx(brute_force_minimum(y, x, tau)).epsilon(1e-10));
        CHECK(fit.basis.size() == 2);
    }
}

TEST_CASE("oracle equivalence up to nine observations and three columns") {
    std::mt19937_64 rng(17);
    int instances = 0;
    for (int p = 1; p <= 3; ++p)
        for (int m = p + 1; m <= 9; ++m)
            for (int rep = 0; rep < 4; ++rep) {
                const MatrixXd x = with_intercept(uniform_matrix(rng, m, p - 1, -2, 2));
                const VectorXd y = normal_vector(rng, m, 2.0);
                std::uniform_real_distribution<double> ut(0.05, 0.95);
                const double tau = ut(rng);
                const double got = check_objective(y, x, quantile_regression(y, x, tau), tau);
                CHECK(got <= brute_force_minimum(y, x, tau) + 1e-8);
                ++instances;
            }
    CHECK(instances > 50);
}

TEST_CASE("duplicated data has the same minimizer objective") {
    std::mt19937_64 rng(9);
    const MatrixXd x = with_intercept(uniform_matrix(rng, 15, 2));
    const VectorXd y = normal_vector(rng, 15);
    MatrixXd x2(30, 3);
    x2 << x, x;
    VectorXd y2(30);
    y2 << y, y;
    const auto one = quantile_regression_fit(y, x, 0.3);
    const auto two = quantile_regression_fit(y2, x2, 0.3);
    CHECK(two.objective == doctest::Approx(2.0 * one.objective).epsilon(1e-10));
    CHECK(check_objective(y, x, two.coefficients, 0.3) == doctest::Approx(one.objective).epsilon(1e-10));
}

TEST_CASE("scale equivariance and subgradient optimality") {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 20; ++rep) {
        const int m = 30 + 10 * rep;
        const MatrixXd x = with_intercept(uniform_matrix(rng, m, 2));
        const VectorXd y = x * VectorXd::Constant(3, 1.0) + normal_vector(rng, m);
        const double tau = 0.1 + 0.04 * rep;
        const VectorXd b = quantile_regression(y, x, tau);
        CHECK(subgradient_slack(y, x, b, tau).maxCoeff() < 1e-9);
        const double c = 3.7;
        const VectorXd bc = quantile_regression(c * y, x, tau);
        CHECK(max_abs(bc - c * b) < 1e-8 * (1 + max_abs(c * b)));
    }
}

TEST_CASE("larger problem matches subgradient condition") {
    std::mt19937_64 rng(2);
    const int m = 5000;
    const MatrixXd x = with_intercept(uniform_matrix(rng, m, 3, 0, 1));
    VectorXd y = normal_vector(rng, m);
    y += x.rowwise().sum();
    const auto fit = quantile_regression_fit(y, x, 0.9);
    CHECK(subgradient_slack(y, x, fit.coefficients, 0.9).maxCoeff() < 1e-8);
}

TEST_CASE("rank deficiency is reported") {
    MatrixXd x(6, 3);
    x.col(0).setOnes();
    x.col(1) << 1, 2, 3, 4, 5, 6;
    x.col(2) = 2.0 * x.col(1);
    CHECK_THROWS_AS(quantile_regression(VectorXd::LinSpaced(6, 0, 1), x, 0.5), RankDeficient);
    CHECK_THROWS_AS(quantile_regression(VectorXd::Zero(2), MatrixXd::Ones(2, 2), 0.5), RankDeficient);
    CHECK_THROWS_AS(quantile_regression(VectorXd::Zero(4), MatrixXd::Ones(4, 1), 1.5), InvalidQuantile);
}

TEST_CASE("canay estimate on exact and tiny panels") {
    std::mt19937_64 rng(31);
    VectorXd b(2);
    b << 0.7, -1.2;
    const PanelData p = linear_panel(rng, 20, 5, 0.0, b, uniform_vector(rng, 20, -2, 2));
    const auto fs = fixed_effects_fit(p);
    for (double tau : {0.1, 0.5, 0.9}) {
        const VectorXd got = canay_estimate(p, tau, fs);
        CHECK(std::abs(got(0)) < 1e-9);
        CHECK(max_abs(got.tail(2) - b) < 1e-9);
    }

    const PanelData tiny(2, 3, normal_vector(rng, 6), uniform_matrix(rng, 6, 1));
    const auto tfs = fixed_effects_fit(tiny);
    const VectorXd direct = quantile_regression(adjusted_responses(tiny, tfs), tiny.design(), 0.4);
    CHECK(max_abs(canay_estimate(tiny, 0.4, tfs) - direct) == 0.0);
    for (int k = 0; k < 6; ++k)
        CHECK(adjusted_responses(tiny, tfs)(k) == doctest::Approx(tiny.y()(k) - tfs.alpha_hat(k / 3)));
}
