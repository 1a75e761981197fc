#include <doctest.h>

#include "qpanel/errors.hpp"
#include "qpanel/quantile.hpp"
#include "qpanel/sqr.hpp"
#include "support.hpp"

using namespace qpanel;
using namespace qpanel::testing;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Direct re-summation of the smoothed loss, written from the kernel polynomial.
double resummed_objective(const VectorXd& beta, const PanelData& p, const VectorXd& alpha,
                          double tau, double h) {
    auto big_k = [](double z) {
        if (z <= -1) return 1.0;
        if (z >= 1) return 0.0;
        const double z2 = z * z;
        return 0.5 - 105.0 / 64.0 * z * (1 - 5.0 / 3 * z2 + 7.0 / 5 * z2 * z2 - 3.0 / 7 * z2 * z2 * z2);
    };
    double total = 0.0;
    for (Eigen::Index i = 0; i < p.n_individuals(); ++i)
        for (Eigen::Index t = 0; t < p.n_periods(); ++t) {
            double u = p.y(i, t) - beta(0) - alpha(i);
            for (Eigen::Index j = 0; j < p.n_regressors(); ++j) u -= beta(j + 1) * p.x(i, t, j);
            total += (tau - big_k(u / h)) * u;
        }
    return total / static_cast<double>(p.n_observations());
}

struct Instance {
    PanelData panel;
    VectorXd alpha;
};

Instance random_instance(std::mt19937_64& rng, Eigen::Index n, Eigen::Index t, Eigen::Index d) {
    PanelData p(n, t, normal_vector(rng, n * t), uniform_matrix(rng, n * t, d, 0, 1));
    return {p, uniform_vector(rng, n, -0.3, 0.3)};
}

}  // namespace

TEST_CASE("rho family chain against finite differences") {
    std::mt19937_64 rng(41);
    const double step = 1e-6;
    for (int rep = 0; rep < 20; ++rep) {
        std::uniform_real_distribution<double> ut(0.05, 0.95), uh(0.2, 2.0);
        const double tau = ut(rng), h = uh(rng);
        const RhoDerivatives r(default_kernel(), tau, h);
        for (double s = -2.0; s <= 2.0; s += 0.037) {
            const double u = s * h;
            if (std::abs(std::abs(u) - h) < 1e-4 * h) continue;
            auto fd = [&](auto f) { return (f(u + step) - f(u - step)) / (2 * step); };
            auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
            CHECK(rel(fd([&](double v) { return r.rho(v); }), r.rho1(u)) < 1e-5);
            CHECK(rel(fd([&](double v) { return r.rho1(v); }), r.rho2(u)) < 1e-5);
            CHECK(rel(fd([&](double v) { return r.rho2(v); }), r.rho3(u)) < 1e-5);
            CHECK(rel(fd([&](double v) { return r.rho3(v); }), r.rho4(u)) < 1e-5);
        }
        CHECK(r.rho1(-1.5 * h) == doctest::Approx(tau - 1.0));
        CHECK(r.rho1(1.5 * h) == doctest::Approx(tau));
        CHECK(r.rho2(1.2 * h) == 0.0);
        CHECK(r.rho3(-1.2 * h) == 0.0);
        CHECK(r.rho4(1.2 * h) == 0.0);
        CHECK(r.rho(-3 * h) == doctest::Approx(check_loss(-3 * h, tau)));
    }
}

TEST_CASE("plug-in quantities") {
    const Kernel& k = default_kernel();
    const PluginRho p(k, 0.3, 0.5);
    CHECK(p.first(0.1) == doctest::Approx(0.3 - k.big_k(0.2)));
    CHECK(p.second(0.1) == doctest::Approx(k.k(0.2) / 0.5));
    CHECK(p.third(0.1) == doctest::Approx(k.k1(0.2) / 0.25));
    CHECK(p.second(0.6) == 0.0);
}

TEST_CASE("objective matches re-summation and limits") {
    std::mt19937_64 rng(43);
    auto [p, alpha] = random_instance(rng, 5, 4, 2);
    VectorXd beta = uniform_vector(rng, 3);
    SqrConfig cfg;
    cfg.bandwidth = 0.6;
    CHECK(sqr_objective(beta, p, alpha, 0.35, cfg) ==
          doctest::Approx(resummed_objective(beta, p, alpha, 0.35, 0.6)).epsilon(1e-13));

    // h -> 0 recovers the mean check loss
    cfg.bandwidth = 1e-6;
    const VectorXd u = second_step_residuals(p, alpha, beta);
    double check = 0.0;
    for (Eigen::Index k = 0; k < u.size(); ++k) check += check_loss(u(k), 0.35);
    check /= static_cast<double>(u.size());
    CHECK(std::abs(sqr_objective(beta, p, alpha, 0.35, cfg) - check) < 1e-4);

    // every residual above h: linear branch
    cfg.bandwidth = 0.5;
    VectorXd low = beta;
    low(0) = -100.0;
    const VectorXd ul = second_step_residuals(p, alpha, low);
    CHECK(sqr_objective(low, p, alpha, 0.35, cfg) == doctest::Approx(0.35 * ul.mean()));
    const VectorXd g = sqr_gradient(low, p, alpha, 0.35, cfg);
    const VectorXd mean_w = p.design().colwise().mean().transpose();
    CHECK(max_abs(g + 0.35 * mean_w) < 1e-12);
    CHECK(max_abs(sqr_hessian(low, p, alpha, 0.35, cfg)) == 0.0);
}

TEST_CASE("gradient and Hessian against finite differences") {
    std::mt19937_64 rng(47);
    for (int rep = 0; rep < 20; ++rep) {
        auto [p, alpha] = random_instance(rng, 6, 5, 1 + rep % 3);
        const Eigen::Index q = p.n_regressors() + 1;
        SqrConfig cfg;
        cfg.bandwidth = 0.5 + 0.1 * (rep % 5);
        const double tau = 0.1 + 0.04 * rep;
        const VectorXd beta = uniform_vector(rng, q, -0.5, 0.5);
        const VectorXd g = sqr_gradient(beta, p, alpha, tau, cfg);
        const MatrixXd hess = sqr_hessian(beta, p, alpha, tau, cfg);
        CHECK(max_abs(hess - hess.transpose()) < 1e-14);
        const double step = 1e-6;
        for (Eigen::Index j = 0; j < q; ++j) {
            VectorXd up = beta, dn = beta;
            up(j) += step;
            dn(j) -= step;
            const double fd = (sqr_objective(up, p, alpha, tau, cfg) - sqr_objective(dn, p, alpha, tau, cfg)) / (2 * step);
            CHECK(std::abs(fd - g(j)) < 1e-5 * std::max(1.0, std::abs(g(j))));
            const VectorXd fdg = (sqr_gradient(up, p, alpha, tau, cfg) - sqr_gradient(dn, p, alpha, tau, cfg)) / (2 * step);
            CHECK(max_abs(fdg - hess.col(j)) < 1e-5 * std::max(1.0, max_abs(hess.col(j))));
        }
    }
}

TEST_CASE("Hessian on three observations by hand") {
    // N = 1 is not a valid panel, so use N = 3, T = 2 with observations outside
    // the window everywhere but three rows.
    VectorXd y(6);
    y << 0.1, 50, -0.2, 50, 0.05, 50;
    MatrixXd x(6, 1);
    x << 0.5, 0.1, 0.2, 0.3, 0.9, 0.7;
    const PanelData p(3, 2, y, x);
    const VectorXd alpha = VectorXd::Zero(3);
    const VectorXd beta = VectorXd::Zero(2);
    SqrConfig cfg;
    cfg.bandwidth = 0.5;
    const RhoDerivatives r(default_kernel(), 0.4, 0.5);
    MatrixXd expect = MatrixXd::Zero(2, 2);
    for (int k : {0, 2, 4}) {
        const double w2 = r.rho2(y(k));
        expect(0, 0) += w2;
        expect(0, 1) += w2 * x(k, 0);
        expect(1, 1) += w2 * x(k, 0) * x(k, 0);
    }
    expect(1, 0) = expect(0, 1);
    expect /= 6.0;
    CHECK(max_abs(sqr_hessian(beta, p, alpha, 0.4, cfg) - expect) < 1e-14);
}

TEST_CASE("estimator recovers noise-free coefficients") {
    std::mt19937_64 rng(53);
    VectorXd b(2);
    b << 1.25, -0.4;
    const PanelData p = linear_panel(rng, 30, 6, 0.0, b, uniform_vector(rng, 30, -1, 1));
    const auto fs = fixed_effects_fit(p);
    // Every residual equals -beta(0), so the smoothed condition moves the
    // intercept to a root of rho1 unless tau = 1/2. Slopes stay exact.
    for (double tau : {0.1, 0.5, 0.9}) {
        const auto fit = sqr_estimate(p, tau, fs);
        CHECK(max_abs(fit.beta.tail(2) - b) < 1e-6);
        const RhoDerivatives r(default_kernel(), tau, SqrConfig{}.bandwidth);
        CHECK(std::abs(r.rho1(-fit.beta(0))) < 1e-8);
        if (tau == 0.5) CHECK(std::abs(fit.beta(0)) < 1e-6);
    }
}

TEST_CASE("estimator convergence and descent") {
    std::mt19937_64 rng(59);
    VectorXd b(1);
    b << 1.0;
    const PanelData p = linear_panel(rng, 200, 10, 0.5, b, uniform_vector(rng, 200), 1.0);
    const auto fs = fixed_effects_fit(p);
    for (double tau : {0.25, 0.5, 0.9}) {
        SqrConfig cfg;
        const auto fit = sqr_estimate(p, tau, fs, cfg);
        CHECK(fit.gradient_norm <= cfg.gradient_tolerance);
        CHECK(max_abs(sqr_gradient(fit.beta, p, fs.alpha_hat, tau, cfg)) <= cfg.gradient_tolerance);
        CHECK(max_abs(fit.initial - canay_estimate(p, tau, fs)) == 0.0);
        REQUIRE(fit.objective_trace.size() == static_cast<size_t>(fit.iterations) + 1);
        for (size_t j = 1; j < fit.objective_trace.size(); ++j)
            CHECK(fit.objective_trace[j] <= fit.objective_trace[j - 1]);
    }

    // a poor start still converges and descends
    SqrConfig far;
    far.init = VectorXd::Constant(2, 3.0);
    const auto fit = sqr_estimate(p, 0.5, fs, far);
    CHECK(fit.gradient_norm <= far.gradient_tolerance);
    for (size_t j = 1; j < fit.objective_trace.size(); ++j)
        CHECK(fit.objective_trace[j] <= fit.objective_trace[j - 1]);
}

TEST_CASE("median slope under symmetric errors") {
    std::mt19937_64 rng(61);
    VectorXd b(1);
    b << 2.0;
    const PanelData p = linear_panel(rng, 1000, 10, 0.0, b, uniform_vector(rng, 1000), 0.5);
    const auto fit = sqr_estimate(p, 0.5, fixed_effects_fit(p));
    CHECK(std::abs(fit.beta(1) - 2.0) < 0.05);
}

TEST_CASE("iteration limit raises NoConvergence with the last iterate") {
    std::mt19937_64 rng(67);
    VectorXd b(1);
    b << 1.0;
    const PanelData p = linear_panel(rng, 50, 5, 0.0, b, uniform_vector(rng, 50), 1.0);
    SqrConfig cfg;
    cfg.max_iterations = 1;
    cfg.gradient_tolerance = 1e-300;
    cfg.init = VectorXd::Constant(2, 5.0);
    try {
        sqr_estimate(p, 0.5, fixed_effects_fit(p), cfg);
        FAIL("expected NoConvergence");
    } catch (const NoConvergence& e) {
        CHECK(e.last_iterate().size() == 2);
        CHECK(e.iterations() >= 1);
    }
    SqrConfig bad;
    bad.bandwidth = 0.0;
    CHECK_THROWS_AS(validate(bad), InvalidArgument);
}
