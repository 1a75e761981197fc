#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "qpanel/panel.hpp"

namespace qpanel::testing {

inline Eigen::MatrixXd uniform_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                                      double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
    return m;
}

inline Eigen::VectorXd uniform_vector(std::mt19937_64& rng, Eigen::Index n, double lo = -1.0,
                                      double hi = 1.0) {
    return uniform_matrix(rng, n, 1, lo, hi).col(0);
}

inline Eigen::VectorXd normal_vector(std::mt19937_64& rng, Eigen::Index n, double sd = 1.0) {
    std::normal_distribution<double> g(0.0, sd);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
    return v;
}

// Y_it = c + b'X_it + alpha_i + noise_sd * e_it
inline PanelData linear_panel(std::mt19937_64& rng, Eigen::Index n, Eigen::Index t, double c,
                              const Eigen::VectorXd& b, const Eigen::VectorXd& alpha,
                              double noise_sd = 0.0) {
    const Eigen::Index d = b.size();
    Eigen::MatrixXd x = uniform_matrix(rng, n * t, d, 0.0, 1.0);
    Eigen::VectorXd y(n * t);
    std::normal_distribution<double> g(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index s = 0; s < t; ++s) {
            const Eigen::Index k = i * t + s;
            y(k) = c + x.row(k).dot(b) + alpha(i) + (noise_sd > 0.0 ? noise_sd * g(rng) : 0.0);
        }
    return PanelData(n, t, std::move(y), std::move(x));
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

inline double rel_diff(double a, double b) {
    return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace qpanel::testing
