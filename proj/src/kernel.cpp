#include "qpanel/kernel.hpp"

#include <cmath>

#include "qpanel/errors.hpp"

namespace qpanel {

namespace {

double horner(const std::vector<double>& c, double u) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * u + *it;
    return v;
}

std::vector<double> derivative(const std::vector<double>& c) {
    if (c.size() <= 1) return {0.0};
    std::vector<double> d(c.size() - 1);
    for (std::size_t j = 1; j < c.size(); ++j) d[j - 1] = static_cast<double>(j) * c[j];
    return d;
}

}  // namespace

Kernel::Kernel(std::vector<double> coefficients, int order)
    : coefficients_(std::move(coefficients)), order_(order) {
    if (coefficients_.empty()) throw InvalidArgument("kernel needs at least one coefficient");
    if (order_ < 2) throw InvalidArgument("kernel order must be at least 2");
    d1_ = derivative(coefficients_);
    d2_ = derivative(d1_);
    d3_ = derivative(d2_);
    antiderivative_.assign(coefficients_.size() + 1, 0.0);
    for (std::size_t j = 0; j < coefficients_.size(); ++j) {
        antiderivative_[j + 1] = coefficients_[j] / static_cast<double>(j + 1);
    }
    antiderivative_[0] = -horner(antiderivative_, -1.0);
}

double Kernel::k(double u) const { return std::abs(u) > 1.0 ? 0.0 : horner(coefficients_, u); }
double Kernel::k1(double u) const { return std::abs(u) > 1.0 ? 0.0 : horner(d1_, u); }
double Kernel::k2(double u) const { return std::abs(u) > 1.0 ? 0.0 : horner(d2_, u); }
double Kernel::k3(double u) const { return std::abs(u) > 1.0 ? 0.0 : horner(d3_, u); }

double Kernel::big_k(double z) const {
    if (z <= -1.0) return 1.0;
    if (z >= 1.0) return 0.0;
    return 1.0 - horner(antiderivative_, z);
}

double Kernel::moment(int j) const {
    // int_{-1}^{1} u^{j+l} du is 2/(j+l+1) for even j+l, else 0.
    double m = 0.0;
    for (std::size_t l = 0; l < coefficients_.size(); ++l) {
        const int power = j + static_cast<int>(l);
        if (power % 2 == 0) m += coefficients_[l] * 2.0 / static_cast<double>(power + 1);
    }
    return m;
}

const Kernel& default_kernel() {
    static const Kernel kernel = [] {
        constexpr double c = 105.0 / 64.0;
        return Kernel({c, 0.0, -5.0 * c, 0.0, 7.0 * c, 0.0, -3.0 * c}, 4);
    }();
    return kernel;
}

}  // namespace qpanel
