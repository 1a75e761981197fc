#pragma once

#include <vector>

namespace qpanel {

/// Polynomial smoothing kernel supported on [-1, 1].
///
/// k(u) = sum_j c_j u^j for |u| <= 1 and 0 outside. The smoothed indicator is
/// K(z) = 1 - int_{-inf}^z k(u) du, evaluated from the closed-form
/// antiderivative so moment identities hold to rounding.
class Kernel {
public:
    /// `coefficients[j]` multiplies u^j. `order` is the kernel order q: the
    /// first nonvanishing moment beyond the zeroth.
    Kernel(std::vector<double> coefficients, int order);

    double k(double u) const;
    double big_k(double z) const;
    double k1(double u) const;
    double k2(double u) const;
    double k3(double u) const;

    int order() const { return order_; }
    const std::vector<double>& coefficients() const { return coefficients_; }

    /// int_{-1}^{1} u^j k(u) du, integrated term by term.
    double moment(int j) const;

private:
    std::vector<double> coefficients_;
    std::vector<double> d1_;
    std::vector<double> d2_;
    std::vector<double> d3_;
    std::vector<double> antiderivative_;  // vanishes at -1
    int order_;
};

/// k(u) = 105/64 (1 - 5u^2 + 7u^4 - 3u^6) on [-1, 1], a fourth-order kernel.
const Kernel& default_kernel();

}  // namespace qpanel
