#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "qpanel/simulate.hpp"

namespace qpanel {

/// One output line of the estimate command.
struct CoefficientRow {
    double tau = 0.0;
    std::string estimator;
    Eigen::Index coefficient = 0;  // 0 is the intercept
    double estimate = 0.0;
    double std_error = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
};

/// Fixed-point rendering used by every table ("nan" for NaN).
std::string format_number(double value, int precision = 6);

void write_estimates_csv(std::ostream& out, Eigen::Index n, Eigen::Index t,
                         const std::vector<CoefficientRow>& rows);
void write_estimates_markdown(std::ostream& out, Eigen::Index n, Eigen::Index t,
                              const std::vector<CoefficientRow>& rows);

/// Columns: model,n,t,tau,estimator,coefficient_index,bias,mse,coverage,reps,failed.
void write_mc_csv(std::ostream& out, const McReport& report);

/// One table per model: rows (N,T) grouped by tau; column groups for biases,
/// MSEs and coverage with one column per estimator.
void write_mc_markdown(std::ostream& out, const McReport& report);

}  // namespace qpanel
