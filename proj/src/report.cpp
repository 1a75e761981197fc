#include "qpanel/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

namespace qpanel {

std::string format_number(double value, int precision) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, value);
    std::string s(buf);
    if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);  // no "-0.000"
    return s;
}

namespace {
std::string tau_label(double tau) { return format_number(tau, 4); }
}  // namespace

void write_estimates_csv(std::ostream& out, Eigen::Index n, Eigen::Index t,
                         const std::vector<CoefficientRow>& rows) {
    out << "n,t,tau,estimator,coefficient_index,estimate,std_error,ci_lower,ci_upper\n";
    for (const auto& r : rows) {
        out << n << ',' << t << ',' << tau_label(r.tau) << ',' << r.estimator << ',' << r.coefficient
            << ',' << format_number(r.estimate) << ',' << format_number(r.std_error) << ','
            << format_number(r.ci_lower) << ',' << format_number(r.ci_upper) << '\n';
    }
}

void write_estimates_markdown(std::ostream& out, Eigen::Index n, Eigen::Index t,
                              const std::vector<CoefficientRow>& rows) {
    out << "(N,T) = (" << n << "," << t << ")\n\n";
    out << "| tau | estimator | coefficient | estimate | std. error | CI lower | CI upper |\n";
    out << "|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
        out << "| " << tau_label(r.tau) << " | " << r.estimator << " | "
            << (r.coefficient == 0 ? std::string("intercept") : "x" + std::to_string(r.coefficient))
            << " | " << format_number(r.estimate) << " | " << format_number(r.std_error) << " | "
            << format_number(r.ci_lower) << " | " << format_number(r.ci_upper) << " |\n";
    }
}

void write_mc_csv(std::ostream& out, const McReport& report) {
    out << "model,n,t,tau,estimator,coefficient_index,bias,mse,coverage,reps,failed\n";
    for (const auto& r : report.rows) {
        out << r.model << ',' << r.n << ',' << r.t << ',' << tau_label(r.tau) << ','
            << to_string(r.estimator) << ",1," << format_number(r.bias) << ','
            << format_number(r.mse) << ',' << format_number(r.coverage) << ',' << r.replications
            << ',' << r.failed << '\n';
    }
}

void write_mc_markdown(std::ostream& out, const McReport& report) {
    // Preserve grid order: models, then tau, then (N,T).
    std::vector<int> models;
    std::vector<EstimatorKind> estimators;
    for (const auto& r : report.rows) {
        if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
        if (std::find(estimators.begin(), estimators.end(), r.estimator) == estimators.end()) {
            estimators.push_back(r.estimator);
        }
    }
    using Key = std::tuple<int, double, Eigen::Index, Eigen::Index, EstimatorKind>;
    std::map<Key, const McRow*> lookup;
    for (const auto& r : report.rows) lookup[{r.model, r.tau, r.n, r.t, r.estimator}] = &r;

    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        const int model = models[mi];
        std::vector<double> taus;
        std::vector<std::pair<Eigen::Index, Eigen::Index>> cells;
        int reps = 0;
        for (const auto& r : report.rows) {
            if (r.model != model) continue;
            if (std::find(taus.begin(), taus.end(), r.tau) == taus.end()) taus.push_back(r.tau);
            const auto cell = std::make_pair(r.n, r.t);
            if (std::find(cells.begin(), cells.end(), cell) == cells.end()) cells.push_back(cell);
            reps = std::max(reps, r.replications + r.failed);
        }

        if (mi > 0) out << '\n';
        out << "Biases, MSEs and coverage rates for model " << model << " (" << reps
            << " replications)\n\n";
        out << "| tau | (N,T) |";
        for (const char* group : {"bias", "MSE", "coverage"}) {
            for (EstimatorKind e : estimators) out << ' ' << group << ' ' << to_string(e) << " |";
        }
        out << "\n|---|---|";
        for (std::size_t k = 0; k < 3 * estimators.size(); ++k) out << "---|";
        out << '\n';
        for (double tau : taus) {
            for (const auto& [n, t] : cells) {
                out << "| " << tau_label(tau) << " | (" << n << "," << t << ") |";
                for (int group = 0; group < 3; ++group) {
                    for (EstimatorKind e : estimators) {
                        const auto it = lookup.find({model, tau, n, t, e});
                        if (it == lookup.end()) {
                            out << " |";
                            continue;
                        }
                        const McRow& r = *it->second;
                        const double v = group == 0 ? r.bias : group == 1 ? r.mse : r.coverage;
                        out << ' ' << format_number(v, 3) << " |";
                    }
                }
                out << '\n';
            }
        }
    }
}

}  // namespace qpanel
