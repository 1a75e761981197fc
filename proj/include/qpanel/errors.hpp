#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qpanel {

// Base of every error raised by the library. `kind()` is the stable name
// reported on the command line (SingularDesign, NoConvergence, ...).
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

// Malformed or inconsistent input data (unbalanced panel, duplicate cells,
// non-finite values, unparsable CSV).
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error("DataError", what) {}
};

class InvalidQuantile : public Error {
public:
    explicit InvalidQuantile(double tau);
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what) : Error("InvalidArgument", what) {}
};

class PanelTooShort : public Error {
public:
    explicit PanelTooShort(const std::string& what) : Error("PanelTooShort", what) {}
};

// Numerical failures. The CLI maps these to exit code 4.
class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularDesign : public NumericalError {
public:
    explicit SingularDesign(const std::string& what) : NumericalError("SingularDesign", what) {}
};

class RankDeficient : public NumericalError {
public:
    explicit RankDeficient(const std::string& what) : NumericalError("RankDeficient", what) {}
};

class SingularSigma : public NumericalError {
public:
    explicit SingularSigma(const std::string& what) : NumericalError("SingularSigma", what) {}
};

class NoConvergence : public NumericalError {
public:
    NoConvergence(const std::string& what, int iterations, double last_gradient_norm,
                  std::vector<double> last_iterate = {})
        : NumericalError("NoConvergence", what),
          iterations_(iterations),
          last_gradient_norm_(last_gradient_norm),
          last_iterate_(std::move(last_iterate)) {}

    int iterations() const noexcept { return iterations_; }
    double last_gradient_norm() const noexcept { return last_gradient_norm_; }
    const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

private:
    int iterations_;
    double last_gradient_norm_;
    std::vector<double> last_iterate_;
};

// Throws InvalidQuantile unless 0 < tau < 1.
void require_quantile(double tau);

}  // namespace qpanel
