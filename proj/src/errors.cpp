#include "qpanel/errors.hpp"

#include <cmath>
#include <sstream>

namespace qpanel {

namespace {
std::string quantile_message(double tau) {
    std::ostringstream os;
    os << "quantile level must lie in (0, 1), got " << tau;
    return os.str();
}
}  // namespace

InvalidQuantile::InvalidQuantile(double tau) : Error("InvalidQuantile", quantile_message(tau)) {}

void require_quantile(double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw InvalidQuantile(tau);
}

}  // namespace qpanel
