#include "npl/copula.hpp"

#include "npl/error.hpp"

#include <algorithm>
#include <cmath>

namespace npl {

void validate(const FactorParams& params) {
    NPL_REQUIRE(std::isfinite(params.m), "common factor must be finite");
    NPL_REQUIRE(!params.betas.empty(), "factor params need at least one loading");
    for (double b : params.betas) NPL_REQUIRE(b >= 0.0 && b <= 1.0, "factor loadings must lie in [0, 1]");
}

double rand_pit(double y, const MarginalDistribution& dist, double u_prime) {
    const double yy = std::clamp(y, dist.support_min(), dist.support_max());
    const double lo = dist.cdf_minus(yy);
    const double hi = dist.cdf_plus(yy);
    const double u = lo + u_prime * (hi - lo);
    return std::clamp(u, kUniformClamp, 1.0 - kUniformClamp);
}

double inverse_pit(double u, const MarginalDistribution& dist) noexcept {
    return dist.quantile_unchecked(std::clamp(u, kUniformClamp, 1.0 - kUniformClamp));
}

double factor_combine(double m, double z, double beta) {
    NPL_REQUIRE(beta >= 0.0 && beta <= 1.0, "factor loading must lie in [0, 1]");
    return beta * m + std::sqrt(1.0 - beta * beta) * z;
}

} // namespace npl
