#pragma once

#include "npl/domain.hpp"
#include "npl/marginal_distribution.hpp"

#include <vector>

namespace npl {

/// Uniforms handed to the normal quantile are kept inside (delta, 1 - delta).
inline constexpr double kUniformClamp = 1e-12;

/// Common-factor realization and per-category loadings at one date.
struct FactorParams {
    DateIndex date = 0;
    double m = 0.0;
    std::vector<double> betas; // index j - 1, each in [0, 1]

    double beta(CategoryId j) const { return betas.at(static_cast<std::size_t>(j - 1)); }
};

void validate(const FactorParams& params);

/// Randomized probability integral transform
///     u = F(y-) + u' (F(y) - F(y-)),
/// clamped into (delta, 1 - delta). Observations outside the fitted support
/// are first projected onto it, so a rate above the top fitted quantile is
/// spread over the upper tail mass instead of collapsing to 1.
double rand_pit(double y, const MarginalDistribution& dist, double u_prime);

/// Generalized inverse of the marginal at u (0 for u inside the zero atom).
double inverse_pit(double u, const MarginalDistribution& dist) noexcept;

/// beta * m + sqrt(1 - beta^2) * z; throws InvalidInput for beta outside [0, 1].
double factor_combine(double m, double z, double beta);

} // namespace npl
