#pragma once

namespace npl {

/// Standard normal CDF.
double gaussian_cdf(double v);

/// Standard normal quantile for u in (0, 1) (Wichura's AS 241, PPND16,
/// relative accuracy about 1e-16). Throws InvalidInput outside (0, 1).
double gaussian_score(double u);

/// Same as gaussian_score without the range check; u must lie in (0, 1).
double gaussian_score_unchecked(double u) noexcept;

} // namespace npl
