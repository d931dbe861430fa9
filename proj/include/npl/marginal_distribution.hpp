#pragma once

#include "npl/domain.hpp"

#include <span>
#include <vector>

namespace npl {

/// Fitted quantiles at levels below this are read as the atom at zero.
inline constexpr double kZeroQuantileTolerance = 1e-9;

/// K regularly spread levels k / (K + 1), k = 1..K. K = 99 gives 0.01..0.99.
std::vector<double> regular_tau_grid(int count);

/// Throws InvalidInput unless strictly increasing inside (0, 1).
void validate_tau_grid(std::span<const double> tau_grid);

/// Stable ascending sort of raw network outputs (quantile rearrangement).
std::vector<double> rearrange(std::span<const double> raw);

/// A loan's repayment-rate law given by K sorted quantiles on a level grid.
///
/// The quantile function is piecewise linear through the knots. Knots at
/// zero collapse into an atom of mass p0 = largest level with q_k == 0; the
/// segment from (p0, 0) to the first positive knot is linear. Outside the
/// grid the quantile function is flat: Q = q_1 on (0, tau_1] when there is
/// no atom at zero, and Q = q_K on [tau_K, 1). Flat pieces (including ties
/// between knots) are atoms of the CDF and are reported by cdf_minus /
/// cdf_plus as left and right limits.
class MarginalDistribution {
public:
    /// Throws InvalidInput when the quantiles are not sorted, leave
    /// [0, max_rate], or do not match the grid.
    static MarginalDistribution build(std::span<const double> sorted_quantiles, std::span<const double> tau_grid,
                                      double max_rate = kMaxRate);

    /// Every level maps to `value`.
    static MarginalDistribution point_mass(double value, std::span<const double> tau_grid);

    /// F(y-).
    double cdf_minus(double y) const noexcept;
    /// F(y), right-continuous.
    double cdf_plus(double y) const noexcept;
    /// Generalized inverse inf{y : F(y) >= tau}; throws InvalidInput outside (0, 1).
    double quantile(double tau) const;
    double quantile_unchecked(double tau) const noexcept;

    /// F(0): 0 for a fully continuous law.
    double atom_at_zero() const noexcept { return atom_at_zero_; }
    double support_min() const noexcept { return path_q_.front(); }
    double support_max() const noexcept { return path_q_.back(); }

    const std::vector<double>& sorted_quantiles() const noexcept { return quantiles_; }
    const std::vector<double>& tau_grid() const noexcept { return tau_grid_; }

    /// Same grid with every quantile multiplied by `factor` (clamped to the support bound).
    MarginalDistribution scaled(double factor, double max_rate = kMaxRate) const;

private:
    std::vector<double> quantiles_;
    std::vector<double> tau_grid_;
    double atom_at_zero_ = 0.0;
    // Vertices of the quantile path from (0, Q(0+)) to (1, q_K); levels
    // strictly increasing, values nondecreasing.
    std::vector<double> path_tau_;
    std::vector<double> path_q_;
};

} // namespace npl
