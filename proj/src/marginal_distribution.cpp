#include "npl/marginal_distribution.hpp"

#include "npl/error.hpp"

#include <algorithm>
#include <cmath>

namespace npl {

std::vector<double> regular_tau_grid(int count) {
    NPL_REQUIRE(count >= 1, "tau grid needs at least one level");
    std::vector<double> grid(static_cast<std::size_t>(count));
    for (int k = 1; k <= count; ++k) grid[static_cast<std::size_t>(k - 1)] = static_cast<double>(k) / (count + 1);
    return grid;
}

void validate_tau_grid(std::span<const double> tau_grid) {
    NPL_REQUIRE(!tau_grid.empty(), "tau grid is empty");
    for (std::size_t k = 0; k < tau_grid.size(); ++k) {
        NPL_REQUIRE(tau_grid[k] > 0.0 && tau_grid[k] < 1.0, "tau levels must lie in (0, 1)");
        NPL_REQUIRE(k == 0 || tau_grid[k] > tau_grid[k - 1], "tau grid must be strictly increasing");
    }
}

std::vector<double> rearrange(std::span<const double> raw) {
    std::vector<double> out(raw.begin(), raw.end());
    std::stable_sort(out.begin(), out.end());
    return out;
}

MarginalDistribution MarginalDistribution::build(std::span<const double> sorted_quantiles,
                                                 std::span<const double> tau_grid, double max_rate) {
    validate_tau_grid(tau_grid);
    NPL_REQUIRE(sorted_quantiles.size() == tau_grid.size(), "quantile count does not match the tau grid");
    for (std::size_t k = 0; k < sorted_quantiles.size(); ++k) {
        const double q = sorted_quantiles[k];
        NPL_REQUIRE(std::isfinite(q) && q >= 0.0 && q <= max_rate, "quantiles must lie in [0, r_max]");
        NPL_REQUIRE(k == 0 || q >= sorted_quantiles[k - 1], "quantiles must be nondecreasing; rearrange first");
    }

    MarginalDistribution dist;
    dist.quantiles_.assign(sorted_quantiles.begin(), sorted_quantiles.end());
    dist.tau_grid_.assign(tau_grid.begin(), tau_grid.end());

    const std::size_t count = tau_grid.size();
    std::size_t zeros = 0;
    while (zeros < count && sorted_quantiles[zeros] <= kZeroQuantileTolerance) ++zeros;

    auto& pt = dist.path_tau_;
    auto& pq = dist.path_q_;
    pt.reserve(count + 3);
    pq.reserve(count + 3);
    if (zeros == count) {
        pt = {0.0, 1.0};
        pq = {0.0, 0.0};
    } else {
        if (zeros > 0) {
            pt.insert(pt.end(), {0.0, tau_grid[zeros - 1]});
            pq.insert(pq.end(), {0.0, 0.0});
        } else {
            pt.push_back(0.0);
            pq.push_back(sorted_quantiles[0]);
        }
        for (std::size_t k = zeros; k < count; ++k) {
            pt.push_back(tau_grid[k]);
            pq.push_back(sorted_quantiles[k]);
        }
        pt.push_back(1.0);
        pq.push_back(sorted_quantiles[count - 1]);
    }
    dist.atom_at_zero_ = dist.cdf_plus(0.0);
    return dist;
}

MarginalDistribution MarginalDistribution::point_mass(double value, std::span<const double> tau_grid) {
    const std::vector<double> q(tau_grid.size(), value);
    return build(q, tau_grid, std::max(value, kMaxRate));
}

double MarginalDistribution::cdf_plus(double y) const noexcept {
    const auto it = std::upper_bound(path_q_.begin(), path_q_.end(), y);
    if (it == path_q_.begin()) return 0.0;
    const auto i = static_cast<std::size_t>(it - path_q_.begin()) - 1;
    if (i + 1 == path_q_.size()) return 1.0;
    const double w = (y - path_q_[i]) / (path_q_[i + 1] - path_q_[i]);
    return path_tau_[i] + w * (path_tau_[i + 1] - path_tau_[i]);
}

double MarginalDistribution::cdf_minus(double y) const noexcept {
    const auto it = std::lower_bound(path_q_.begin(), path_q_.end(), y);
    if (it == path_q_.end()) return 1.0;
    if (it == path_q_.begin()) return 0.0;
    const auto j = static_cast<std::size_t>(it - path_q_.begin());
    const double w = (y - path_q_[j - 1]) / (path_q_[j] - path_q_[j - 1]);
    return path_tau_[j - 1] + w * (path_tau_[j] - path_tau_[j - 1]);
}

double MarginalDistribution::quantile_unchecked(double tau) const noexcept {
    auto j = static_cast<std::size_t>(std::lower_bound(path_tau_.begin(), path_tau_.end(), tau) - path_tau_.begin());
    j = std::clamp<std::size_t>(j, 1, path_tau_.size() - 1);
    const double w = (tau - path_tau_[j - 1]) / (path_tau_[j] - path_tau_[j - 1]);
    const double q = path_q_[j - 1] + w * (path_q_[j] - path_q_[j - 1]);
    return std::clamp(q, path_q_[j - 1], path_q_[j]);
}

double MarginalDistribution::quantile(double tau) const {
    NPL_REQUIRE(tau > 0.0 && tau < 1.0, "quantile level must lie in (0, 1)");
    return quantile_unchecked(tau);
}

MarginalDistribution MarginalDistribution::scaled(double factor, double max_rate) const {
    NPL_REQUIRE(factor >= 0.0, "scale factor must be non-negative");
    std::vector<double> q(quantiles_);
    for (double& v : q) v = std::min(v * factor, max_rate);
    return build(q, tau_grid_, max_rate);
}

} // namespace npl
