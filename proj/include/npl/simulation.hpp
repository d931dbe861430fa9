#pragma once

#include "npl/copula.hpp"
#include "npl/domain.hpp"
#include "npl/execution.hpp"
#include "npl/marginal_distribution.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace npl {

struct SummaryStats {
    double mean = 0.0;
    double std = 0.0;      // divisor n - 1
    double skewness = 0.0; // m3 / m2^1.5, central moments with divisor n
    double kurtosis = 0.0; // excess: m4 / m2^2 - 3
    bool degenerate = false; // zero spread; skewness and kurtosis reported as 0
};

/// Needs at least four draws.
SummaryStats summarize(std::span<const double> draws);

/// Linear interpolation between order statistics.
double empirical_quantile(std::span<const double> sorted, double level);

struct Histogram {
    std::vector<double> edges; // bins + 1
    std::vector<long> counts;
};

/// Equal-width bins over [min, max] of the draws; the last bin is closed.
Histogram histogram(std::span<const double> draws, int bins = 50);

struct SimulationOptions {
    int n_sim = 1000;
    std::uint64_t seed = 0;
};

struct PortfolioDistribution {
    DateIndex date = 0;
    std::vector<double> draws;
    SummaryStats stats;
    int n_sim = 0;
    std::uint64_t seed = 0;
};

/// Draw s uses only the stream (seed, s): m ~ N(0,1), then per loan
/// z ~ N(0,1), v = beta_j m + sqrt(1 - beta_j^2) z, r = Q(Phi(v)), and the
/// amount-weighted rate of the portfolio. Serial and parallel execution give
/// identical draws.
PortfolioDistribution simulate_portfolio(std::span<const MarginalDistribution> marginals,
                                         std::span<const CategoryId> categories, const FactorParams& params,
                                         std::span<const double> amounts, const SimulationOptions& options,
                                         Execution exec = Execution::parallel);

} // namespace npl
