#include "npl/simulation.hpp"

#include "npl/error.hpp"
#include "npl/normal.hpp"
#include "npl/random.hpp"

#include <algorithm>
#include <cmath>

namespace npl {

namespace {

// Neumaier compensated sum.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        const double t = sum + x;
        carry += std::fabs(sum) >= std::fabs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + carry; }
};

} // namespace

SummaryStats summarize(std::span<const double> draws) {
    NPL_REQUIRE(draws.size() >= 4, "summary statistics need at least four draws");
    const auto n = static_cast<double>(draws.size());
    CompensatedSum s;
    for (double x : draws) s.add(x);
    SummaryStats st;
    st.mean = s.value() / n;
    CompensatedSum c2, c3, c4;
    for (double x : draws) {
        const double d = x - st.mean;
        const double d2 = d * d;
        c2.add(d2);
        c3.add(d2 * d);
        c4.add(d2 * d2);
    }
    const double m2 = c2.value() / n;
    st.std = std::sqrt(c2.value() / (n - 1.0));
    if (!(m2 > 1e-300)) {
        st.std = 0.0;
        st.degenerate = true;
        return st;
    }
    st.skewness = (c3.value() / n) / std::pow(m2, 1.5);
    st.kurtosis = (c4.value() / n) / (m2 * m2) - 3.0;
    return st;
}

double empirical_quantile(std::span<const double> sorted, double level) {
    NPL_REQUIRE(!sorted.empty(), "empty sample");
    NPL_REQUIRE(level >= 0.0 && level <= 1.0, "quantile level must lie in [0, 1]");
    const double h = level * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Histogram histogram(std::span<const double> draws, int bins) {
    NPL_REQUIRE(!draws.empty(), "empty sample");
    NPL_REQUIRE(bins >= 1, "histogram needs at least one bin");
    const auto [lo_it, hi_it] = std::minmax_element(draws.begin(), draws.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi <= lo) {
        lo -= 0.5e-6;
        hi += 0.5e-6;
    }
    Histogram h;
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int b = 0; b <= bins; ++b) h.edges[static_cast<std::size_t>(b)] = lo + (hi - lo) * b / bins;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    for (double x : draws) {
        auto b = static_cast<long>(std::floor((x - lo) / (hi - lo) * bins));
        b = std::clamp(b, 0L, static_cast<long>(bins) - 1);
        ++h.counts[static_cast<std::size_t>(b)];
    }
    return h;
}

namespace {

double simulate_draw(std::span<const MarginalDistribution> marginals, std::span<const double> loan_betas,
                     std::span<const double> amounts, double total_amount, std::uint64_t seed, std::uint64_t s) {
    Stream rng(seed, {0x5157ULL, s});
    const double m = rng.normal();
    double num = 0.0;
    for (std::size_t i = 0; i < marginals.size(); ++i) {
        const double beta = loan_betas[i];
        const double v = beta * m + std::sqrt(1.0 - beta * beta) * rng.normal();
        num += inverse_pit(gaussian_cdf(v), marginals[i]) * amounts[i];
    }
    return std::clamp(num / total_amount, 0.0, kMaxRate);
}

} // namespace

PortfolioDistribution simulate_portfolio(std::span<const MarginalDistribution> marginals,
                                         std::span<const CategoryId> categories, const FactorParams& params,
                                         std::span<const double> amounts, const SimulationOptions& options,
                                         Execution exec) {
    NPL_REQUIRE(options.n_sim >= 1, "n_sim must be at least 1");
    NPL_REQUIRE(!marginals.empty(), "portfolio has no loans");
    NPL_REQUIRE(marginals.size() == amounts.size(), "marginal count does not match amount count");
    NPL_REQUIRE(marginals.size() == categories.size(), "marginal count does not match category count");
    validate(params);

    std::vector<double> loan_betas(marginals.size());
    double total = 0.0;
    for (std::size_t i = 0; i < marginals.size(); ++i) {
        NPL_REQUIRE(amounts[i] > 0.0, "amounts must be positive");
        NPL_REQUIRE(categories[i] >= 1 && static_cast<std::size_t>(categories[i]) <= params.betas.size(),
                    "loan category has no loading");
        loan_betas[i] = params.beta(categories[i]);
        total += amounts[i];
    }

    PortfolioDistribution out;
    out.date = params.date;
    out.n_sim = options.n_sim;
    out.seed = options.seed;
    out.draws.resize(static_cast<std::size_t>(options.n_sim));
    if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 8)
        for (int s = 0; s < options.n_sim; ++s)
            out.draws[static_cast<std::size_t>(s)] =
                simulate_draw(marginals, loan_betas, amounts, total, options.seed, static_cast<std::uint64_t>(s));
    } else {
        for (int s = 0; s < options.n_sim; ++s)
            out.draws[static_cast<std::size_t>(s)] =
                simulate_draw(marginals, loan_betas, amounts, total, options.seed, static_cast<std::uint64_t>(s));
    }
    if (out.draws.size() >= 4) out.stats = summarize(out.draws);
    return out;
}

} // namespace npl
