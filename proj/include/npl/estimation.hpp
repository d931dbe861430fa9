#pragma once

#include "npl/copula.hpp"
#include "npl/domain.hpp"
#include "npl/execution.hpp"
#include "npl/marginal_distribution.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace npl {

/// Categories with fewer scores than this at a date are flagged.
inline constexpr int kSmallCategoryCount = 30;

struct CategoryMoments {
    int count = 0;
    double mean = 0.0;
    double variance = 0.0; // divisor count - 1; meaningful when count >= 2

    bool has_mean() const noexcept { return count >= 1; }
    bool has_variance() const noexcept { return count >= 2; }
};

/// Per-category count, mean and unbiased variance of Gaussian scores at one
/// date. Index j - 1. A category with no scores takes no part in the fit;
/// one with a single score contributes only its mean equation.
struct MomentSummary {
    DateIndex date = 0;
    std::vector<CategoryMoments> categories;
};

MomentSummary empirical_moments(std::span<const std::vector<double>> scores_by_category, DateIndex date = 0);

struct FitOptions {
    /// Weight both equations of category j by N_j / mean(N). Off: the plain
    /// unweighted sum of squares.
    bool count_weighted = false;
    int max_iterations = 200;
    double tolerance = 1e-10;
};

struct FactorFit {
    FactorParams params;
    double objective = 0.0;
    double initial_objective = 0.0;
    int iterations = 0;
    /// Every loading is zero, so the factor is unidentified and reported as 0.
    /// Includes the case where all variances exceed one.
    bool degenerate = false;
};

/// Moment objective sum_j (beta_j m - mean_j)^2 + (1 - beta_j^2 - var_j)^2.
double moment_objective(const MomentSummary& summary, double m, std::span<const double> betas,
                        const FitOptions& options = {});

/// Minimizes the moment objective over m and beta in [0, 1]^J. Starts from
/// beta_j = sqrt(max(0, 1 - var_j)), m = sum beta v / sum beta^2, then cycles
/// exact coordinate minimizations (closed form for m, cubic for each beta).
FactorFit fit_factor_params(const MomentSummary& summary, const FitOptions& options = {});

struct EstimationOptions {
    int repetitions = 10;
    std::uint64_t seed = 0;
    FitOptions fit;
};

struct DateEstimate {
    FactorParams averaged;
    std::vector<FactorFit> repetitions;
    std::vector<int> counts;
    std::vector<CategoryId> small_categories;
    int degenerate_repetitions = 0;
    bool degenerate = false; // every repetition degenerate
};

/// Marginals of a portfolio's loans, in loan order.
using MarginalProvider = std::function<std::vector<MarginalDistribution>(const Portfolio&)>;

/// Per date and repetition: fresh u' per loan from the stream (seed, date,
/// repetition), rand_pit -> gaussian_score -> moments -> fit. Returns the
/// average of m and of each beta over repetitions. Unlabeled loans are
/// skipped, and a date where no category has two labeled loans gets no
/// estimate. Repetitions run in parallel under Execution::parallel with
/// identical results.
std::vector<DateEstimate> estimate_with_averaging(std::span<const Portfolio> portfolios, const MarginalProvider& marginals,
                                                  int categories, const EstimationOptions& options,
                                                  Execution exec = Execution::parallel);

/// Per-category mean of past loadings.
std::vector<double> predict_beta_for_new_date(std::span<const FactorParams> history);

inline constexpr const char* kFactorParamsFormat = "npl-factor-params";

void write_factor_params(const std::filesystem::path& path, std::span<const DateEstimate> estimates,
                         const EstimationOptions& options);
std::vector<FactorParams> read_factor_params(const std::filesystem::path& path);

} // namespace npl
