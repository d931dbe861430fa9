#pragma once

#include "npl/domain.hpp"
#include "npl/marginal_distribution.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace npl {

// ---------------------------------------------------------------------------
// Loan CSV: loan_id,date_index,category,expected_amount,realized_rate,f1,...,fd
// realized_rate may be empty. One row per loan and date.

/// Groups rows by date_index (ascending); loans keep file order.
/// Throws ParseError (with line number) on malformed rows and SchemaError
/// on inconsistent feature dimension.
std::vector<Portfolio> load_loans(const std::filesystem::path& path);
std::vector<Portfolio> read_loans(std::istream& in);

/// Shortest round-trip formatting for every real. With no loans, a
/// non-zero `feature_dim` still writes the header.
void write_loans(const std::filesystem::path& path, std::span<const Portfolio> portfolios, std::size_t feature_dim = 0);
void write_loans(std::ostream& out, std::span<const Portfolio> portfolios, std::size_t feature_dim = 0);

// ---------------------------------------------------------------------------
// Synthetic generator.

/// Conditional law of one category:
///   P(r = 0 | x) = sigmoid(zero_coef . x + zero_intercept)
///   r | r > 0    = min(r_max, body_scale * exp(body_coef . x + body_sigma * N))
struct CategoryLaw {
    std::vector<double> zero_coef;
    double zero_intercept = 0.0;
    std::vector<double> body_coef;
    double body_sigma = 0.5;
    double body_scale = 0.3;

    double zero_probability(std::span<const double> x) const;
    /// True conditional quantile at level u in (0, 1).
    double quantile(std::span<const double> x, double u, double max_rate = kMaxRate) const;
    /// True conditional CDF F(y | x), right-continuous.
    double cdf(std::span<const double> x, double y, double max_rate = kMaxRate) const;
};

struct DatasetConfig {
    int categories = 3;
    int feature_dim = 16;
    int loans_per_category = 200;
    int dates = 12;
    std::vector<double> true_betas; // one per category, each in [0, 1)
    std::vector<CategoryLaw> laws;  // one per category; see default_laws()
    /// Mean of feature 1 at date t is feature_drift * (t - 1).
    double feature_drift = 0.0;
    double amount_median = 2000.0;
    double amount_log_sigma = 0.6;
    double max_rate = kMaxRate;
    std::uint64_t seed = 0;
};

/// Deterministic per-category laws: later categories carry more zeros and
/// smaller bodies; feature 1 raises repayment in every category.
std::vector<CategoryLaw> default_laws(int categories, int feature_dim, std::uint64_t seed);

/// Fills `laws` with default_laws when empty, then validates.
DatasetConfig complete(DatasetConfig cfg);
void validate(const DatasetConfig& cfg);

struct GroundTruth {
    std::vector<DateIndex> dates;
    std::vector<double> factors; // m_t per entry of `dates`
    std::vector<double> betas;
    std::vector<CategoryLaw> laws;
    double max_rate = kMaxRate;
    /// Gaussian score v of every generated loan, keyed like the portfolios:
    /// scores[date position][loan position].
    std::vector<std::vector<double>> scores;

    double factor(DateIndex t) const;
    /// The loan's true law on the given level grid.
    MarginalDistribution true_marginal(const LoanRecord& loan, std::span<const double> tau_grid) const;
};

struct SyntheticDataset {
    std::vector<Portfolio> portfolios;
    GroundTruth truth;
};

/// For each date draw m_t; for each loan draw x, z, set v = beta_j m_t +
/// sqrt(1 - beta_j^2) z and r = Q_j(Phi(v) | x). Dates are 1..T.
SyntheticDataset generate_synthetic(const DatasetConfig& cfg);

inline constexpr const char* kGroundTruthFormat = "npl-ground-truth";

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth);
/// Scores are not persisted.
GroundTruth read_ground_truth(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Train / test split.

struct SplitSpec {
    double train_fraction = 0.8; // in (0, 1]
    std::vector<DateIndex> holdout_dates;
};

struct DataSplit {
    std::vector<Portfolio> train;
    std::vector<Portfolio> test_overlap;
    std::vector<Portfolio> test_holdout;
};

/// Holdout dates go to test_holdout whole. Every other (date, category)
/// cell of n loans is shuffled and its first round(train_fraction * n)
/// loans (round half up) go to train. Loans keep their relative order and
/// empty portfolios are dropped.
DataSplit split(std::span<const Portfolio> data, const SplitSpec& spec, std::uint64_t seed);

/// All loans of the given category across portfolios.
std::vector<LoanRecord> loans_of_category(std::span<const Portfolio> portfolios, CategoryId category);

/// Largest category id seen.
int max_category(std::span<const Portfolio> portfolios);

} // namespace npl
