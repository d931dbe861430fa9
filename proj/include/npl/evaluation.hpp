#pragma once

#include "npl/domain.hpp"
#include "npl/simulation.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace npl {

struct PitValue {
    double u = 0.5; // in [1/(2n), 1 - 1/(2n)]
    double y = 0.0; // standard normal score of u
};

/// Randomized empirical PIT of a realized rate against simulated draws:
/// u = (#{draws < r} + u' #{|draw - r| <= 1e-12}) / n, clamped.
PitValue pit_value(std::span<const double> draws, double realized, double u_prime);

struct ShapiroWilk {
    double w = 0.0;
    double p = 0.0;
};

/// Shapiro-Wilk W and its p-value, Royston's AS R94 approximation.
/// 3 <= n <= 50; throws UnsupportedSize outside and InvalidInput for a
/// constant sample.
ShapiroWilk shapiro_wilk(std::span<const double> samples);

/// Mean of |truth - prediction| / |truth|; truths must be non-zero.
double mape(std::span<const double> truths, std::span<const double> predictions);

/// Per-category mean of the last `window` overall rates, combined by the
/// categories' amounts at the target date. Categories with zero amount are
/// ignored.
double top_down_baseline(std::span<const std::vector<double>> category_histories, std::span<const double> category_amounts,
                         int window = 4);

struct DateOutcome {
    DateIndex date = 0;
    PortfolioDistribution prediction;
    double realized = 0.0;
    std::optional<double> baseline;
};

struct EvaluationOptions {
    std::uint64_t seed = 0;
    int min_wtest_dates = 8;
    double significance = 0.05;
};

struct EvaluationRow {
    DateIndex date = 0;
    double truth = 0.0;
    SummaryStats stats;
    PitValue pit;
    std::optional<double> baseline;
};

struct EvaluationReport {
    std::vector<EvaluationRow> rows;
    std::optional<ShapiroWilk> wtest;
    std::string wtest_status; // "ok", or why the test was skipped
    bool rejected = false;
    double mape = 0.0;
    // Both restricted to the dates that carry a baseline.
    std::optional<double> baseline_mape;
    std::optional<double> mape_on_baseline_dates;

    std::size_t baseline_dates() const {
        std::size_t n = 0;
        for (const auto& r : rows) n += r.baseline.has_value();
        return n;
    }
};

/// PIT per date (u' from the stream (seed, date)), W-test on the normal
/// scores when there are enough dates, MAPE of the simulated means over all
/// dates, and of both forecasts over the dates that carry a baseline.
EvaluationReport evaluate_run(std::span<const DateOutcome> outcomes, const EvaluationOptions& options = {});

/// Fixed-width table: per-date statistics, W-test, MAPE.
std::string format_report(const EvaluationReport& report, const std::string& title);

} // namespace npl
