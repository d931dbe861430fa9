#pragma once

#include "npl/config.hpp"
#include "npl/copula.hpp"
#include "npl/evaluation.hpp"
#include "npl/quantile_net.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace npl {

struct PipelineOptions {
    bool timestamp = true;         // "generated_at" in report headers
    bool allow_degenerate = false; // otherwise a degenerate factor fit is fatal
    Execution exec = Execution::parallel;
    std::ostream* log = nullptr;
};

/// Writes loans.csv and ground_truth.json into the data directory.
void cmd_generate(const RunConfig& cfg, const PipelineOptions& opts = {});
/// Splits the loans, writes train/test CSVs and one model per category.
void cmd_train(const RunConfig& cfg, const PipelineOptions& opts = {});
/// Estimates factor parameters per training date -> factor_params.json.
void cmd_fit_copula(const RunConfig& cfg, const PipelineOptions& opts = {});
/// One simulation report per test portfolio.
void cmd_simulate(const RunConfig& cfg, const PipelineOptions& opts = {});
/// PIT, W-test and MAPE per test set -> evaluation_<set>.json and .txt.
void cmd_evaluate(const RunConfig& cfg, const PipelineOptions& opts = {});
/// generate (when the config has a dataset), train, fit-copula, simulate, evaluate.
void run_all(const RunConfig& cfg, const PipelineOptions& opts = {});

// Pieces shared by the commands, exposed for tests.

std::filesystem::path model_path(const RunConfig& cfg, CategoryId category);
std::filesystem::path factor_params_path(const RunConfig& cfg);
std::filesystem::path simulation_report_path(const RunConfig& cfg, const std::string& set, DateIndex date);

/// Index j - 1. Throws InvalidInput naming the first missing model.
std::vector<QuantileNetParams> load_models(const RunConfig& cfg);

MarginalProvider model_marginals(const std::vector<QuantileNetParams>& models);

/// Estimated parameters of `date` when present, otherwise loadings averaged
/// over the estimated dates before it (all dates when none precede it).
/// `predicted` tells which case applied.
FactorParams params_for_date(std::span<const FactorParams> history, DateIndex date, bool* predicted = nullptr);

/// Amount-weighted realized rate of each category at every date, for
/// labeled loans. rates[j - 1] maps date -> rate.
std::vector<std::vector<std::pair<DateIndex, double>>> category_rate_history(std::span<const Portfolio> data,
                                                                             int categories);

/// Top-down forecast for `target`: the mean of each category's last `window`
/// rates before target.date, weighted by the category's amount in target.
/// Empty when some category lacks `window` past rates.
std::optional<double> baseline_for(const Portfolio& target,
                                   const std::vector<std::vector<std::pair<DateIndex, double>>>& history, int window);

PortfolioDistribution simulate_test_portfolio(const Portfolio& portfolio, const std::vector<QuantileNetParams>& models,
                                              const FactorParams& params, const SimulationOptions& options,
                                              Execution exec = Execution::parallel);

inline constexpr const char* kSimulationFormat = "npl-simulation";
inline constexpr const char* kEvaluationFormat = "npl-evaluation";

} // namespace npl
