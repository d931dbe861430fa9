#pragma once

#include "npl/data.hpp"
#include "npl/domain.hpp"
#include "npl/estimation.hpp"
#include "npl/evaluation.hpp"
#include "npl/quantile_net.hpp"
#include "npl/simulation.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace npl {

struct RunPaths {
    std::filesystem::path data_dir = "data";
    std::filesystem::path models_dir = "models";
    std::filesystem::path reports_dir = "reports";
    /// External loan file; when empty, data_dir/loans.csv (written by generate).
    std::filesystem::path loans;
};

struct RunConfig {
    RunPaths paths;
    CategoryScheme categories;
    std::optional<DatasetConfig> dataset; // synthetic generator settings
    SplitSpec split;
    std::uint64_t split_seed = 0;
    Variant variant = Variant::CLNN2;
    int tau_levels = 99;
    TrainConfig train;
    EstimationOptions estimation;
    SimulationOptions simulation;
    int histogram_bins = 50;
    EvaluationOptions evaluation;
    int baseline_window = 4;

    std::filesystem::path loans_path() const;
    std::vector<double> tau_grid() const { return regular_tau_grid(tau_levels); }
};

/// Parses a JSON run configuration. Relative paths are resolved against
/// `base_dir`. Every stage's seed must be given explicitly. Throws
/// SchemaError with the offending key.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

} // namespace npl
