#pragma once

#include "npl/domain.hpp"
#include "npl/execution.hpp"
#include "npl/marginal_distribution.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace npl {

/// Network depth variants: CL feeds standardized features straight into the
/// linear + clip head; CLNN_L puts L sigmoid layers in front of it.
enum class Variant { CL, CLNN2, CLNN4, CLNN6 };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);
std::vector<int> default_hidden_sizes(Variant v);

/// Adam settings for one category's network.
struct TrainConfig {
    std::vector<int> hidden_sizes;
    double learning_rate = 0.001;
    int iterations = 1000;
    int batch_size = 0; // 0: full batch
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
};

void validate(const TrainConfig& cfg);

struct DenseLayer {
    int inputs = 0;
    int outputs = 0;
    std::vector<double> weights; // outputs x inputs, row-major
    std::vector<double> bias;
};

struct QuantileNetParams {
    std::vector<DenseLayer> layers; // hidden layers (sigmoid) then the linear output layer
    std::vector<double> tau_grid;
    double clip_lo = 0.0;
    double clip_hi = kMaxRate;
    std::vector<double> feature_mean;
    std::vector<double> feature_std;
    TrainConfig train_config;

    int input_width() const { return layers.front().inputs; }
    int output_width() const { return layers.back().outputs; }
    std::vector<int> layer_sizes() const;
    std::size_t parameter_count() const;
};

void validate(const QuantileNetParams& params);

/// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases, identity
/// standardization.
QuantileNetParams init_params(int input_width, std::span<const int> hidden_sizes, std::span<const double> tau_grid,
                              std::uint64_t seed);

/// Flattened parameter vector: per layer, weights row-major then bias.
std::vector<double> flatten(const QuantileNetParams& params);
void assign(QuantileNetParams& params, std::span<const double> flat);

/// Standardize, sigmoid hidden layers, linear output, clip. Outputs are not
/// sorted.
std::vector<double> forward(std::span<const double> x, const QuantileNetParams& params);

/// tau |y - q| when y > q, (1 - tau) |y - q| otherwise.
double pinball_loss(double y, double q, double tau);

/// Training rows with features already standardized by the network's
/// constants.
struct TrainingSet {
    int width = 0;
    std::vector<double> features; // rows x width, row-major
    std::vector<double> labels;

    std::size_t rows() const noexcept { return labels.size(); }
};

TrainingSet make_training_set(std::span<const LoanRecord> records, const QuantileNetParams& params);

/// Per-feature mean and population std; zero std is replaced by one.
void fit_standardization(QuantileNetParams& params, std::span<const LoanRecord> records);

struct LossGradient {
    double loss = 0.0;
    std::vector<double> gradient; // same layout as flatten()
};

/// Mean pinball loss over rows and levels and its gradient. The clip passes
/// gradient through inside [lo, hi] and blocks it outside. The parallel path
/// reduces fixed-size row blocks in block order, so its result does not
/// depend on the thread count; the serial path is a direct per-row
/// reference.
LossGradient loss_and_gradient(const QuantileNetParams& params, const TrainingSet& data,
                               Execution exec = Execution::parallel);
LossGradient loss_and_gradient(const QuantileNetParams& params, const TrainingSet& data,
                               std::span<const std::size_t> rows, Execution exec = Execution::parallel);

struct TrainTrace {
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

/// Adam on the mean pinball loss of one category's labeled records.
/// Output biases start so that the mean output over the rows equals the
/// empirical label quantile. Deterministic given cfg.seed.
QuantileNetParams train_category(std::span<const LoanRecord> records, std::span<const double> tau_grid,
                                 const TrainConfig& cfg, TrainTrace* trace = nullptr);

/// rearrange(forward(x)) turned into a distribution.
MarginalDistribution predict_marginal(const QuantileNetParams& params, std::span<const double> x);

inline constexpr const char* kModelFormat = "npl-quantile-net";
inline constexpr int kModelFormatVersion = 1;

void save_model(const QuantileNetParams& params, int category, const std::filesystem::path& path);
/// Throws SchemaError on a wrong format tag or version.
QuantileNetParams load_model(const std::filesystem::path& path, int* category = nullptr);

} // namespace npl
