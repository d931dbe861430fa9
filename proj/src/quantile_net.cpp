#include "npl/quantile_net.hpp"

#include "npl/error.hpp"
#include "npl/random.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace npl {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

std::string to_string(Variant v) {
    switch (v) {
    case Variant::CL: return "CL";
    case Variant::CLNN2: return "CLNN2";
    case Variant::CLNN4: return "CLNN4";
    case Variant::CLNN6: return "CLNN6";
    }
    return "?";
}

Variant parse_variant(const std::string& name) {
    for (Variant v : {Variant::CL, Variant::CLNN2, Variant::CLNN4, Variant::CLNN6})
        if (to_string(v) == name) return v;
    throw InvalidInput("unknown model variant '" + name + "' (expected CL, CLNN2, CLNN4 or CLNN6)");
}

std::vector<int> default_hidden_sizes(Variant v) {
    switch (v) {
    case Variant::CL: return {};
    case Variant::CLNN2: return {128, 64};
    case Variant::CLNN4: return {128, 64, 32, 16};
    case Variant::CLNN6: return {64, 64, 32, 32, 16, 8};
    }
    return {};
}

void validate(const TrainConfig& cfg) {
    NPL_REQUIRE(cfg.learning_rate > 0.0, "learning rate must be positive");
    NPL_REQUIRE(cfg.iterations > 0, "iterations must be positive");
    NPL_REQUIRE(cfg.batch_size >= 0, "batch size must be non-negative (0 = full batch)");
    for (int h : cfg.hidden_sizes) NPL_REQUIRE(h > 0, "hidden layer sizes must be positive");
    NPL_REQUIRE(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0, "adam beta1 must lie in [0, 1)");
    NPL_REQUIRE(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0, "adam beta2 must lie in [0, 1)");
    NPL_REQUIRE(cfg.adam_epsilon > 0.0, "adam epsilon must be positive");
}

std::vector<int> QuantileNetParams::layer_sizes() const {
    std::vector<int> sizes{input_width()};
    for (const auto& layer : layers) sizes.push_back(layer.outputs);
    return sizes;
}

std::size_t QuantileNetParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) n += layer.weights.size() + layer.bias.size();
    return n;
}

void validate(const QuantileNetParams& params) {
    NPL_REQUIRE(!params.layers.empty(), "network has no layers");
    validate_tau_grid(params.tau_grid);
    NPL_REQUIRE(params.clip_lo < params.clip_hi, "clip range must satisfy lo < hi");
    int width = params.layers.front().inputs;
    NPL_REQUIRE(width >= 1, "input width must be positive");
    for (const auto& layer : params.layers) {
        NPL_REQUIRE(layer.inputs == width, "layer widths do not chain");
        NPL_REQUIRE(layer.outputs >= 1, "layer output width must be positive");
        NPL_REQUIRE(layer.weights.size() == static_cast<std::size_t>(layer.inputs) * layer.outputs,
                    "weight matrix size mismatch");
        NPL_REQUIRE(layer.bias.size() == static_cast<std::size_t>(layer.outputs), "bias size mismatch");
        width = layer.outputs;
    }
    NPL_REQUIRE(static_cast<std::size_t>(width) == params.tau_grid.size(), "output width must equal K");
    NPL_REQUIRE(params.feature_mean.size() == static_cast<std::size_t>(params.input_width()) &&
                    params.feature_std.size() == params.feature_mean.size(),
                "standardization constants do not match the input width");
    for (double s : params.feature_std) NPL_REQUIRE(s > 0.0, "feature std must be positive");
}

QuantileNetParams init_params(int input_width, std::span<const int> hidden_sizes, std::span<const double> tau_grid,
                              std::uint64_t seed) {
    NPL_REQUIRE(input_width >= 1, "input width must be positive");
    validate_tau_grid(tau_grid);
    QuantileNetParams params;
    params.tau_grid.assign(tau_grid.begin(), tau_grid.end());
    params.feature_mean.assign(static_cast<std::size_t>(input_width), 0.0);
    params.feature_std.assign(static_cast<std::size_t>(input_width), 1.0);

    std::vector<int> widths{input_width};
    widths.insert(widths.end(), hidden_sizes.begin(), hidden_sizes.end());
    widths.push_back(static_cast<int>(tau_grid.size()));
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        DenseLayer layer;
        layer.inputs = widths[l];
        layer.outputs = widths[l + 1];
        NPL_REQUIRE(layer.outputs >= 1, "hidden layer sizes must be positive");
        const double limit = std::sqrt(6.0 / (layer.inputs + layer.outputs));
        Stream rng(seed, {0x1a7e5ULL, l});
        layer.weights.resize(static_cast<std::size_t>(layer.inputs) * layer.outputs);
        for (double& w : layer.weights) w = limit * (2.0 * rng.uniform() - 1.0);
        layer.bias.assign(static_cast<std::size_t>(layer.outputs), 0.0);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

std::vector<double> flatten(const QuantileNetParams& params) {
    std::vector<double> flat;
    flat.reserve(params.parameter_count());
    for (const auto& layer : params.layers) {
        flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
        flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
    }
    return flat;
}

void assign(QuantileNetParams& params, std::span<const double> flat) {
    NPL_REQUIRE(flat.size() == params.parameter_count(), "flat parameter vector has the wrong size");
    auto it = flat.begin();
    for (auto& layer : params.layers) {
        std::copy(it, it + static_cast<std::ptrdiff_t>(layer.weights.size()), layer.weights.begin());
        it += static_cast<std::ptrdiff_t>(layer.weights.size());
        std::copy(it, it + static_cast<std::ptrdiff_t>(layer.bias.size()), layer.bias.begin());
        it += static_cast<std::ptrdiff_t>(layer.bias.size());
    }
}

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

} // namespace

std::vector<double> forward(std::span<const double> x, const QuantileNetParams& params) {
    NPL_REQUIRE(x.size() == static_cast<std::size_t>(params.input_width()),
                "feature vector has dimension " + std::to_string(x.size()) + ", network expects " +
                    std::to_string(params.input_width()));
    std::vector<double> act(x.size());
    for (std::size_t f = 0; f < x.size(); ++f) act[f] = (x[f] - params.feature_mean[f]) / params.feature_std[f];
    std::vector<double> next;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        const bool hidden = l + 1 < params.layers.size();
        next.assign(static_cast<std::size_t>(layer.outputs), 0.0);
        for (int o = 0; o < layer.outputs; ++o) {
            double z = layer.bias[static_cast<std::size_t>(o)];
            const double* w = layer.weights.data() + static_cast<std::size_t>(o) * layer.inputs;
            for (int i = 0; i < layer.inputs; ++i) z += w[i] * act[static_cast<std::size_t>(i)];
            next[static_cast<std::size_t>(o)] = hidden ? sigmoid(z) : std::clamp(z, params.clip_lo, params.clip_hi);
        }
        act.swap(next);
    }
    return act;
}

double pinball_loss(double y, double q, double tau) {
    NPL_REQUIRE(tau > 0.0 && tau < 1.0, "pinball loss level must lie in (0, 1)");
    return y > q ? tau * (y - q) : (1.0 - tau) * (q - y);
}

void fit_standardization(QuantileNetParams& params, std::span<const LoanRecord> records) {
    NPL_REQUIRE(!records.empty(), "cannot standardize on an empty training set");
    const auto width = static_cast<std::size_t>(params.input_width());
    std::vector<double> mean(width, 0.0), sq(width, 0.0);
    for (const auto& r : records) {
        NPL_REQUIRE(r.features.size() == width, "loan " + r.id + ": feature dimension mismatch");
        for (std::size_t f = 0; f < width; ++f) mean[f] += r.features[f];
    }
    const auto n = static_cast<double>(records.size());
    for (double& m : mean) m /= n;
    for (const auto& r : records)
        for (std::size_t f = 0; f < width; ++f) sq[f] += (r.features[f] - mean[f]) * (r.features[f] - mean[f]);
    params.feature_mean = mean;
    params.feature_std.resize(width);
    for (std::size_t f = 0; f < width; ++f) {
        const double s = std::sqrt(sq[f] / n);
        params.feature_std[f] = s > 0.0 ? s : 1.0;
    }
}

TrainingSet make_training_set(std::span<const LoanRecord> records, const QuantileNetParams& params) {
    TrainingSet set;
    set.width = params.input_width();
    const auto width = static_cast<std::size_t>(set.width);
    set.features.reserve(records.size() * width);
    set.labels.reserve(records.size());
    for (const auto& r : records) {
        NPL_REQUIRE(r.features.size() == width, "loan " + r.id + ": feature dimension mismatch");
        NPL_REQUIRE(r.realized_rate.has_value(), "loan " + r.id + " is unlabeled");
        for (std::size_t f = 0; f < width; ++f)
            set.features.push_back((r.features[f] - params.feature_mean[f]) / params.feature_std[f]);
        set.labels.push_back(*r.realized_rate);
    }
    return set;
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

constexpr std::size_t kBlockRows = 256;
constexpr std::size_t kMaxChunks = 64;

// Offsets of each layer's weights and bias inside the flat vector.
struct Layout {
    std::vector<std::size_t> weight_offset;
    std::vector<std::size_t> bias_offset;
    std::size_t total = 0;

    explicit Layout(const QuantileNetParams& p) {
        for (const auto& layer : p.layers) {
            weight_offset.push_back(total);
            total += layer.weights.size();
            bias_offset.push_back(total);
            total += layer.bias.size();
        }
    }
};

struct Workspace {
    std::vector<RowMat> acts;
    RowMat delta;
    RowMat back;
};

// Accumulates the un-normalized loss and gradient of rows [begin, end) of
// `rows` (or of the data itself when rows is empty) into loss / grad.
void accumulate_block(const QuantileNetParams& p, const Layout& layout, const TrainingSet& data,
                      std::span<const std::size_t> rows, std::size_t begin, std::size_t end, Workspace& ws,
                      double& loss, double* grad) {
    const auto count = static_cast<Eigen::Index>(end - begin);
    const auto width = static_cast<Eigen::Index>(data.width);
    const std::size_t depth = p.layers.size();
    ws.acts.resize(depth + 1);

    auto& input = ws.acts[0];
    input.resize(count, width);
    for (Eigen::Index r = 0; r < count; ++r) {
        const std::size_t row = rows.empty() ? begin + static_cast<std::size_t>(r) : rows[begin + static_cast<std::size_t>(r)];
        input.row(r) = ConstRowMap(data.features.data() + row * static_cast<std::size_t>(width), 1, width);
    }

    for (std::size_t l = 0; l < depth; ++l) {
        const auto& layer = p.layers[l];
        const ConstRowMap w(layer.weights.data(), layer.outputs, layer.inputs);
        const Eigen::Map<const Eigen::RowVectorXd> b(layer.bias.data(), layer.outputs);
        ws.acts[l + 1].noalias() = ws.acts[l] * w.transpose();
        ws.acts[l + 1].rowwise() += b;
        if (l + 1 < depth) ws.acts[l + 1] = ws.acts[l + 1].unaryExpr([](double z) { return sigmoid(z); });
    }

    const RowMat& raw = ws.acts[depth];
    const auto levels = raw.cols();
    ws.delta.resize(count, levels);
    for (Eigen::Index r = 0; r < count; ++r) {
        const std::size_t row = rows.empty() ? begin + static_cast<std::size_t>(r) : rows[begin + static_cast<std::size_t>(r)];
        const double y = data.labels[row];
        for (Eigen::Index k = 0; k < levels; ++k) {
            const double tau = p.tau_grid[static_cast<std::size_t>(k)];
            const double z = raw(r, k);
            const double q = std::clamp(z, p.clip_lo, p.clip_hi);
            const bool above = y > q;
            loss += above ? tau * (y - q) : (1.0 - tau) * (q - y);
            const bool passes = z >= p.clip_lo && z <= p.clip_hi;
            ws.delta(r, k) = passes ? (above ? -tau : 1.0 - tau) : 0.0;
        }
    }

    for (std::size_t l = depth; l-- > 0;) {
        const auto& layer = p.layers[l];
        RowMap gw(grad + layout.weight_offset[l], layer.outputs, layer.inputs);
        Eigen::Map<Eigen::RowVectorXd> gb(grad + layout.bias_offset[l], layer.outputs);
        gw.noalias() += ws.delta.transpose() * ws.acts[l];
        gb += ws.delta.colwise().sum();
        if (l == 0) break;
        const ConstRowMap w(layer.weights.data(), layer.outputs, layer.inputs);
        ws.back.noalias() = ws.delta * w;
        ws.delta = ws.back.cwiseProduct(ws.acts[l].cwiseProduct((1.0 - ws.acts[l].array()).matrix()));
    }
}

LossGradient kernel_parallel(const QuantileNetParams& p, const TrainingSet& data, std::span<const std::size_t> rows) {
    const Layout layout(p);
    const std::size_t n = rows.empty() ? data.rows() : rows.size();
    const std::size_t blocks = (n + kBlockRows - 1) / kBlockRows;
    const std::size_t chunks = std::min(blocks, kMaxChunks);
    std::vector<double> chunk_grad(chunks * layout.total, 0.0);
    std::vector<double> chunk_loss(chunks, 0.0);

#pragma omp parallel
    {
        Workspace ws;
#pragma omp for schedule(static)
        for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
            const auto cu = static_cast<std::size_t>(c);
            const std::size_t first_block = cu * blocks / chunks;
            const std::size_t last_block = (cu + 1) * blocks / chunks;
            for (std::size_t b = first_block; b < last_block; ++b)
                accumulate_block(p, layout, data, rows, b * kBlockRows, std::min(n, (b + 1) * kBlockRows), ws,
                                 chunk_loss[cu], chunk_grad.data() + cu * layout.total);
        }
    }

    LossGradient out;
    out.gradient.assign(layout.total, 0.0);
    for (std::size_t c = 0; c < chunks; ++c) {
        out.loss += chunk_loss[c];
        const double* g = chunk_grad.data() + c * layout.total;
        for (std::size_t i = 0; i < layout.total; ++i) out.gradient[i] += g[i];
    }
    return out;
}

// Reference: one row at a time, plain loops, no blocking.
LossGradient kernel_serial(const QuantileNetParams& p, const TrainingSet& data, std::span<const std::size_t> rows) {
    const Layout layout(p);
    const std::size_t n = rows.empty() ? data.rows() : rows.size();
    const std::size_t depth = p.layers.size();
    LossGradient out;
    out.gradient.assign(layout.total, 0.0);
    std::vector<std::vector<double>> acts(depth + 1);
    std::vector<double> delta, back;

    for (std::size_t idx = 0; idx < n; ++idx) {
        const std::size_t row = rows.empty() ? idx : rows[idx];
        acts[0].assign(data.features.begin() + static_cast<std::ptrdiff_t>(row * data.width),
                       data.features.begin() + static_cast<std::ptrdiff_t>((row + 1) * data.width));
        for (std::size_t l = 0; l < depth; ++l) {
            const auto& layer = p.layers[l];
            acts[l + 1].assign(static_cast<std::size_t>(layer.outputs), 0.0);
            for (int o = 0; o < layer.outputs; ++o) {
                double z = layer.bias[static_cast<std::size_t>(o)];
                for (int i = 0; i < layer.inputs; ++i)
                    z += layer.weights[static_cast<std::size_t>(o * layer.inputs + i)] * acts[l][static_cast<std::size_t>(i)];
                acts[l + 1][static_cast<std::size_t>(o)] = l + 1 < depth ? sigmoid(z) : z;
            }
        }
        const double y = data.labels[row];
        const auto& raw = acts[depth];
        delta.assign(raw.size(), 0.0);
        for (std::size_t k = 0; k < raw.size(); ++k) {
            const double tau = p.tau_grid[k];
            const double q = std::clamp(raw[k], p.clip_lo, p.clip_hi);
            out.loss += pinball_loss(y, q, tau);
            if (raw[k] >= p.clip_lo && raw[k] <= p.clip_hi) delta[k] = y > q ? -tau : 1.0 - tau;
        }
        for (std::size_t l = depth; l-- > 0;) {
            const auto& layer = p.layers[l];
            for (int o = 0; o < layer.outputs; ++o) {
                const double d = delta[static_cast<std::size_t>(o)];
                for (int i = 0; i < layer.inputs; ++i)
                    out.gradient[layout.weight_offset[l] + static_cast<std::size_t>(o * layer.inputs + i)] +=
                        d * acts[l][static_cast<std::size_t>(i)];
                out.gradient[layout.bias_offset[l] + static_cast<std::size_t>(o)] += d;
            }
            if (l == 0) break;
            back.assign(static_cast<std::size_t>(layer.inputs), 0.0);
            for (int o = 0; o < layer.outputs; ++o)
                for (int i = 0; i < layer.inputs; ++i)
                    back[static_cast<std::size_t>(i)] +=
                        delta[static_cast<std::size_t>(o)] * layer.weights[static_cast<std::size_t>(o * layer.inputs + i)];
            for (std::size_t i = 0; i < back.size(); ++i) back[i] *= acts[l][i] * (1.0 - acts[l][i]);
            delta.swap(back);
        }
    }
    return out;
}

} // namespace

LossGradient loss_and_gradient(const QuantileNetParams& params, const TrainingSet& data,
                               std::span<const std::size_t> rows, Execution exec) {
    NPL_REQUIRE(data.width == params.input_width(), "training set width does not match the network");
    const std::size_t n = rows.empty() ? data.rows() : rows.size();
    NPL_REQUIRE(n > 0, "empty training set");
    LossGradient out = exec == Execution::parallel ? kernel_parallel(params, data, rows) : kernel_serial(params, data, rows);
    const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(params.tau_grid.size()));
    out.loss *= scale;
    for (double& g : out.gradient) g *= scale;
    return out;
}

LossGradient loss_and_gradient(const QuantileNetParams& params, const TrainingSet& data, Execution exec) {
    return loss_and_gradient(params, data, std::span<const std::size_t>{}, exec);
}

namespace {

// Linear interpolation between order statistics (type 7).
double empirical_quantile(const std::vector<double>& sorted, double tau) {
    const double h = tau * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Mean input to the output layer over the training rows.
std::vector<double> mean_head_input(const QuantileNetParams& p, const TrainingSet& data) {
    const auto& head = p.layers.back();
    std::vector<double> mean(static_cast<std::size_t>(head.inputs), 0.0), act, next;
    for (std::size_t r = 0; r < data.rows(); ++r) {
        const auto* x = data.features.data() + r * static_cast<std::size_t>(data.width);
        act.assign(x, x + data.width);
        for (std::size_t l = 0; l + 1 < p.layers.size(); ++l) {
            const auto& layer = p.layers[l];
            next.assign(static_cast<std::size_t>(layer.outputs), 0.0);
            for (int o = 0; o < layer.outputs; ++o) {
                double z = layer.bias[static_cast<std::size_t>(o)];
                const double* w = layer.weights.data() + static_cast<std::size_t>(o) * layer.inputs;
                for (int i = 0; i < layer.inputs; ++i) z += w[i] * act[static_cast<std::size_t>(i)];
                next[static_cast<std::size_t>(o)] = sigmoid(z);
            }
            act.swap(next);
        }
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += act[i];
    }
    for (double& m : mean) m /= static_cast<double>(data.rows());
    return mean;
}

} // namespace

QuantileNetParams train_category(std::span<const LoanRecord> records, std::span<const double> tau_grid,
                                 const TrainConfig& cfg, TrainTrace* trace) {
    validate(cfg);
    NPL_REQUIRE(!records.empty(), "cannot train on an empty category");
    const auto width = static_cast<int>(records.front().features.size());
    NPL_REQUIRE(width >= 1, "records have no features");

    QuantileNetParams params = init_params(width, cfg.hidden_sizes, tau_grid, cfg.seed);
    params.train_config = cfg;
    fit_standardization(params, records);
    const TrainingSet data = make_training_set(records, params);
    for (double y : data.labels)
        NPL_REQUIRE(y >= params.clip_lo && y <= params.clip_hi, "training labels must lie in the clip range");

    std::vector<double> sorted = data.labels;
    std::sort(sorted.begin(), sorted.end());
    // Start every output at its empirical label quantile on average over the rows.
    const auto h = mean_head_input(params, data);
    auto& head = params.layers.back();
    for (std::size_t k = 0; k < params.tau_grid.size(); ++k) {
        double offset = 0.0;
        for (int i = 0; i < head.inputs; ++i)
            offset += head.weights[k * static_cast<std::size_t>(head.inputs) + static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i)];
        head.bias[k] = empirical_quantile(sorted, params.tau_grid[k]) - offset;
    }

    std::vector<double> theta = flatten(params);
    std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0);
    const bool full_batch = cfg.batch_size == 0 || static_cast<std::size_t>(cfg.batch_size) >= data.rows();

    std::vector<std::size_t> order(data.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = order.size();
    std::uint64_t epoch = 0;
    std::vector<std::size_t> batch;

    double b1t = 1.0, b2t = 1.0;
    for (int it = 1; it <= cfg.iterations; ++it) {
        LossGradient lg;
        if (full_batch) {
            lg = loss_and_gradient(params, data);
        } else {
            const auto bs = static_cast<std::size_t>(cfg.batch_size);
            if (cursor + bs > order.size()) {
                Stream rng(cfg.seed, {0xba7c4ULL, epoch++});
                for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
                cursor = 0;
            }
            batch.assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                         order.begin() + static_cast<std::ptrdiff_t>(cursor + bs));
            cursor += bs;
            lg = loss_and_gradient(params, data, batch);
        }
        if (it == 1 && trace) trace->initial_loss = full_batch ? lg.loss : loss_and_gradient(params, data).loss;

        b1t *= cfg.adam_beta1;
        b2t *= cfg.adam_beta2;
        const double step = cfg.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
        const double eps_hat = cfg.adam_epsilon * std::sqrt(1.0 - b2t);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double g = lg.gradient[i];
            m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g;
            v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g * g;
            theta[i] -= step * m[i] / (std::sqrt(v[i]) + eps_hat);
        }
        assign(params, theta);
    }
    if (trace) trace->final_loss = loss_and_gradient(params, data).loss;
    return params;
}

MarginalDistribution predict_marginal(const QuantileNetParams& params, std::span<const double> x) {
    const auto raw = forward(x, params);
    return MarginalDistribution::build(rearrange(raw), params.tau_grid, params.clip_hi);
}

void save_model(const QuantileNetParams& params, int category, const std::filesystem::path& path) {
    validate(params);
    nlohmann::ordered_json j;
    j["format"] = kModelFormat;
    j["version"] = kModelFormatVersion;
    j["category"] = category;
    j["layer_sizes"] = params.layer_sizes();
    auto layers = nlohmann::ordered_json::array();
    for (const auto& layer : params.layers)
        layers.push_back({{"inputs", layer.inputs}, {"outputs", layer.outputs}, {"weights", layer.weights}, {"bias", layer.bias}});
    j["layers"] = layers;
    j["tau_grid"] = params.tau_grid;
    j["clip_range"] = {params.clip_lo, params.clip_hi};
    j["feature_mean"] = params.feature_mean;
    j["feature_std"] = params.feature_std;
    const auto& c = params.train_config;
    j["train_config"] = {{"hidden_sizes", c.hidden_sizes}, {"learning_rate", c.learning_rate},
                         {"iterations", c.iterations},     {"batch_size", c.batch_size},
                         {"seed", c.seed},                 {"adam_beta1", c.adam_beta1},
                         {"adam_beta2", c.adam_beta2},     {"adam_epsilon", c.adam_epsilon}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file " + path.string());
    out << j.dump(1) << '\n';
}

QuantileNetParams load_model(const std::filesystem::path& path, int* category) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open model file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    try {
        if (j.value("format", std::string{}) != kModelFormat)
            throw SchemaError(path.string() + ": not a quantile-net model file");
        if (j.at("version").get<int>() != kModelFormatVersion)
            throw SchemaError(path.string() + ": unsupported model version " + j.at("version").dump());
        QuantileNetParams p;
        for (const auto& lj : j.at("layers")) {
            DenseLayer layer;
            layer.inputs = lj.at("inputs").get<int>();
            layer.outputs = lj.at("outputs").get<int>();
            layer.weights = lj.at("weights").get<std::vector<double>>();
            layer.bias = lj.at("bias").get<std::vector<double>>();
            p.layers.push_back(std::move(layer));
        }
        p.tau_grid = j.at("tau_grid").get<std::vector<double>>();
        const auto clip = j.at("clip_range").get<std::vector<double>>();
        if (clip.size() != 2) throw SchemaError(path.string() + ": clip_range must have two entries");
        p.clip_lo = clip[0];
        p.clip_hi = clip[1];
        p.feature_mean = j.at("feature_mean").get<std::vector<double>>();
        p.feature_std = j.at("feature_std").get<std::vector<double>>();
        const auto& c = j.at("train_config");
        p.train_config.hidden_sizes = c.at("hidden_sizes").get<std::vector<int>>();
        p.train_config.learning_rate = c.at("learning_rate").get<double>();
        p.train_config.iterations = c.at("iterations").get<int>();
        p.train_config.batch_size = c.at("batch_size").get<int>();
        p.train_config.seed = c.at("seed").get<std::uint64_t>();
        p.train_config.adam_beta1 = c.at("adam_beta1").get<double>();
        p.train_config.adam_beta2 = c.at("adam_beta2").get<double>();
        p.train_config.adam_epsilon = c.at("adam_epsilon").get<double>();
        if (category) *category = j.at("category").get<int>();
        validate(p);
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    } catch (const InvalidInput& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

} // namespace npl
