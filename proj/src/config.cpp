#include "npl/config.hpp"

#include "npl/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace npl {

std::filesystem::path RunConfig::loans_path() const {
    return paths.loans.empty() ? paths.data_dir / "loans.csv" : paths.loans;
}

namespace {

using nlohmann::json;

const json& section(const json& root, const char* name) {
    static const json empty = json::object();
    if (!root.contains(name)) return empty;
    const json& s = root.at(name);
    if (!s.is_object()) throw SchemaError(std::string("config: '") + name + "' must be an object");
    return s;
}

template <class T>
T get_or(const json& s, const char* section_name, const char* key, T fallback) {
    if (!s.contains(key)) return fallback;
    try {
        return s.at(key).get<T>();
    } catch (const json::exception&) {
        throw SchemaError(std::string("config: ") + section_name + "." + key + " has the wrong type");
    }
}

std::uint64_t required_seed(const json& s, const char* section_name) {
    if (!s.contains("seed")) throw SchemaError(std::string("config: ") + section_name + ".seed is required");
    return get_or<std::uint64_t>(s, section_name, "seed", 0);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

} // namespace

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    if (!root.is_object()) throw SchemaError("config: top level must be an object");

    RunConfig cfg;
    try {
        const auto& paths = section(root, "paths");
        cfg.paths.data_dir = resolve(base_dir, get_or<std::string>(paths, "paths", "data_dir", "data"));
        cfg.paths.models_dir = resolve(base_dir, get_or<std::string>(paths, "paths", "models_dir", "models"));
        cfg.paths.reports_dir = resolve(base_dir, get_or<std::string>(paths, "paths", "reports_dir", "reports"));
        if (paths.contains("loans")) cfg.paths.loans = resolve(base_dir, get_or<std::string>(paths, "paths", "loans", ""));

        if (root.contains("dataset")) {
            const auto& d = section(root, "dataset");
            DatasetConfig ds;
            ds.categories = get_or(d, "dataset", "categories", ds.categories);
            ds.feature_dim = get_or(d, "dataset", "feature_dim", ds.feature_dim);
            ds.loans_per_category = get_or(d, "dataset", "loans_per_category", ds.loans_per_category);
            ds.dates = get_or(d, "dataset", "dates", ds.dates);
            ds.true_betas = get_or(d, "dataset", "true_betas", std::vector<double>{});
            ds.feature_drift = get_or(d, "dataset", "feature_drift", ds.feature_drift);
            ds.amount_median = get_or(d, "dataset", "amount_median", ds.amount_median);
            ds.amount_log_sigma = get_or(d, "dataset", "amount_log_sigma", ds.amount_log_sigma);
            ds.seed = required_seed(d, "dataset");
            try {
                cfg.dataset = complete(ds);
            } catch (const InvalidInput& e) {
                throw SchemaError(std::string("config: dataset: ") + e.what());
            }
        }

        int categories = cfg.dataset ? cfg.dataset->categories : 0;
        if (root.contains("categories")) {
            cfg.categories.labels = get_or<std::vector<std::string>>(root, "root", "categories", {});
        } else {
            if (categories == 0) throw SchemaError("config: 'categories' is required when there is no dataset section");
            cfg.categories = CategoryScheme::overdue_stages(categories);
        }
        validate(cfg.categories);
        if (cfg.dataset && cfg.categories.size() != cfg.dataset->categories)
            throw SchemaError("config: category labels do not match dataset.categories");

        const auto& sp = section(root, "split");
        cfg.split.train_fraction = get_or(sp, "split", "train_fraction", cfg.split.train_fraction);
        cfg.split.holdout_dates = get_or(sp, "split", "holdout_dates", std::vector<int>{});
        cfg.split_seed = required_seed(sp, "split");
        if (!(cfg.split.train_fraction > 0.0 && cfg.split.train_fraction <= 1.0))
            throw SchemaError("config: split.train_fraction must lie in (0, 1]");

        const auto& mo = section(root, "model");
        cfg.variant = parse_variant(get_or<std::string>(mo, "model", "variant", "CLNN2"));
        cfg.tau_levels = get_or(mo, "model", "tau_levels", cfg.tau_levels);
        cfg.train.hidden_sizes = get_or(mo, "model", "hidden_sizes", default_hidden_sizes(cfg.variant));
        if (cfg.train.hidden_sizes.size() != default_hidden_sizes(cfg.variant).size())
            throw SchemaError("config: model.hidden_sizes must have one entry per hidden layer of " + to_string(cfg.variant));
        cfg.train.learning_rate = get_or(mo, "model", "learning_rate", cfg.train.learning_rate);
        cfg.train.iterations = get_or(mo, "model", "iterations", cfg.train.iterations);
        cfg.train.batch_size = get_or(mo, "model", "batch_size", cfg.train.batch_size);
        cfg.train.seed = required_seed(mo, "model");
        validate(cfg.train);
        if (cfg.tau_levels < 1) throw SchemaError("config: model.tau_levels must be positive");

        const auto& es = section(root, "estimation");
        cfg.estimation.repetitions = get_or(es, "estimation", "repetitions", cfg.estimation.repetitions);
        cfg.estimation.fit.count_weighted = get_or(es, "estimation", "count_weighted", false);
        cfg.estimation.seed = required_seed(es, "estimation");
        if (cfg.estimation.repetitions < 1) throw SchemaError("config: estimation.repetitions must be at least 1");

        const auto& si = section(root, "simulation");
        cfg.simulation.n_sim = get_or(si, "simulation", "n_sim", cfg.simulation.n_sim);
        cfg.simulation.seed = required_seed(si, "simulation");
        cfg.histogram_bins = get_or(si, "simulation", "histogram_bins", cfg.histogram_bins);
        if (cfg.simulation.n_sim < 4) throw SchemaError("config: simulation.n_sim must be at least 4");
        if (cfg.histogram_bins < 1) throw SchemaError("config: simulation.histogram_bins must be positive");

        const auto& ev = section(root, "evaluation");
        cfg.evaluation.seed = required_seed(ev, "evaluation");
        cfg.evaluation.significance = get_or(ev, "evaluation", "significance", cfg.evaluation.significance);
        cfg.evaluation.min_wtest_dates = get_or(ev, "evaluation", "min_wtest_dates", cfg.evaluation.min_wtest_dates);
        cfg.baseline_window = get_or(ev, "evaluation", "baseline_window", cfg.baseline_window);
        if (cfg.baseline_window < 1) throw SchemaError("config: evaluation.baseline_window must be positive");
    } catch (const InvalidInput& e) {
        throw SchemaError(std::string("config: ") + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.parent_path());
}

} // namespace npl
