#include "npl/pipeline.hpp"

#include "npl/error.hpp"
#include "npl/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>

namespace npl {

namespace {

using nlohmann::json;

const std::vector<std::string> kTestSets = {"overlap", "holdout"};
constexpr double kReportLevels[] = {0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99};

struct Logger {
    std::ostream* out;
    template <class... Args>
    void operator()(const Args&... args) const {
        if (!out) return;
        (*out << ... << args) << '\n';
    }
};

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json report_header(const char* format, const PipelineOptions& opts) {
    json j;
    j["format"] = format;
    j["version"] = 1;
    if (opts.timestamp) j["generated_at"] = utc_now();
    return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("missing file " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::filesystem::path split_path(const RunConfig& cfg, const std::string& name) { return cfg.paths.data_dir / (name + ".csv"); }

std::size_t feature_dim(std::span<const Portfolio> data) {
    for (const auto& p : data)
        if (!p.loans.empty()) return p.loans.front().features.size();
    return 0;
}

json stats_json(const SummaryStats& s) {
    return {{"mean", s.mean}, {"std", s.std}, {"skewness", s.skewness}, {"kurtosis", s.kurtosis}, {"degenerate", s.degenerate}};
}

} // namespace

std::filesystem::path model_path(const RunConfig& cfg, CategoryId category) {
    return cfg.paths.models_dir / ("category_" + std::to_string(category) + ".json");
}

std::filesystem::path factor_params_path(const RunConfig& cfg) { return cfg.paths.models_dir / "factor_params.json"; }

std::filesystem::path simulation_report_path(const RunConfig& cfg, const std::string& set, DateIndex date) {
    return cfg.paths.reports_dir / ("simulation_" + set + "_t" + std::to_string(date) + ".json");
}

void cmd_generate(const RunConfig& cfg, const PipelineOptions& opts) {
    NPL_REQUIRE(cfg.dataset.has_value(), "generate needs a 'dataset' section in the config");
    const Logger log{opts.log};
    auto ds = generate_synthetic(*cfg.dataset);
    std::filesystem::create_directories(cfg.paths.data_dir);
    write_loans(cfg.loans_path(), ds.portfolios);
    write_ground_truth(cfg.paths.data_dir / "ground_truth.json", ds.truth);
    std::size_t n = 0;
    for (const auto& p : ds.portfolios) n += p.loans.size();
    log("generate: ", n, " loans over ", ds.portfolios.size(), " dates -> ", cfg.loans_path().string());
}

void cmd_train(const RunConfig& cfg, const PipelineOptions& opts) {
    const Logger log{opts.log};
    const auto data = load_loans(cfg.loans_path());
    NPL_REQUIRE(!data.empty(), "no loans in " + cfg.loans_path().string());
    const int J = cfg.categories.size();
    for (const auto& p : data)
        for (const auto& loan : p.loans) validate(loan, J);

    const auto parts = split(data, cfg.split, cfg.split_seed);
    const std::size_t dim = feature_dim(data);
    std::filesystem::create_directories(cfg.paths.data_dir);
    write_loans(split_path(cfg, "train"), parts.train, dim);
    write_loans(split_path(cfg, "test_overlap"), parts.test_overlap, dim);
    write_loans(split_path(cfg, "test_holdout"), parts.test_holdout, dim);
    log("train: split into ", parts.train.size(), " training, ", parts.test_overlap.size(), " overlapping and ",
        parts.test_holdout.size(), " holdout portfolios");

    std::filesystem::create_directories(cfg.paths.models_dir);
    const auto tau = cfg.tau_grid();
    for (CategoryId j = 1; j <= J; ++j) {
        std::vector<LoanRecord> records;
        for (auto& loan : loans_of_category(parts.train, j))
            if (loan.labeled()) records.push_back(std::move(loan));
        if (records.empty()) throw InvalidInput("category " + cfg.categories.labels[static_cast<std::size_t>(j - 1)] +
                                                " has no labeled training loans");
        TrainConfig tc = cfg.train;
        tc.seed = derive_key(cfg.train.seed, {static_cast<std::uint64_t>(j)});
        TrainTrace trace;
        const auto params = train_category(records, tau, tc, &trace);
        save_model(params, j, model_path(cfg, j));
        log("train: ", cfg.categories.labels[static_cast<std::size_t>(j - 1)], " (", records.size(), " loans) ",
            to_string(cfg.variant), " loss ", trace.initial_loss, " -> ", trace.final_loss);
    }
}

std::vector<QuantileNetParams> load_models(const RunConfig& cfg) {
    std::vector<QuantileNetParams> models;
    for (CategoryId j = 1; j <= cfg.categories.size(); ++j) {
        const auto path = model_path(cfg, j);
        if (!std::filesystem::exists(path)) throw InvalidInput("missing model for category " + std::to_string(j) + ": " + path.string());
        int stored = 0;
        models.push_back(load_model(path, &stored));
        if (stored != j) throw SchemaError(path.string() + " holds category " + std::to_string(stored));
    }
    return models;
}

MarginalProvider model_marginals(const std::vector<QuantileNetParams>& models) {
    return [&models](const Portfolio& p) {
        std::vector<MarginalDistribution> out;
        out.reserve(p.loans.size());
        for (const auto& loan : p.loans) {
            NPL_REQUIRE(loan.category >= 1 && static_cast<std::size_t>(loan.category) <= models.size(),
                        "loan " + loan.id + " has a category without a model");
            out.push_back(predict_marginal(models[static_cast<std::size_t>(loan.category - 1)], loan.features));
        }
        return out;
    };
}

void cmd_fit_copula(const RunConfig& cfg, const PipelineOptions& opts) {
    const Logger log{opts.log};
    const auto models = load_models(cfg);
    const auto train = load_loans(split_path(cfg, "train"));
    NPL_REQUIRE(!train.empty(), "no training portfolios; run train first");
    const auto estimates = estimate_with_averaging(train, model_marginals(models), cfg.categories.size(), cfg.estimation, opts.exec);

    std::string degenerate_dates;
    for (const auto& e : estimates) {
        if (!e.small_categories.empty()) {
            std::string list;
            for (auto j : e.small_categories) list += " " + cfg.categories.labels[static_cast<std::size_t>(j - 1)];
            log("fit-copula: warning: date ", e.averaged.date, " has fewer than ", kSmallCategoryCount,
                " loans in:", list);
        }
        if (e.degenerate_repetitions > 0 && !e.degenerate)
            log("fit-copula: warning: date ", e.averaged.date, ": ", e.degenerate_repetitions, " of ",
                cfg.estimation.repetitions, " repetitions degenerate");
        if (e.degenerate) degenerate_dates += " " + std::to_string(e.averaged.date);
    }
    if (!degenerate_dates.empty()) {
        if (!opts.allow_degenerate)
            throw NumericalFailure("degenerate factor fit (all loadings zero) at dates:" + degenerate_dates);
        log("fit-copula: warning: degenerate factor fit at dates:", degenerate_dates);
    }
    std::filesystem::create_directories(cfg.paths.models_dir);
    write_factor_params(factor_params_path(cfg), estimates, cfg.estimation);
    log("fit-copula: ", estimates.size(), " dates -> ", factor_params_path(cfg).string());
}

FactorParams params_for_date(std::span<const FactorParams> history, DateIndex date, bool* predicted) {
    NPL_REQUIRE(!history.empty(), "no estimated factor parameters");
    for (const auto& h : history)
        if (h.date == date) {
            if (predicted) *predicted = false;
            return h;
        }
    std::vector<FactorParams> before;
    for (const auto& h : history)
        if (h.date < date) before.push_back(h);
    FactorParams out;
    out.date = date;
    out.betas = predict_beta_for_new_date(before.empty() ? history : std::span<const FactorParams>(before));
    if (predicted) *predicted = true;
    return out;
}

PortfolioDistribution simulate_test_portfolio(const Portfolio& portfolio, const std::vector<QuantileNetParams>& models,
                                              const FactorParams& params, const SimulationOptions& options,
                                              Execution exec) {
    const auto marginals = model_marginals(models)(portfolio);
    std::vector<CategoryId> categories;
    categories.reserve(portfolio.loans.size());
    for (const auto& loan : portfolio.loans) categories.push_back(loan.category);
    auto out = simulate_portfolio(marginals, categories, params, portfolio.amounts(), options, exec);
    out.date = portfolio.date;
    return out;
}

void cmd_simulate(const RunConfig& cfg, const PipelineOptions& opts) {
    const Logger log{opts.log};
    const auto models = load_models(cfg);
    const auto history = read_factor_params(factor_params_path(cfg));
    std::filesystem::create_directories(cfg.paths.reports_dir);
    for (const auto& set : kTestSets) {
        const auto test = load_loans(split_path(cfg, "test_" + set));
        for (const auto& portfolio : test) {
            bool predicted = false;
            const auto params = params_for_date(history, portfolio.date, &predicted);
            const auto dist = simulate_test_portfolio(portfolio, models, params, cfg.simulation, opts.exec);

            json j = report_header(kSimulationFormat, opts);
            j["set"] = set;
            j["date"] = portfolio.date;
            j["loans"] = portfolio.loans.size();
            double total = 0.0;
            for (double a : portfolio.amounts()) total += a;
            j["total_amount"] = total;
            j["n_sim"] = dist.n_sim;
            j["seed"] = dist.seed;
            j["betas_source"] = predicted ? "predicted" : "estimated";
            j["betas"] = params.betas;
            j["stats"] = stats_json(dist.stats);
            auto sorted = dist.draws;
            std::sort(sorted.begin(), sorted.end());
            json q = json::array();
            for (double level : kReportLevels) q.push_back({{"level", level}, {"value", empirical_quantile(sorted, level)}});
            j["quantiles"] = q;
            const auto h = histogram(dist.draws, cfg.histogram_bins);
            j["histogram"] = {{"edges", h.edges}, {"counts", h.counts}};
            j["draws"] = dist.draws;
            write_text(simulation_report_path(cfg, set, portfolio.date), j.dump(1) + "\n");
            log("simulate: ", set, " date ", portfolio.date, " (", predicted ? "predicted" : "estimated",
                " loadings) mean ", dist.stats.mean, " std ", dist.stats.std);
        }
    }
}

std::vector<std::vector<std::pair<DateIndex, double>>> category_rate_history(std::span<const Portfolio> data,
                                                                             int categories) {
    std::vector<std::vector<std::pair<DateIndex, double>>> out(static_cast<std::size_t>(categories));
    for (const auto& p : data) {
        std::vector<double> num(static_cast<std::size_t>(categories), 0.0), den(static_cast<std::size_t>(categories), 0.0);
        for (const auto& loan : p.loans) {
            if (!loan.labeled()) continue;
            NPL_REQUIRE(loan.category >= 1 && loan.category <= categories, "loan " + loan.id + " has an unknown category");
            const auto j = static_cast<std::size_t>(loan.category - 1);
            num[j] += *loan.realized_rate * loan.expected_amount;
            den[j] += loan.expected_amount;
        }
        for (std::size_t j = 0; j < out.size(); ++j)
            if (den[j] > 0.0) out[j].emplace_back(p.date, num[j] / den[j]);
    }
    for (auto& h : out) std::sort(h.begin(), h.end());
    return out;
}

std::optional<double> baseline_for(const Portfolio& target,
                                   const std::vector<std::vector<std::pair<DateIndex, double>>>& history, int window) {
    std::vector<std::vector<double>> past(history.size());
    std::vector<double> amounts(history.size(), 0.0);
    for (const auto& loan : target.loans) {
        NPL_REQUIRE(loan.category >= 1 && static_cast<std::size_t>(loan.category) <= history.size(),
                    "loan " + loan.id + " has an unknown category");
        amounts[static_cast<std::size_t>(loan.category - 1)] += loan.expected_amount;
    }
    for (std::size_t j = 0; j < history.size(); ++j) {
        if (amounts[j] == 0.0) continue;
        for (const auto& [t, r] : history[j])
            if (t < target.date) past[j].push_back(r);
        if (past[j].size() < static_cast<std::size_t>(window)) return std::nullopt;
    }
    return top_down_baseline(past, amounts, window);
}

namespace {

json evaluation_json(const EvaluationReport& report, const std::string& set, const PipelineOptions& opts) {
    json j = report_header(kEvaluationFormat, opts);
    j["set"] = set;
    json rows = json::array();
    for (const auto& r : report.rows) {
        json row = {{"date", r.date}, {"truth", r.truth}, {"stats", stats_json(r.stats)}, {"pit_u", r.pit.u}, {"pit_y", r.pit.y}};
        row["baseline"] = r.baseline ? json(*r.baseline) : json(nullptr);
        rows.push_back(row);
    }
    j["rows"] = rows;
    j["wtest"] = {{"status", report.wtest_status}, {"rejected", report.rejected}};
    if (report.wtest) {
        j["wtest"]["w"] = report.wtest->w;
        j["wtest"]["p"] = report.wtest->p;
    }
    j["mape"] = report.mape;
    if (report.baseline_mape) {
        j["baseline_dates"] = report.baseline_dates();
        j["mape_on_baseline_dates"] = *report.mape_on_baseline_dates;
        j["baseline_mape"] = *report.baseline_mape;
    }
    return j;
}

} // namespace

void cmd_evaluate(const RunConfig& cfg, const PipelineOptions& opts) {
    const Logger log{opts.log};
    const auto all = load_loans(cfg.loans_path());
    const auto history = category_rate_history(all, cfg.categories.size());
    std::filesystem::create_directories(cfg.paths.reports_dir);
    for (const auto& set : kTestSets) {
        const auto test = load_loans(split_path(cfg, "test_" + set));
        std::vector<DateOutcome> outcomes;
        for (const auto& portfolio : test) {
            if (!std::all_of(portfolio.loans.begin(), portfolio.loans.end(), [](const LoanRecord& l) { return l.labeled(); })) {
                log("evaluate: ", set, " date ", portfolio.date, " has unlabeled loans; skipped");
                continue;
            }
            const auto path = simulation_report_path(cfg, set, portfolio.date);
            const json sim = read_json(path);
            if (sim.value("format", "") != kSimulationFormat) throw SchemaError(path.string() + " is not a simulation report");
            DateOutcome o;
            o.date = portfolio.date;
            o.prediction.date = portfolio.date;
            o.prediction.draws = sim.at("draws").get<std::vector<double>>();
            o.prediction.n_sim = static_cast<int>(o.prediction.draws.size());
            o.realized = portfolio.realized_rate();
            o.baseline = baseline_for(portfolio, history, cfg.baseline_window);
            outcomes.push_back(std::move(o));
        }
        if (outcomes.empty()) {
            log("evaluate: ", set, ": no labeled test portfolios");
            continue;
        }
        const auto report = evaluate_run(outcomes, cfg.evaluation);
        write_text(cfg.paths.reports_dir / ("evaluation_" + set + ".json"), evaluation_json(report, set, opts).dump(1) + "\n");
        const auto table = format_report(report, "Test set: " + set);
        write_text(cfg.paths.reports_dir / ("evaluation_" + set + ".txt"), table);
        if (opts.log) *opts.log << table;
    }
}

void run_all(const RunConfig& cfg, const PipelineOptions& opts) {
    if (cfg.dataset) cmd_generate(cfg, opts);
    cmd_train(cfg, opts);
    cmd_fit_copula(cfg, opts);
    cmd_simulate(cfg, opts);
    cmd_evaluate(cfg, opts);
}

} // namespace npl
