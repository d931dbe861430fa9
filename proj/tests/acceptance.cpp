// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include "npl/config.hpp"
#include "npl/copula.hpp"
#include "npl/data.hpp"
#include "npl/error.hpp"
#include "npl/estimation.hpp"
#include "npl/evaluation.hpp"
#include "npl/normal.hpp"
#include "npl/pipeline.hpp"
#include "npl/quantile_net.hpp"
#include "npl/random.hpp"
#include "npl/simulation.hpp"

#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace npl;
using namespace npl::testing;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double correlation(std::span<const double> a, std::span<const double> b) {
    const auto n = static_cast<double>(a.size());
    double sa = 0, sb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
    }
    sa /= n;
    sb /= n;
    double saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        saa += (a[i] - sa) * (a[i] - sa);
        sbb += (b[i] - sb) * (b[i] - sb);
        sab += (a[i] - sa) * (b[i] - sb);
    }
    return sab / std::sqrt(saa * sbb);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Analytic gradient against central differences for every architecture at
// reduced widths, 10 random parameter points each.
Outcome gradient_check() {
    const auto tau = regular_tau_grid(9);
    const int width = 4;
    Stream data_rng(101, {});
    TrainingSet data;
    data.width = width;
    for (int i = 0; i < 60 * width; ++i) data.features.push_back(data_rng.normal());
    for (int i = 0; i < 60; ++i) data.labels.push_back(0.05 + 1.2 * data_rng.uniform());

    double worst = 0.0;
    std::string where;
    for (auto v : {Variant::CL, Variant::CLNN2, Variant::CLNN4, Variant::CLNN6}) {
        auto hidden = default_hidden_sizes(v);
        for (int& h : hidden) h = std::max(3, h / 16);
        for (int point = 0; point < 10; ++point) {
            auto p = init_params(width, hidden, tau, derive_key(102, {static_cast<std::uint64_t>(v), static_cast<std::uint64_t>(point)}));
            Stream rng(103, {static_cast<std::uint64_t>(v), static_cast<std::uint64_t>(point)});
            // Keep the outputs inside the clip range so the loss is differentiable.
            for (double& b : p.layers.back().bias) b = 0.3 + 0.9 * rng.uniform();
            const auto g = loss_and_gradient(p, data, Execution::serial).gradient;
            const auto flat = flatten(p);
            std::vector<double> fd(flat.size());
            const double h = 1e-6;
            for (std::size_t i = 0; i < flat.size(); ++i) {
                auto plus = flat, minus = flat;
                plus[i] += h;
                minus[i] -= h;
                auto pp = p, pm = p;
                assign(pp, plus);
                assign(pm, minus);
                fd[i] = (loss_and_gradient(pp, data, Execution::serial).loss -
                         loss_and_gradient(pm, data, Execution::serial).loss) / (2 * h);
            }
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                num += (g[i] - fd[i]) * (g[i] - fd[i]);
                den += g[i] * g[i];
            }
            const double rel = std::sqrt(num / den);
            if (rel > worst) {
                worst = rel;
                where = to_string(v) + " point " + std::to_string(point);
            }
        }
    }
    return {worst <= 1e-4, fmt("worst relative error %.2e (%s), limit 1e-4", worst, where.c_str())};
}

// 40% atom at zero, log-normal body, labels independent of the features.
Outcome quantile_recovery() {
    const double mu = std::log(0.3), sigma = 0.5, atom = 0.4;
    const auto truth = [&](double t) { return t <= atom ? 0.0 : std::exp(mu + sigma * gaussian_score((t - atom) / (1 - atom))); };
    Stream rng(201, {});
    std::vector<LoanRecord> records(10000);
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& r = records[i];
        r.id = "r" + std::to_string(i);
        r.features = {rng.normal(), rng.normal(), rng.normal()};
        r.realized_rate = rng.uniform() < atom ? 0.0 : std::min(kMaxRate, std::exp(mu + sigma * rng.normal()));
    }
    TrainConfig cfg;
    cfg.hidden_sizes = default_hidden_sizes(Variant::CLNN2);
    cfg.seed = 202;
    const auto p = train_category(records, regular_tau_grid(99), cfg);
    double worst = 0.0;
    std::string detail;
    for (double t : {0.5, 0.7, 0.9}) {
        // Averaged over a handful of feature vectors; each one must pass.
        Stream xs(203, {});
        for (int k = 0; k < 5; ++k) {
            const std::vector<double> x{xs.normal(), xs.normal(), xs.normal()};
            const double q = predict_marginal(p, x).quantile(t);
            worst = std::max(worst, std::fabs(q - truth(t)));
        }
        detail += fmt("tau %.1f true %.4f; ", t, truth(t));
    }
    return {worst <= 0.03, detail + fmt("worst error %.4f, limit 0.03", worst)};
}

Outcome round_trip() {
    const auto g99 = regular_tau_grid(99);
    const auto g199 = regular_tau_grid(199);
    std::vector<MarginalDistribution> laws;
    std::vector<double> q(99);
    for (int k = 0; k < 99; ++k) q[static_cast<std::size_t>(k)] = 0.02 + 1.2 * std::pow((k + 1) / 100.0, 1.5);
    laws.push_back(MarginalDistribution::build(q, g99));
    for (int k = 0; k < 99; ++k) q[static_cast<std::size_t>(k)] = k < 40 ? 0.0 : 0.01 * (k - 39);
    laws.push_back(MarginalDistribution::build(q, g99));
    std::vector<double> q199(199, 0.0);
    q199.back() = 0.7;
    laws.push_back(MarginalDistribution::build(q199, g199));
    laws.push_back(MarginalDistribution::build(std::vector<double>(99, 0.0), g99));
    std::string atoms;
    for (const auto& d : laws) atoms += fmt("%.2f ", d.atom_at_zero());

    Stream rng(301, {});
    double worst = 0.0;
    int fixtures = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto& d = laws[static_cast<std::size_t>(i) % laws.size()];
        const double y = inverse_pit(rng.uniform(), d);
        const double back = inverse_pit(rand_pit(y, d, rng.uniform()), d);
        worst = std::max(worst, std::fabs(back - y));
        ++fixtures;
    }
    return {worst <= 1e-9 && fixtures == 1000, fmt("%d fixtures, atoms %sworst |error| %.2e, limit 1e-9", fixtures, atoms.c_str(), worst)};
}

Outcome copula_correlation() {
    Stream rng(401, {});
    const int n = 100000;
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
        const double m = rng.normal();
        a[static_cast<std::size_t>(i)] = factor_combine(m, rng.normal(), 0.3);
        b[static_cast<std::size_t>(i)] = factor_combine(m, rng.normal(), 0.7);
    }
    const double c = correlation(a, b);
    return {std::fabs(c - 0.21) <= 0.02, fmt("sample correlation %.4f, target 0.21 +- 0.02", c)};
}

std::vector<MarginalDistribution> true_marginals(const GroundTruth& truth, const Portfolio& p, std::span<const double> grid,
                                                 double scale = 1.0) {
    std::vector<MarginalDistribution> out;
    out.reserve(p.loans.size());
    for (const auto& loan : p.loans) {
        auto d = truth.true_marginal(loan, grid);
        out.push_back(scale == 1.0 ? d : d.scaled(scale));
    }
    return out;
}

// Moment estimator fed with the true marginals of the generated loans.
Outcome gmm_recovery() {
    DatasetConfig cfg;
    cfg.categories = 3;
    cfg.feature_dim = 8;
    cfg.loans_per_category = 2000;
    cfg.dates = 12;
    cfg.true_betas = {0.3, 0.5, 0.7};
    cfg.seed = 501;
    const auto ds = generate_synthetic(cfg);
    const auto grid = regular_tau_grid(99);
    const MarginalProvider provider = [&](const Portfolio& p) { return true_marginals(ds.truth, p, grid); };
    EstimationOptions opts;
    opts.repetitions = 10;
    opts.seed = 502;
    const auto est = estimate_with_averaging(ds.portfolios, provider, 3, opts);
    std::vector<FactorParams> history;
    std::vector<double> m_hat, m_true;
    for (const auto& e : est) {
        history.push_back(e.averaged);
        m_hat.push_back(e.averaged.m);
        m_true.push_back(ds.truth.factor(e.averaged.date));
    }
    const auto betas = predict_beta_for_new_date(history);
    bool ok = est.size() == 12;
    std::string detail = "beta";
    for (std::size_t j = 0; j < 3; ++j) {
        ok = ok && std::fabs(betas[j] - cfg.true_betas[j]) <= 0.1;
        detail += fmt(" %.3f", betas[j]);
    }
    const double c = correlation(m_hat, m_true);
    ok = ok && c >= 0.9;
    return {ok, detail + fmt(" vs 0.3 0.5 0.7 (+-0.1); corr(m_hat, m) %.3f, need >= 0.9; %zu dates", c, est.size())};
}

Outcome exact_gmm() {
    MomentSummary s;
    s.categories.push_back({1000, 0.2, 0.96});
    s.categories.push_back({1000, 0.4, 0.84});
    const auto fit = fit_factor_params(s);
    const bool ok = std::fabs(fit.params.betas[0] - 0.2) <= 1e-6 && std::fabs(fit.params.betas[1] - 0.4) <= 1e-6 &&
                    std::fabs(fit.params.m - 1.0) <= 1e-6 && fit.objective < 1e-10;
    return {ok, fmt("beta %.9f %.9f, m %.9f, objective %.2e", fit.params.betas[0], fit.params.betas[1], fit.params.m, fit.objective)};
}

// Train/test split of 10 dates; the test portfolios are simulated and scored
// with the generator's marginals (times `scale`) and either the generator's
// loadings or loadings estimated on the training loans.
EvaluationReport calibration_run(const SyntheticDataset& ds, double scale, bool estimated_loadings) {
    const auto grid = regular_tau_grid(99);
    const auto parts = split(ds.portfolios, SplitSpec{0.8, {}}, 702);
    const MarginalProvider provider = [&](const Portfolio& p) { return true_marginals(ds.truth, p, grid, scale); };
    std::vector<FactorParams> history;
    if (estimated_loadings) {
        EstimationOptions eopts;
        eopts.seed = 703;
        for (const auto& e : estimate_with_averaging(parts.train, provider, 3, eopts)) history.push_back(e.averaged);
    }
    std::vector<DateOutcome> outcomes;
    for (const auto& p : parts.test_overlap) {
        std::vector<CategoryId> cats;
        for (const auto& loan : p.loans) cats.push_back(loan.category);
        const FactorParams params = estimated_loadings ? params_for_date(history, p.date) : FactorParams{p.date, 0.0, ds.truth.betas};
        DateOutcome o;
        o.date = p.date;
        o.prediction = simulate_portfolio(provider(p), cats, params, p.amounts(), SimulationOptions{1000, 704});
        o.realized = p.realized_rate();
        outcomes.push_back(std::move(o));
    }
    return evaluate_run(outcomes, EvaluationOptions{705});
}

Outcome calibration() {
    DatasetConfig cfg;
    cfg.categories = 3;
    cfg.feature_dim = 8;
    cfg.loans_per_category = 300;
    cfg.dates = 10;
    cfg.true_betas = {0.3, 0.5, 0.7};
    cfg.seed = 701;
    const auto ds = generate_synthetic(cfg);
    // The pipeline as shipped: loadings come from the moment estimator.
    const auto good = calibration_run(ds, 1.0, true);
    const auto bad = calibration_run(ds, 0.5, true);
    // Reported only: the same runs with the generator's own loadings.
    const auto good_true = calibration_run(ds, 1.0, false);
    const auto bad_true = calibration_run(ds, 0.5, false);
    const bool ok = good.rows.size() == 10 && good.wtest && bad.wtest && good.wtest->p > 0.05 && bad.wtest->p < 0.05;
    return {ok, fmt("%zu dates; correct marginals W %.4f p %.4f (need > 0.05); quantiles x0.5 W %.4f p %.4g (need < 0.05, %s); "
                    "not gated, generator loadings: p %.4f and %.4f",
                    good.rows.size(), good.wtest ? good.wtest->w : -1.0, good.wtest ? good.wtest->p : -1.0,
                    bad.wtest ? bad.wtest->w : -1.0, bad.wtest ? bad.wtest->p : -1.0, bad.wtest_status.c_str(),
                    good_true.wtest ? good_true.wtest->p : -1.0, bad_true.wtest ? bad_true.wtest->p : -1.0)};
}

RunConfig scratch_config(const std::string& name, const fs::path& source, fs::path* dir_out = nullptr) {
    auto j = json::parse(read_file(source));
    const auto dir = scratch_dir(name);
    j["paths"] = {{"data_dir", "data"}, {"models_dir", "models"}, {"reports_dir", "reports"}};
    write_file(dir / "config.json", j.dump(1));
    if (dir_out) *dir_out = dir;
    return load_run_config(dir / "config.json");
}

// Full pipeline with trained networks on drifting features.
Outcome bottom_up_vs_top_down() {
    const auto cfg = scratch_config("drift", fs::path(NPL_CONFIG_DIR) / "drift.json");
    PipelineOptions opts;
    opts.timestamp = false;
    run_all(cfg, opts);
    const auto eval = json::parse(read_file(cfg.paths.reports_dir / "evaluation_overlap.json"));
    if (!eval.contains("baseline_mape")) return {false, "no date carries a baseline"};
    const double bu = eval.at("mape_on_baseline_dates").get<double>();
    const double td = eval.at("baseline_mape").get<double>();
    return {bu < td, fmt("on %d dates: bottom-up MAPE %.4f, top-down MAPE %.4f (all %zu dates bottom-up %.4f)",
                         eval.at("baseline_dates").get<int>(), bu, td, eval.at("rows").size(), eval.at("mape").get<double>())};
}

Outcome shapiro_oracle() {
    const auto ref = json::parse(read_file(fs::path(NPL_TEST_DATA_DIR) / "shapiro_reference.json"));
    double worst = 0.0;
    std::string sizes;
    int cases = 0;
    for (const auto& c : ref.at("cases")) {
        const auto x = c.at("samples").get<std::vector<double>>();
        const auto r = shapiro_wilk(x);
        worst = std::max({worst, std::fabs(r.w - c.at("w").get<double>()), std::fabs(r.p - c.at("p").get<double>())});
        ++cases;
    }
    return {cases == 20 && worst <= 1e-3, fmt("%d samples, n in {8, 10, 20, 50}; worst |difference| %.2e, limit 1e-3", cases, worst)};
}

// Every command twice under one thread, then the whole sequence under four.
Outcome cli_determinism() {
    auto j = tiny_config();
    j["model"]["variant"] = "CLNN2";
    j["model"]["hidden_sizes"] = {12, 6};
    const std::vector<std::string> commands{"generate", "train", "fit-copula", "simulate", "evaluate"};
    std::map<std::string, std::string> final_snapshot[2];
    std::string failure;
    for (int run = 0; run < 2; ++run) {
        const auto dir = scratch_dir(run == 0 ? "determinism_1" : "determinism_4");
        write_file(dir / "config.json", j.dump(1));
        const std::string env = run == 0 ? "OMP_NUM_THREADS=1" : "OMP_NUM_THREADS=4";
        const auto log = fs::temp_directory_path() / "npl_test_determinism.log";
        for (const auto& cmd : commands) {
            const std::string args = cmd + " --no-timestamp --allow-degenerate -c \"" + (dir / "config.json").string() + "\"";
            if (run_cli(args, log, env) != 0) return {false, cmd + " failed: " + read_file(log)};
            const auto first = snapshot(dir);
            if (run_cli(args, log, env) != 0) return {false, cmd + " failed on rerun: " + read_file(log)};
            if (snapshot(dir) != first && failure.empty()) failure = cmd + " rerun differs under " + env;
        }
        final_snapshot[run] = snapshot(dir);
    }
    if (!failure.empty()) return {false, failure};
    const bool same = final_snapshot[0] == final_snapshot[1];
    return {same, fmt("5 commands rerun byte-identical; %zu files %s between 1 and 4 threads", final_snapshot[0].size(),
                      same ? "identical" : "differ")};
}

} // namespace

// Criterion ids on the command line restrict the run to those criteria.
int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    struct Criterion {
        int id;
        const char* name;
        double time_limit; // seconds, 0 when unbounded
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "gradient matches central differences", 30, gradient_check},
        {2, "quantile recovery on a mixed law", 120, quantile_recovery},
        {3, "randomized PIT round trip", 0, round_trip},
        {4, "one-factor score correlation", 10, copula_correlation},
        {5, "moment estimator recovery", 300, gmm_recovery},
        {6, "exactly solvable moment system", 0, exact_gmm},
        {7, "end-to-end calibration", 600, calibration},
        {8, "bottom-up beats top-down under drift", 0, bottom_up_vs_top_down},
        {9, "Shapiro-Wilk oracle agreement", 0, shapiro_oracle},
        {10, "CLI determinism", 0, cli_determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string timing = fmt("%.1f s", secs);
        if (c.time_limit > 0) {
            timing += fmt(", limit %.0f s", c.time_limit);
            if (secs > c.time_limit) out.pass = false;
        }
        std::cout << (out.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name << " (" << out.detail << "; "
                  << timing << ")" << std::endl;
        failed += !out.pass;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
