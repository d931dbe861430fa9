#include "npl/config.hpp"
#include "npl/error.hpp"
#include "npl/pipeline.hpp"
#include "npl/random.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace npl;
using namespace npl::testing;
using nlohmann::json;

namespace {

RunConfig config_in(const fs::path& dir, const json& j) {
    write_file(dir / "config.json", j.dump(1));
    return load_run_config(dir / "config.json");
}

} // namespace

TEST_CASE("config: defaults and path resolution") {
    const auto cfg = parse_run_config(tiny_config().dump(), "/base");
    CHECK(cfg.paths.data_dir == fs::path("/base/data"));
    CHECK(cfg.loans_path() == fs::path("/base/data/loans.csv"));
    CHECK(cfg.categories.size() == 2);
    CHECK(cfg.variant == Variant::CL);
    CHECK(cfg.tau_grid().size() == 19);
    CHECK(cfg.simulation.n_sim == 200);
    CHECK(cfg.histogram_bins == 10);
    CHECK(cfg.baseline_window == 4);
    CHECK(cfg.split.holdout_dates == std::vector<DateIndex>{10});

    auto j = tiny_config();
    j["paths"]["data_dir"] = "/abs/data";
    CHECK(parse_run_config(j.dump(), "/base").paths.data_dir == fs::path("/abs/data"));
}

TEST_CASE("config: schema errors") {
    for (const char* sec : {"dataset", "split", "model", "estimation", "simulation", "evaluation"}) {
        auto j = tiny_config();
        j[sec].erase("seed");
        CAPTURE(sec);
        CHECK_THROWS_AS(parse_run_config(j.dump()), SchemaError);
    }
    auto j = tiny_config();
    j["dataset"]["true_betas"] = {0.4, 1.2};
    CHECK_THROWS_AS(parse_run_config(j.dump()), SchemaError);
    j = tiny_config();
    j["model"]["variant"] = "CLNN3";
    CHECK_THROWS_AS(parse_run_config(j.dump()), SchemaError);
    j = tiny_config();
    j["model"]["hidden_sizes"] = {8};
    CHECK_THROWS_AS(parse_run_config(j.dump()), SchemaError);
    j = tiny_config();
    j["split"]["train_fraction"] = 0.0;
    CHECK_THROWS_AS(parse_run_config(j.dump()), SchemaError);
    j = tiny_config();
    j["simulation"]["n_sim"] = "many";
    CHECK_THROWS_AS(parse_run_config(j.dump()), SchemaError);
    j = tiny_config();
    j.erase("dataset");
    CHECK_THROWS_AS(parse_run_config(j.dump()), SchemaError);
    j["categories"] = {"a", "b"};
    CHECK(parse_run_config(j.dump()).categories.size() == 2);
    CHECK_THROWS_AS(parse_run_config("{not json"), ParseError);
}

TEST_CASE("params_for_date") {
    std::vector<FactorParams> history(3);
    for (int i = 0; i < 3; ++i) {
        history[static_cast<std::size_t>(i)].date = i + 1;
        history[static_cast<std::size_t>(i)].m = 0.5;
        history[static_cast<std::size_t>(i)].betas = {0.1 * (i + 1), 0.2};
    }
    bool predicted = true;
    auto p = params_for_date(history, 2, &predicted);
    CHECK_FALSE(predicted);
    CHECK(p.m == 0.5);
    p = params_for_date(history, 3, &predicted);
    CHECK(p.betas[0] == doctest::Approx(0.3));
    history.erase(history.begin() + 2);
    p = params_for_date(history, 3, &predicted);
    CHECK(predicted);
    CHECK(p.m == 0.0);
    CHECK(p.betas[0] == doctest::Approx(0.15));
    CHECK(p.betas[1] == doctest::Approx(0.2));
    CHECK_THROWS_AS(params_for_date({}, 1), InvalidInput);
}

TEST_CASE("category history and baseline") {
    std::vector<Portfolio> data;
    for (int t = 1; t <= 6; ++t) {
        Portfolio p;
        p.date = t;
        p.loans.push_back({"a" + std::to_string(t), t, 1, {0.0}, 100.0, 0.1 * t});
        p.loans.push_back({"b" + std::to_string(t), t, 1, {0.0}, 300.0, 0.1 * t});
        if (t != 3) p.loans.push_back({"c" + std::to_string(t), t, 2, {0.0}, 50.0, 0.5});
        p.loans.push_back({"d" + std::to_string(t), t, 2, {0.0}, 50.0, std::nullopt});
        data.push_back(p);
    }
    const auto h = category_rate_history(data, 2);
    REQUIRE(h[0].size() == 6);
    CHECK(h[0][2].second == doctest::Approx(0.3));
    CHECK(h[1].size() == 5);

    // Category 1 history before date 6: 0.2..0.5 -> 0.35; category 2: 0.5.
    const auto b = baseline_for(data[5], h, 4);
    REQUIRE(b.has_value());
    CHECK(*b == doctest::Approx((0.35 * 400 + 0.5 * 100) / 500));
    CHECK_FALSE(baseline_for(data[4], h, 4).has_value());
}

TEST_CASE("pipeline output equals direct library calls") {
    const auto dir = scratch_dir("golden");
    const auto cfg = config_in(dir, tiny_config());
    PipelineOptions opts;
    opts.timestamp = false;
    opts.allow_degenerate = true;
    run_all(cfg, opts);

    const auto all = load_loans(cfg.loans_path());
    const auto ds = generate_synthetic(*cfg.dataset);
    CHECK(read_file(cfg.loans_path()) == [&] {
        std::ostringstream s;
        write_loans(s, ds.portfolios);
        return s.str();
    }());
    std::size_t rows = 0;
    for (const auto& p : all) rows += p.loans.size();
    CHECK(rows == 2u * 40u * 10u);

    const auto parts = split(all, cfg.split, cfg.split_seed);
    TrainConfig tc = cfg.train;
    tc.seed = derive_key(cfg.train.seed, {1});
    std::vector<LoanRecord> records;
    for (auto& l : loans_of_category(parts.train, 1))
        if (l.labeled()) records.push_back(l);
    const auto direct = train_category(records, cfg.tau_grid(), tc);
    const auto models = load_models(cfg);
    CHECK(flatten(direct) == flatten(models[0]));

    const auto estimates =
        estimate_with_averaging(parts.train, model_marginals(models), cfg.categories.size(), cfg.estimation);
    const auto stored = read_factor_params(factor_params_path(cfg));
    REQUIRE(stored.size() == estimates.size());
    for (std::size_t i = 0; i < stored.size(); ++i) {
        CHECK(stored[i].m == estimates[i].averaged.m);
        CHECK(stored[i].betas == estimates[i].averaged.betas);
    }

    const auto& target = parts.test_overlap.front();
    const auto dist = simulate_test_portfolio(target, models, params_for_date(stored, target.date), cfg.simulation);
    const auto report = json::parse(read_file(simulation_report_path(cfg, "overlap", target.date)));
    CHECK(report.at("format") == kSimulationFormat);
    CHECK_FALSE(report.contains("generated_at"));
    CHECK(report.at("draws").get<std::vector<double>>() == dist.draws);
    CHECK(report.at("n_sim") == 200);
    CHECK(report.at("histogram").at("counts").size() == 10);

    const auto eval = json::parse(read_file(cfg.paths.reports_dir / "evaluation_overlap.json"));
    CHECK(eval.at("format") == kEvaluationFormat);
    CHECK(eval.at("rows").size() == parts.test_overlap.size());
    CHECK(eval.at("wtest").contains("w"));
    CHECK(eval.at("wtest").at("status") == "ok");
    const auto hold = json::parse(read_file(cfg.paths.reports_dir / "evaluation_holdout.json"));
    CHECK(hold.at("wtest").at("status").get<std::string>().rfind("skipped", 0) == 0);
    CHECK_FALSE(read_file(cfg.paths.reports_dir / "evaluation_overlap.txt").empty());
}

TEST_CASE("missing models are reported") {
    const auto dir = scratch_dir("missing");
    const auto cfg = config_in(dir, tiny_config());
    CHECK_THROWS_AS(load_models(cfg), InvalidInput);
}

TEST_CASE("CLI: exit codes") {
    const auto dir = scratch_dir("cli_codes");
    auto j = tiny_config();
    j["dataset"]["true_betas"] = {0.4, 1.5};
    write_file(dir / "bad.json", j.dump());
    CHECK(run_cli("generate -c \"" + (dir / "bad.json").string() + "\"", dir / "log") == 2);
    CHECK(read_file(dir / "log").find("true betas") != std::string::npos);

    write_file(dir / "good.json", tiny_config().dump());
    const std::string good = " -c \"" + (dir / "good.json").string() + "\"";
    CHECK(run_cli("frobnicate" + good, dir / "log") == 1);
    CHECK(run_cli("generate", dir / "log") == 1);
    CHECK(run_cli("simulate" + good, dir / "log") == 2);
    CHECK(read_file(dir / "log").find("missing model") != std::string::npos);
    CHECK(run_cli("--help", dir / "log") == 0);
}

TEST_CASE("CLI: reruns are byte-identical") {
    std::map<std::string, std::string> first;
    for (int run = 0; run < 2; ++run) {
        const auto dir = scratch_dir("cli_rerun");
        write_file(dir / "config.json", tiny_config().dump());
        REQUIRE(run_cli("run-all --no-timestamp --allow-degenerate -c \"" + (dir / "config.json").string() + "\"",
                        dir / "cli.log") == 0);
        fs::remove(dir / "cli.log");
        auto snap = snapshot(dir);
        CHECK(snap.count("reports/evaluation_overlap.json") == 1);
        if (run == 0)
            first = std::move(snap);
        else
            CHECK(snap == first);
    }
}
