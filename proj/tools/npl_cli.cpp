// Command-line front end: generate | train | fit-copula | simulate | evaluate | run-all.
// Exit codes: 0 success, 1 usage, 2 data or schema error, 3 numerical failure.

#include "npl/error.hpp"
#include "npl/pipeline.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bottom-up forecasting of non-performing loan portfolio repayment rates"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    bool no_timestamp = false;
    bool allow_degenerate = false;
    bool serial = false;
    app.add_option("-c,--config", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    app.add_flag("--no-timestamp", no_timestamp, "omit generated_at from report headers");
    app.add_flag("--allow-degenerate", allow_degenerate, "continue when a factor fit has every loading at zero");
    app.add_flag("--serial", serial, "use the serial reference kernels");

    using Command = std::function<void(const npl::RunConfig&, const npl::PipelineOptions&)>;
    const std::vector<std::tuple<std::string, std::string, Command>> commands = {
        {"generate", "write a synthetic loan file and its ground truth", npl::cmd_generate},
        {"train", "split the loans and train one quantile network per category", npl::cmd_train},
        {"fit-copula", "estimate factor loadings for every training date", npl::cmd_fit_copula},
        {"simulate", "simulate repayment-rate distributions of the test portfolios", npl::cmd_simulate},
        {"evaluate", "PIT, W-test and MAPE against realized rates", npl::cmd_evaluate},
        {"run-all", "every stage in order", npl::run_all},
    };
    std::map<CLI::App*, Command> handlers;
    for (const auto& [name, help, fn] : commands) handlers[app.add_subcommand(name, help)] = fn;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        const auto cfg = npl::load_run_config(config_path);
        npl::PipelineOptions opts;
        opts.timestamp = !no_timestamp;
        opts.allow_degenerate = allow_degenerate;
        opts.exec = serial ? npl::Execution::serial : npl::Execution::parallel;
        opts.log = &std::cerr;
        for (auto* sub : app.get_subcommands()) handlers.at(sub)(cfg, opts);
    } catch (const npl::NumericalFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}
