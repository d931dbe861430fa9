// Scratch directories, CLI invocation and file comparison shared by the
// pipeline and acceptance tests.
#pragma once

#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace npl::testing {

namespace fs = std::filesystem;

/// Fresh empty directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("npl_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

/// Exit status of the CLI with `args`; output goes to `dir`/cli.log.
inline int run_cli(const std::string& args, const fs::path& log, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + NPL_CLI_PATH + "\" " + args + " > \"" +
                            log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Relative path -> contents, for every regular file below `root`.
inline std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
    return out;
}

/// A small, quick run: 2 categories, 10 dates, a linear model.
inline nlohmann::json tiny_config() {
    return nlohmann::json::parse(R"({
      "paths": {"data_dir": "data", "models_dir": "models", "reports_dir": "reports"},
      "dataset": {"categories": 2, "feature_dim": 3, "loans_per_category": 40, "dates": 10,
                  "true_betas": [0.4, 0.6], "seed": 5},
      "split": {"train_fraction": 0.8, "holdout_dates": [10], "seed": 6},
      "model": {"variant": "CL", "tau_levels": 19, "iterations": 150, "seed": 7},
      "estimation": {"repetitions": 3, "seed": 8},
      "simulation": {"n_sim": 200, "histogram_bins": 10, "seed": 9},
      "evaluation": {"seed": 10}
    })");
}

} // namespace npl::testing
