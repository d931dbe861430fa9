#include "npl/estimation.hpp"

#include "npl/error.hpp"
#include "npl/normal.hpp"
#include "npl/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

namespace npl {

MomentSummary empirical_moments(std::span<const std::vector<double>> scores_by_category, DateIndex date) {
    MomentSummary summary;
    summary.date = date;
    for (const auto& scores : scores_by_category) {
        CategoryMoments cm;
        cm.count = static_cast<int>(scores.size());
        if (cm.count >= 1) {
            double sum = 0.0;
            for (double v : scores) sum += v;
            cm.mean = sum / cm.count;
        }
        if (cm.count >= 2) {
            double ss = 0.0;
            for (double v : scores) ss += (v - cm.mean) * (v - cm.mean);
            cm.variance = ss / (cm.count - 1);
        }
        summary.categories.push_back(cm);
    }
    return summary;
}

namespace {

std::vector<double> equation_weights(const MomentSummary& s, const FitOptions& options) {
    std::vector<double> w(s.categories.size(), 1.0);
    if (!options.count_weighted) return w;
    double total = 0.0;
    int present = 0;
    for (const auto& c : s.categories)
        if (c.count > 0) {
            total += c.count;
            ++present;
        }
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = present ? s.categories[j].count * present / total : 0.0;
    return w;
}

double category_term(const CategoryMoments& c, double m, double beta) {
    double g = 0.0;
    if (c.has_mean()) g += (beta * m - c.mean) * (beta * m - c.mean);
    if (c.has_variance()) {
        const double r = 1.0 - beta * beta - c.variance;
        g += r * r;
    }
    return g;
}

// Real roots of x^3 + p x + q = 0.
int depressed_cubic_roots(double p, double q, std::array<double, 3>& roots) {
    const double disc = 0.25 * q * q + p * p * p / 27.0;
    if (p == 0.0 && q == 0.0) {
        roots[0] = 0.0;
        return 1;
    }
    if (disc > 0.0) {
        const double s = std::sqrt(disc);
        roots[0] = std::cbrt(-0.5 * q + s) + std::cbrt(-0.5 * q - s);
        return 1;
    }
    const double r = 2.0 * std::sqrt(-p / 3.0);
    const double phi = std::acos(std::clamp(1.5 * q / p * std::sqrt(-3.0 / p), -1.0, 1.0)) / 3.0;
    for (int k = 0; k < 3; ++k) roots[static_cast<std::size_t>(k)] = r * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0);
    return 3;
}

// argmin over [0, 1] of the category's two squared residuals in beta.
double best_beta(const CategoryMoments& c, double m, double current) {
    std::array<double, 6> candidates{current, 0.0, 1.0, current, current, current};
    std::size_t n = 3;
    if (c.has_variance()) {
        // g'(b) / 4 = b^3 + (m^2 / 2 - (1 - V)) b - m vbar / 2 (mean term present when count >= 1).
        const double p = 0.5 * m * m - (1.0 - c.variance);
        const double q = -0.5 * m * c.mean;
        std::array<double, 3> roots{};
        const int k = depressed_cubic_roots(p, q, roots);
        for (int i = 0; i < k; ++i) {
            double b = roots[static_cast<std::size_t>(i)];
            const double f = b * b * b + p * b + q;
            const double df = 3.0 * b * b + p;
            if (df != 0.0) b -= f / df;
            candidates[n++] = b;
        }
    } else if (c.has_mean() && m != 0.0) {
        candidates[n++] = c.mean / m;
    }
    double best = current;
    double best_g = category_term(c, m, current);
    for (std::size_t i = 1; i < n; ++i) {
        const double b = std::clamp(candidates[i], 0.0, 1.0);
        const double g = category_term(c, m, b);
        if (g < best_g) {
            best_g = g;
            best = b;
        }
    }
    return best;
}

} // namespace

double moment_objective(const MomentSummary& summary, double m, std::span<const double> betas, const FitOptions& options) {
    NPL_REQUIRE(betas.size() == summary.categories.size(), "one loading per category expected");
    const auto w = equation_weights(summary, options);
    double f = 0.0;
    for (std::size_t j = 0; j < betas.size(); ++j) f += w[j] * category_term(summary.categories[j], m, betas[j]);
    return f;
}

FactorFit fit_factor_params(const MomentSummary& summary, const FitOptions& options) {
    const std::size_t J = summary.categories.size();
    NPL_REQUIRE(J >= 1, "moment summary has no categories");
    NPL_REQUIRE(std::any_of(summary.categories.begin(), summary.categories.end(),
                            [](const CategoryMoments& c) { return c.has_variance(); }),
                "at least one category needs two or more scores");

    FactorFit fit;
    fit.params.date = summary.date;
    fit.params.betas.assign(J, 0.0);
    auto& beta = fit.params.betas;
    double& m = fit.params.m;

    const bool all_above_one = std::all_of(summary.categories.begin(), summary.categories.end(),
                                           [](const CategoryMoments& c) { return !c.has_variance() || c.variance > 1.0; });
    if (all_above_one) {
        fit.objective = fit.initial_objective = moment_objective(summary, 0.0, beta, options);
        fit.degenerate = true;
        return fit;
    }

    const auto w = equation_weights(summary, options);
    for (std::size_t j = 0; j < J; ++j) {
        const auto& c = summary.categories[j];
        beta[j] = c.has_variance() ? std::sqrt(std::max(0.0, 1.0 - c.variance)) : 0.0;
    }
    auto update_m = [&] {
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            if (!summary.categories[j].has_mean()) continue;
            num += w[j] * beta[j] * summary.categories[j].mean;
            den += w[j] * beta[j] * beta[j];
        }
        if (den > 0.0) m = num / den;
    };
    update_m();

    double f = moment_objective(summary, m, beta, options);
    fit.initial_objective = f;
    for (int it = 0; it < options.max_iterations; ++it) {
        for (std::size_t j = 0; j < J; ++j)
            if (summary.categories[j].count > 0) beta[j] = best_beta(summary.categories[j], m, beta[j]);
        update_m();
        const double next = moment_objective(summary, m, beta, options);
        fit.iterations = it + 1;
        const double decrease = f - next;
        f = std::min(f, next);
        if (decrease < options.tolerance) break;
    }
    fit.objective = f;
    if (std::all_of(beta.begin(), beta.end(), [](double b) { return b == 0.0; })) {
        m = 0.0;
        fit.degenerate = true;
    }
    return fit;
}

namespace {

FactorFit run_repetition(const Portfolio& p, const std::vector<MarginalDistribution>& marginals, int categories,
                         const EstimationOptions& options, int rep) {
    Stream rng(options.seed, {0xe57ULL, static_cast<std::uint64_t>(p.date), static_cast<std::uint64_t>(rep)});
    std::vector<std::vector<double>> scores(static_cast<std::size_t>(categories));
    for (std::size_t i = 0; i < p.loans.size(); ++i) {
        const auto& loan = p.loans[i];
        const double u_prime = rng.uniform();
        if (!loan.realized_rate) continue;
        const double u = rand_pit(*loan.realized_rate, marginals[i], u_prime);
        scores[static_cast<std::size_t>(loan.category - 1)].push_back(gaussian_score_unchecked(u));
    }
    return fit_factor_params(empirical_moments(scores, p.date), options.fit);
}

} // namespace

std::vector<DateEstimate> estimate_with_averaging(std::span<const Portfolio> portfolios, const MarginalProvider& marginals,
                                                  int categories, const EstimationOptions& options, Execution exec) {
    NPL_REQUIRE(options.repetitions >= 1, "repetitions must be at least 1");
    NPL_REQUIRE(categories >= 1, "categories must be positive");
    std::vector<DateEstimate> out;
    for (const auto& p : portfolios) {
        for (const auto& loan : p.loans)
            NPL_REQUIRE(loan.category >= 1 && loan.category <= categories,
                        "loan " + loan.id + ": category outside 1.." + std::to_string(categories));
        const auto dists = marginals(p);
        for (std::size_t i = dists.size(); i < p.loans.size(); ++i)
            NPL_REQUIRE(!p.loans[i].realized_rate, "no marginal distribution for labeled loan " + p.loans[i].id);

        DateEstimate est;
        est.counts.assign(static_cast<std::size_t>(categories), 0);
        for (const auto& loan : p.loans)
            if (loan.realized_rate) ++est.counts[static_cast<std::size_t>(loan.category - 1)];
        for (int j = 1; j <= categories; ++j)
            if (est.counts[static_cast<std::size_t>(j - 1)] > 0 && est.counts[static_cast<std::size_t>(j - 1)] < kSmallCategoryCount)
                est.small_categories.push_back(j);
        if (std::none_of(est.counts.begin(), est.counts.end(), [](int c) { return c >= 2; })) continue;

        est.repetitions.resize(static_cast<std::size_t>(options.repetitions));
        if (exec == Execution::parallel) {
            std::exception_ptr error;
#pragma omp parallel for schedule(static)
            for (int r = 0; r < options.repetitions; ++r) {
                try {
                    est.repetitions[static_cast<std::size_t>(r)] = run_repetition(p, dists, categories, options, r);
                } catch (...) {
#pragma omp critical
                    error = std::current_exception();
                }
            }
            if (error) std::rethrow_exception(error);
        } else {
            for (int r = 0; r < options.repetitions; ++r)
                est.repetitions[static_cast<std::size_t>(r)] = run_repetition(p, dists, categories, options, r);
        }

        est.averaged.date = p.date;
        est.averaged.betas.assign(static_cast<std::size_t>(categories), 0.0);
        for (const auto& fit : est.repetitions) {
            est.averaged.m += fit.params.m;
            for (std::size_t j = 0; j < est.averaged.betas.size(); ++j) est.averaged.betas[j] += fit.params.betas[j];
            est.degenerate_repetitions += fit.degenerate;
        }
        est.degenerate = est.degenerate_repetitions == options.repetitions;
        est.averaged.m /= options.repetitions;
        for (double& b : est.averaged.betas) b /= options.repetitions;
        out.push_back(std::move(est));
    }
    return out;
}

std::vector<double> predict_beta_for_new_date(std::span<const FactorParams> history) {
    NPL_REQUIRE(!history.empty(), "cannot predict loadings from an empty history");
    std::vector<double> mean(history.front().betas.size(), 0.0);
    for (const auto& h : history) {
        NPL_REQUIRE(h.betas.size() == mean.size(), "history entries have different category counts");
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += h.betas[j];
    }
    for (double& b : mean) b /= static_cast<double>(history.size());
    return mean;
}

void write_factor_params(const std::filesystem::path& path, std::span<const DateEstimate> estimates,
                         const EstimationOptions& options) {
    nlohmann::ordered_json j;
    j["format"] = kFactorParamsFormat;
    j["version"] = 1;
    j["repetitions"] = options.repetitions;
    j["seed"] = options.seed;
    j["count_weighted"] = options.fit.count_weighted;
    auto dates = nlohmann::ordered_json::array();
    for (const auto& e : estimates) {
        auto reps = nlohmann::ordered_json::array();
        for (const auto& r : e.repetitions)
            reps.push_back({{"m", r.params.m}, {"betas", r.params.betas}, {"objective", r.objective},
                            {"iterations", r.iterations}, {"degenerate", r.degenerate}});
        dates.push_back({{"date_index", e.averaged.date},
                         {"m", e.averaged.m},
                         {"betas", e.averaged.betas},
                         {"counts", e.counts},
                         {"small_count_categories", e.small_categories},
                         {"degenerate", e.degenerate},
                         {"degenerate_repetitions", e.degenerate_repetitions},
                         {"repetitions", reps}});
    }
    j["dates"] = dates;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(1) << '\n';
}

std::vector<FactorParams> read_factor_params(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open factor parameter file " + path.string());
    try {
        nlohmann::json j;
        in >> j;
        if (j.value("format", std::string{}) != kFactorParamsFormat)
            throw SchemaError(path.string() + ": not a factor parameter file");
        std::vector<FactorParams> out;
        for (const auto& d : j.at("dates")) {
            FactorParams fp;
            fp.date = d.at("date_index").get<int>();
            fp.m = d.at("m").get<double>();
            fp.betas = d.at("betas").get<std::vector<double>>();
            validate(fp);
            out.push_back(std::move(fp));
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    } catch (const InvalidInput& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

} // namespace npl
