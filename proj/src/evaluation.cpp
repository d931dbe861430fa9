#include "npl/evaluation.hpp"

#include "npl/error.hpp"
#include "npl/normal.hpp"
#include "npl/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace npl {

PitValue pit_value(std::span<const double> draws, double realized, double u_prime) {
    NPL_REQUIRE(!draws.empty(), "PIT needs at least one draw");
    NPL_REQUIRE(u_prime > 0.0 && u_prime < 1.0, "u' must lie in (0, 1)");
    std::size_t below = 0, ties = 0;
    for (double d : draws) {
        if (std::fabs(d - realized) <= 1e-12)
            ++ties;
        else if (d < realized)
            ++below;
    }
    const auto n = static_cast<double>(draws.size());
    const double floor = 0.5 / n;
    PitValue out;
    out.u = std::clamp((static_cast<double>(below) + u_prime * static_cast<double>(ties)) / n, floor, 1.0 - floor);
    out.y = gaussian_score(out.u);
    return out;
}

namespace {

double poly(std::span<const double> c, double x) {
    double r = 0.0;
    for (std::size_t i = c.size(); i-- > 0;) r = r * x + c[i];
    return r;
}

} // namespace

// Royston (1995), algorithm AS R94, for complete samples.
ShapiroWilk shapiro_wilk(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n < 3 || n > 50) throw UnsupportedSize("Shapiro-Wilk supports 3 <= n <= 50, got n = " + std::to_string(n));
    std::vector<double> x(samples.begin(), samples.end());
    std::sort(x.begin(), x.end());
    const double range = x.back() - x.front();
    NPL_REQUIRE(range > 1e-19 * std::max(1.0, std::fabs(x.front())), "Shapiro-Wilk needs a non-constant sample");

    static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
    static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
    static constexpr double c3[] = {0.5440, -0.39978, 0.025054, -6.714e-4};
    static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
    static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
    static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
    static constexpr double g[] = {-2.273, 0.459};

    const auto an = static_cast<double>(n);
    const std::size_t half = n / 2;
    // Coefficients for the upper half; the lower half mirrors them with a sign flip.
    std::vector<double> a(half);
    if (n == 3) {
        a[0] = std::numbers::sqrt2 / 2.0;
    } else {
        const double an25 = an + 0.25;
        std::vector<double> m(half);
        double summ2 = 0.0;
        for (std::size_t i = 0; i < half; ++i) {
            m[i] = gaussian_score_unchecked((static_cast<double>(i + 1) - 0.375) / an25);
            summ2 += m[i] * m[i];
        }
        summ2 *= 2.0;
        const double ssumm2 = std::sqrt(summ2);
        const double rsn = 1.0 / std::sqrt(an);
        const double a1 = poly(c1, rsn) - m[0] / ssumm2;
        std::size_t first_scaled;
        double fac;
        if (n > 5) {
            const double a2 = -m[1] / ssumm2 + poly(c2, rsn);
            fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
            a[0] = a1;
            a[1] = a2;
            first_scaled = 2;
        } else {
            fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
            a[0] = a1;
            first_scaled = 1;
        }
        for (std::size_t i = first_scaled; i < half; ++i) a[i] = -m[i] / fac;
    }

    // W as the squared correlation between the ordered sample and the
    // antisymmetric coefficient vector; 1 - W is formed directly.
    std::vector<double> coef(n, 0.0);
    for (std::size_t i = 0; i < half; ++i) {
        coef[i] = -a[i];
        coef[n - 1 - i] = a[i];
    }
    double sa = 0.0, sx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sa += coef[i];
        sx += x[i] / range;
    }
    sa /= an;
    sx /= an;
    double ssa = 0.0, ssx = 0.0, sax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double asa = coef[i] - sa;
        const double xsx = x[i] / range - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
    }
    const double ssassx = std::sqrt(ssa * ssx);
    const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    ShapiroWilk out;
    out.w = 1.0 - w1;

    if (n == 3) {
        const double pi6 = 6.0 / std::numbers::pi;
        const double stqr = std::numbers::pi / 3.0;
        out.p = std::max(0.0, pi6 * (std::asin(std::sqrt(out.w)) - stqr));
        return out;
    }
    double y = std::log(w1);
    const double lxx = std::log(an);
    double mu, sigma;
    if (n <= 11) {
        const double gamma = poly(g, an);
        if (y >= gamma) {
            out.p = 1e-99;
            return out;
        }
        y = -std::log(gamma - y);
        mu = poly(c3, an);
        sigma = std::exp(poly(c4, an));
    } else {
        mu = poly(c5, lxx);
        sigma = std::exp(poly(c6, lxx));
    }
    out.p = 1.0 - gaussian_cdf((y - mu) / sigma);
    return out;
}

double mape(std::span<const double> truths, std::span<const double> predictions) {
    NPL_REQUIRE(!truths.empty(), "MAPE needs at least one date");
    NPL_REQUIRE(truths.size() == predictions.size(), "truths and predictions differ in length");
    double s = 0.0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        NPL_REQUIRE(truths[i] != 0.0, "MAPE is undefined for a zero truth");
        s += std::fabs(truths[i] - predictions[i]) / std::fabs(truths[i]);
    }
    return s / static_cast<double>(truths.size());
}

double top_down_baseline(std::span<const std::vector<double>> category_histories, std::span<const double> category_amounts,
                         int window) {
    NPL_REQUIRE(window >= 1, "window must be positive");
    NPL_REQUIRE(category_histories.size() == category_amounts.size(), "one amount per category history expected");
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < category_histories.size(); ++j) {
        const double amount = category_amounts[j];
        NPL_REQUIRE(amount >= 0.0, "category amounts must be non-negative");
        if (amount == 0.0) continue;
        const auto& h = category_histories[j];
        NPL_REQUIRE(h.size() >= static_cast<std::size_t>(window),
                    "category " + std::to_string(j + 1) + " has " + std::to_string(h.size()) + " past periods, need " +
                        std::to_string(window));
        double mean = 0.0;
        for (std::size_t k = h.size() - static_cast<std::size_t>(window); k < h.size(); ++k) mean += h[k];
        mean /= window;
        num += mean * amount;
        den += amount;
    }
    NPL_REQUIRE(den > 0.0, "total amount must be positive");
    return num / den;
}

EvaluationReport evaluate_run(std::span<const DateOutcome> outcomes, const EvaluationOptions& options) {
    NPL_REQUIRE(!outcomes.empty(), "nothing to evaluate");
    EvaluationReport report;
    std::vector<double> truths, means, scores;
    std::vector<double> b_truths, b_means, baselines;
    for (const auto& o : outcomes) {
        EvaluationRow row;
        row.date = o.date;
        row.truth = o.realized;
        row.stats = summarize(o.prediction.draws);
        Stream rng(options.seed, {0x917ULL, static_cast<std::uint64_t>(o.date)});
        row.pit = pit_value(o.prediction.draws, o.realized, rng.uniform());
        row.baseline = o.baseline;
        truths.push_back(o.realized);
        means.push_back(row.stats.mean);
        scores.push_back(row.pit.y);
        if (o.baseline) {
            baselines.push_back(*o.baseline);
            b_truths.push_back(o.realized);
            b_means.push_back(row.stats.mean);
        }
        report.rows.push_back(std::move(row));
    }
    report.mape = mape(truths, means);
    if (!baselines.empty()) {
        report.baseline_mape = mape(b_truths, baselines);
        report.mape_on_baseline_dates = mape(b_truths, b_means);
    }

    if (static_cast<int>(scores.size()) < options.min_wtest_dates) {
        report.wtest_status = "skipped: " + std::to_string(scores.size()) + " dates, need " +
                              std::to_string(options.min_wtest_dates);
    } else if (scores.size() > 50) {
        report.wtest_status = "skipped: more than 50 dates";
    } else if (std::all_of(scores.begin(), scores.end(), [&](double s) { return s == scores.front(); })) {
        // Every realized rate fell on the same side of all draws: the forecast
        // misses completely and there is no spread left to test.
        report.wtest_status = "degenerate: identical PIT scores";
        report.wtest = ShapiroWilk{0.0, 0.0};
        report.rejected = true;
    } else {
        report.wtest = shapiro_wilk(scores);
        report.wtest_status = "ok";
        report.rejected = report.wtest->p < options.significance;
    }
    return report;
}

std::string format_report(const EvaluationReport& report, const std::string& title) {
    std::string out = title + "\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-6s %9s %9s %9s %9s %9s %8s %8s %9s\n", "date", "truth", "mean", "std", "skewness",
                  "kurtosis", "pit_u", "pit_y", "top-down");
    out += buf;
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%-6d %9.4f %9.4f %9.4f %9.4f %9.4f %8.4f %8.4f ", r.date, r.truth, r.stats.mean,
                      r.stats.std, r.stats.skewness, r.stats.kurtosis, r.pit.u, r.pit.y);
        out += buf;
        if (r.baseline) {
            std::snprintf(buf, sizeof buf, "%9.4f\n", *r.baseline);
            out += buf;
        } else {
            out += "        -\n";
        }
    }
    if (report.wtest_status == "ok") {
        std::snprintf(buf, sizeof buf, "W-test: W = %.4f  p-value = %.4f  %s\n", report.wtest->w, report.wtest->p,
                      report.rejected ? "rejected" : "not rejected");
        out += buf;
    } else {
        out += "W-test: " + report.wtest_status + "\n";
    }
    std::snprintf(buf, sizeof buf, "MAPE: bottom-up = %.4f", report.mape);
    out += buf;
    if (report.baseline_mape) {
        std::snprintf(buf, sizeof buf, "\nMAPE on %zu dates with a baseline: bottom-up = %.4f  top-down = %.4f",
                      report.baseline_dates(), *report.mape_on_baseline_dates, *report.baseline_mape);
        out += buf;
    }
    out += "\n";
    return out;
}

} // namespace npl
