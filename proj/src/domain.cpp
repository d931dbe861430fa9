#include "npl/domain.hpp"

#include "npl/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace npl {

void validate(const LoanRecord& loan, int num_categories, double max_rate) {
    NPL_REQUIRE(std::isfinite(loan.expected_amount) && loan.expected_amount > 0.0,
                "loan " + loan.id + ": expected amount must be positive");
    NPL_REQUIRE(loan.category >= 1 && loan.category <= num_categories,
                "loan " + loan.id + ": category " + std::to_string(loan.category) + " outside 1.." +
                    std::to_string(num_categories));
    if (loan.realized_rate) {
        const double r = *loan.realized_rate;
        NPL_REQUIRE(std::isfinite(r) && r >= 0.0 && r <= max_rate,
                    "loan " + loan.id + ": realized rate outside [0, r_max]");
    }
    for (double f : loan.features)
        NPL_REQUIRE(std::isfinite(f), "loan " + loan.id + ": non-finite feature");
}

CategoryScheme CategoryScheme::overdue_stages(int count) {
    NPL_REQUIRE(count >= 1, "category count must be positive");
    CategoryScheme scheme;
    if (count == 17) {
        for (int m = 1; m <= 12; ++m) scheme.labels.push_back("M" + std::to_string(m));
        scheme.labels.insert(scheme.labels.end(), {"M13-15", "M16-18", "M19-21", "M22-24", "M24+"});
    } else {
        for (int c = 1; c <= count; ++c) scheme.labels.push_back("C" + std::to_string(c));
    }
    return scheme;
}

void validate(const CategoryScheme& scheme) {
    NPL_REQUIRE(scheme.size() >= 1, "category scheme must have at least one category");
    std::set<std::string> seen(scheme.labels.begin(), scheme.labels.end());
    NPL_REQUIRE(seen.size() == scheme.labels.size(), "category labels must be distinct");
}

std::vector<double> Portfolio::amounts() const {
    std::vector<double> out;
    out.reserve(loans.size());
    for (const auto& loan : loans) out.push_back(loan.expected_amount);
    return out;
}

double Portfolio::realized_rate() const {
    std::vector<double> rates;
    rates.reserve(loans.size());
    for (const auto& loan : loans) {
        NPL_REQUIRE(loan.realized_rate.has_value(), "loan " + loan.id + " has no realized rate");
        rates.push_back(*loan.realized_rate);
    }
    const auto a = amounts();
    return portfolio_repayment_rate(rates, a);
}

void validate(const Portfolio& portfolio) {
    NPL_REQUIRE(!portfolio.loans.empty(), "portfolio is empty");
    for (const auto& loan : portfolio.loans)
        NPL_REQUIRE(loan.date == portfolio.date, "loan " + loan.id + " has a different date index");
}

double loan_repayment_rate(double actual, double expected) {
    NPL_REQUIRE(expected > 0.0, "expected amount must be positive");
    NPL_REQUIRE(actual >= 0.0, "actual amount must be non-negative");
    return actual / expected;
}

double portfolio_repayment_rate(std::span<const double> rates, std::span<const double> amounts) {
    NPL_REQUIRE(!rates.empty(), "empty portfolio");
    NPL_REQUIRE(rates.size() == amounts.size(), "rates and amounts differ in length");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        NPL_REQUIRE(amounts[i] > 0.0, "amounts must be positive");
        num += rates[i] * amounts[i];
        den += amounts[i];
    }
    // Rounding can put the ratio one ulp outside the hull of the rates.
    const auto [lo, hi] = std::minmax_element(rates.begin(), rates.end());
    return std::clamp(num / den, *lo, *hi);
}

} // namespace npl
