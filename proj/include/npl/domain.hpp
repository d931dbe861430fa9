#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace npl {

/// Upper bound of the repayment-rate support. Penalty interest can push a
/// loan's rate above 1.
inline constexpr double kMaxRate = 1.5;

using DateIndex = int;
using CategoryId = int; // 1-based

/// One loan observed at one inspection date.
struct LoanRecord {
    std::string id;
    DateIndex date = 0;
    CategoryId category = 1;
    std::vector<double> features;
    double expected_amount = 1.0;
    std::optional<double> realized_rate;

    bool labeled() const noexcept { return realized_rate.has_value(); }
};

/// Validates a record against the loan invariants for a scheme with
/// `num_categories` categories. Throws InvalidInput.
void validate(const LoanRecord& loan, int num_categories, double max_rate = kMaxRate);

struct CategoryScheme {
    std::vector<std::string> labels;

    int size() const noexcept { return static_cast<int>(labels.size()); }

    /// M1..M12, M13-15, M16-18, M19-21, M22-24, M24+ (17 stages) when
    /// `count` is 17, otherwise C1..Cn.
    static CategoryScheme overdue_stages(int count);
};

void validate(const CategoryScheme& scheme);

/// All loans of one portfolio share a single inspection date.
struct Portfolio {
    DateIndex date = 0;
    std::vector<LoanRecord> loans;

    std::vector<double> amounts() const;
    /// Amount-weighted realized rate; every loan must be labeled.
    double realized_rate() const;
};

void validate(const Portfolio& portfolio);

/// actual / expected.
double loan_repayment_rate(double actual, double expected);

/// sum(r_i * P_i) / sum(P_i).
double portfolio_repayment_rate(std::span<const double> rates, std::span<const double> amounts);

} // namespace npl
