#include "npl/data.hpp"

#include "npl/copula.hpp"
#include "npl/error.hpp"
#include "npl/normal.hpp"
#include "npl/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string_view>

namespace npl {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    if (s.empty()) return false;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

void append_real(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

const std::vector<std::string_view> kFixedColumns = {"loan_id", "date_index", "category", "expected_amount",
                                                     "realized_rate"};

} // namespace

std::vector<Portfolio> read_loans(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("missing header", 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_fields(line);
    if (header.size() < kFixedColumns.size() + 1) throw ParseError("header needs the five fixed columns and at least one feature", 1);
    for (std::size_t c = 0; c < kFixedColumns.size(); ++c)
        if (header[c] != kFixedColumns[c])
            throw ParseError("header column " + std::to_string(c + 1) + " must be '" + std::string(kFixedColumns[c]) + "'", 1);
    const std::size_t dim = header.size() - kFixedColumns.size();

    std::map<DateIndex, Portfolio> by_date;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_fields(line);
        if (f.size() < kFixedColumns.size()) throw ParseError("expected at least 5 fields", line_no);
        if (f.size() != header.size())
            throw SchemaError("line " + std::to_string(line_no) + ": " + std::to_string(f.size() - kFixedColumns.size()) +
                              " features, header declares " + std::to_string(dim));
        LoanRecord loan;
        loan.id = std::string(f[0]);
        if (loan.id.empty()) throw ParseError("empty loan_id", line_no);
        if (!parse_number(f[1], loan.date)) throw ParseError("bad date_index '" + std::string(f[1]) + "'", line_no);
        if (!parse_number(f[2], loan.category) || loan.category < 1)
            throw ParseError("bad category '" + std::string(f[2]) + "'", line_no);
        if (!parse_number(f[3], loan.expected_amount) || !std::isfinite(loan.expected_amount) || loan.expected_amount <= 0.0)
            throw ParseError("expected_amount must be a positive number, got '" + std::string(f[3]) + "'", line_no);
        if (!f[4].empty()) {
            double r = 0.0;
            if (!parse_number(f[4], r) || !(r >= 0.0 && r <= kMaxRate))
                throw ParseError("realized_rate must be empty or in [0, 1.5], got '" + std::string(f[4]) + "'", line_no);
            loan.realized_rate = r;
        }
        loan.features.resize(dim);
        for (std::size_t k = 0; k < dim; ++k)
            if (!parse_number(f[kFixedColumns.size() + k], loan.features[k]) || !std::isfinite(loan.features[k]))
                throw ParseError("bad feature f" + std::to_string(k + 1) + " '" + std::string(f[kFixedColumns.size() + k]) + "'",
                                 line_no);
        auto& portfolio = by_date[loan.date];
        portfolio.date = loan.date;
        portfolio.loans.push_back(std::move(loan));
    }
    std::vector<Portfolio> out;
    out.reserve(by_date.size());
    for (auto& [t, p] : by_date) out.push_back(std::move(p));
    return out;
}

std::vector<Portfolio> load_loans(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    return read_loans(in);
}

void write_loans(std::ostream& out, std::span<const Portfolio> portfolios, std::size_t feature_dim) {
    std::size_t dim = feature_dim;
    bool first = true;
    for (const auto& p : portfolios)
        for (const auto& loan : p.loans) {
            if (first && feature_dim == 0) dim = loan.features.size();
            first = false;
            NPL_REQUIRE(loan.features.size() == dim, "loan " + loan.id + ": inconsistent feature dimension");
        }
    NPL_REQUIRE(dim >= 1, "nothing to write: no loans or no features");
    std::string buf = "loan_id,date_index,category,expected_amount,realized_rate";
    for (std::size_t k = 1; k <= dim; ++k) buf += ",f" + std::to_string(k);
    buf += '\n';
    for (const auto& p : portfolios)
        for (const auto& loan : p.loans) {
            buf += loan.id;
            buf += ',' + std::to_string(loan.date) + ',' + std::to_string(loan.category) + ',';
            append_real(buf, loan.expected_amount);
            buf += ',';
            if (loan.realized_rate) append_real(buf, *loan.realized_rate);
            for (double x : loan.features) {
                buf += ',';
                append_real(buf, x);
            }
            buf += '\n';
        }
    out << buf;
}

void write_loans(const std::filesystem::path& path, std::span<const Portfolio> portfolios, std::size_t feature_dim) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_loans(out, portfolios, feature_dim);
}

// ---------------------------------------------------------------------------

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace

double CategoryLaw::zero_probability(std::span<const double> x) const {
    NPL_REQUIRE(x.size() == zero_coef.size(), "feature dimension does not match the law");
    return 1.0 / (1.0 + std::exp(-(dot(zero_coef, x) + zero_intercept)));
}

double CategoryLaw::quantile(std::span<const double> x, double u, double max_rate) const {
    const double p0 = zero_probability(x);
    if (u <= p0) return 0.0;
    const double w = std::clamp((u - p0) / (1.0 - p0), kUniformClamp, 1.0 - kUniformClamp);
    return std::min(max_rate, body_scale * std::exp(dot(body_coef, x) + body_sigma * gaussian_score_unchecked(w)));
}

double CategoryLaw::cdf(std::span<const double> x, double y, double max_rate) const {
    if (y < 0.0) return 0.0;
    if (y >= max_rate) return 1.0;
    const double p0 = zero_probability(x);
    if (y == 0.0) return p0;
    const double z = (std::log(y / body_scale) - dot(body_coef, x)) / body_sigma;
    return p0 + (1.0 - p0) * gaussian_cdf(z);
}

std::vector<CategoryLaw> default_laws(int categories, int feature_dim, std::uint64_t seed) {
    NPL_REQUIRE(categories >= 1 && feature_dim >= 1, "categories and feature dimension must be positive");
    std::vector<CategoryLaw> laws;
    const double spread = categories > 1 ? 1.0 / (categories - 1) : 0.0;
    const double coef_scale = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    for (int j = 0; j < categories; ++j) {
        Stream rng(seed, {0x1a75ULL, static_cast<std::uint64_t>(j)});
        CategoryLaw law;
        law.zero_coef.resize(static_cast<std::size_t>(feature_dim));
        law.body_coef.resize(static_cast<std::size_t>(feature_dim));
        for (auto& a : law.zero_coef) a = 0.5 * coef_scale * rng.normal();
        for (auto& c : law.body_coef) c = 0.3 * coef_scale * rng.normal();
        law.zero_coef[0] = -0.6;
        law.body_coef[0] = 0.3;
        const double zero_share = 0.25 + 0.35 * j * spread;
        law.zero_intercept = std::log(zero_share / (1.0 - zero_share));
        law.body_sigma = 0.6;
        law.body_scale = 0.3 * std::exp(-0.4 * j * spread);
        laws.push_back(std::move(law));
    }
    return laws;
}

void validate(const DatasetConfig& cfg) {
    NPL_REQUIRE(cfg.categories >= 1, "categories must be positive");
    NPL_REQUIRE(cfg.feature_dim >= 1, "feature dimension must be positive");
    NPL_REQUIRE(cfg.loans_per_category >= 1, "loans_per_category must be positive");
    NPL_REQUIRE(cfg.dates >= 1, "number of dates must be positive");
    NPL_REQUIRE(cfg.true_betas.size() == static_cast<std::size_t>(cfg.categories), "need one true beta per category");
    for (double b : cfg.true_betas) NPL_REQUIRE(b >= 0.0 && b < 1.0, "true betas must lie in [0, 1)");
    NPL_REQUIRE(cfg.laws.size() == static_cast<std::size_t>(cfg.categories), "need one law per category");
    for (const auto& law : cfg.laws) {
        NPL_REQUIRE(law.zero_coef.size() == static_cast<std::size_t>(cfg.feature_dim) &&
                        law.body_coef.size() == static_cast<std::size_t>(cfg.feature_dim),
                    "law coefficients must match the feature dimension");
        NPL_REQUIRE(law.body_sigma > 0.0 && law.body_scale > 0.0, "law sigma and scale must be positive");
    }
    NPL_REQUIRE(cfg.amount_median > 0.0 && cfg.amount_log_sigma >= 0.0, "amount distribution is invalid");
    NPL_REQUIRE(cfg.max_rate > 0.0, "max rate must be positive");
}

DatasetConfig complete(DatasetConfig cfg) {
    if (cfg.laws.empty() && cfg.categories >= 1 && cfg.feature_dim >= 1)
        cfg.laws = default_laws(cfg.categories, cfg.feature_dim, cfg.seed);
    validate(cfg);
    return cfg;
}

double GroundTruth::factor(DateIndex t) const {
    const auto it = std::find(dates.begin(), dates.end(), t);
    NPL_REQUIRE(it != dates.end(), "no ground-truth factor for date " + std::to_string(t));
    return factors[static_cast<std::size_t>(it - dates.begin())];
}

MarginalDistribution GroundTruth::true_marginal(const LoanRecord& loan, std::span<const double> tau_grid) const {
    NPL_REQUIRE(loan.category >= 1 && loan.category <= static_cast<int>(laws.size()), "unknown category");
    const auto& law = laws[static_cast<std::size_t>(loan.category - 1)];
    std::vector<double> q(tau_grid.size());
    for (std::size_t k = 0; k < q.size(); ++k) q[k] = law.quantile(loan.features, tau_grid[k], max_rate);
    return MarginalDistribution::build(q, tau_grid, max_rate);
}

SyntheticDataset generate_synthetic(const DatasetConfig& raw_cfg) {
    const DatasetConfig cfg = complete(raw_cfg);
    SyntheticDataset out;
    auto& truth = out.truth;
    truth.betas = cfg.true_betas;
    truth.laws = cfg.laws;
    truth.max_rate = cfg.max_rate;

    const auto dim = static_cast<std::size_t>(cfg.feature_dim);
    const double log_median = std::log(cfg.amount_median);
    for (int t = 1; t <= cfg.dates; ++t) {
        const auto tu = static_cast<std::uint64_t>(t);
        Stream factor_rng(cfg.seed, {0xfac7ULL, tu});
        const double m = factor_rng.normal();
        truth.dates.push_back(t);
        truth.factors.push_back(m);

        Portfolio portfolio;
        portfolio.date = t;
        std::vector<double> scores;
        const double drift = cfg.feature_drift * (t - 1);
        for (int j = 1; j <= cfg.categories; ++j) {
            const auto& law = cfg.laws[static_cast<std::size_t>(j - 1)];
            const double beta = cfg.true_betas[static_cast<std::size_t>(j - 1)];
            for (int i = 0; i < cfg.loans_per_category; ++i) {
                Stream rng(cfg.seed, {0x10a2ULL, tu, static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(i)});
                LoanRecord loan;
                loan.id = "t" + std::to_string(t) + "-c" + std::to_string(j) + "-" + std::to_string(i);
                loan.date = t;
                loan.category = j;
                loan.features.resize(dim);
                for (auto& x : loan.features) x = rng.normal();
                loan.features[0] += drift;
                loan.expected_amount = std::exp(log_median + cfg.amount_log_sigma * rng.normal());
                const double v = factor_combine(m, rng.normal(), beta);
                loan.realized_rate = law.quantile(loan.features, gaussian_cdf(v), cfg.max_rate);
                scores.push_back(v);
                portfolio.loans.push_back(std::move(loan));
            }
        }
        out.portfolios.push_back(std::move(portfolio));
        truth.scores.push_back(std::move(scores));
    }
    return out;
}

void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth) {
    nlohmann::ordered_json j;
    j["format"] = kGroundTruthFormat;
    j["version"] = 1;
    j["betas"] = truth.betas;
    j["max_rate"] = truth.max_rate;
    auto dates = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < truth.dates.size(); ++i) dates.push_back({{"date_index", truth.dates[i]}, {"m", truth.factors[i]}});
    j["dates"] = dates;
    auto laws = nlohmann::ordered_json::array();
    for (const auto& law : truth.laws)
        laws.push_back({{"zero_coef", law.zero_coef},
                        {"zero_intercept", law.zero_intercept},
                        {"body_coef", law.body_coef},
                        {"body_sigma", law.body_sigma},
                        {"body_scale", law.body_scale}});
    j["laws"] = laws;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(1) << '\n';
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    try {
        nlohmann::json j;
        in >> j;
        if (j.value("format", std::string{}) != kGroundTruthFormat) throw SchemaError(path.string() + ": not a ground-truth file");
        GroundTruth truth;
        truth.betas = j.at("betas").get<std::vector<double>>();
        truth.max_rate = j.at("max_rate").get<double>();
        for (const auto& d : j.at("dates")) {
            truth.dates.push_back(d.at("date_index").get<int>());
            truth.factors.push_back(d.at("m").get<double>());
        }
        for (const auto& l : j.at("laws")) {
            CategoryLaw law;
            law.zero_coef = l.at("zero_coef").get<std::vector<double>>();
            law.zero_intercept = l.at("zero_intercept").get<double>();
            law.body_coef = l.at("body_coef").get<std::vector<double>>();
            law.body_sigma = l.at("body_sigma").get<double>();
            law.body_scale = l.at("body_scale").get<double>();
            truth.laws.push_back(std::move(law));
        }
        return truth;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------

DataSplit split(std::span<const Portfolio> data, const SplitSpec& spec, std::uint64_t seed) {
    NPL_REQUIRE(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0, "train fraction must lie in (0, 1]");
    for (DateIndex t : spec.holdout_dates) {
        const bool known = std::any_of(data.begin(), data.end(), [t](const Portfolio& p) { return p.date == t; });
        NPL_REQUIRE(known, "holdout date " + std::to_string(t) + " is not present in the data");
    }
    DataSplit out;
    for (const auto& p : data) {
        if (std::find(spec.holdout_dates.begin(), spec.holdout_dates.end(), p.date) != spec.holdout_dates.end()) {
            out.test_holdout.push_back(p);
            continue;
        }
        std::map<CategoryId, std::vector<std::size_t>> cells;
        for (std::size_t i = 0; i < p.loans.size(); ++i) cells[p.loans[i].category].push_back(i);
        std::vector<char> to_train(p.loans.size(), 0);
        for (auto& [j, idx] : cells) {
            Stream rng(seed, {0x5b1, static_cast<std::uint64_t>(p.date), static_cast<std::uint64_t>(j)});
            for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
            const auto n_train =
                static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(idx.size()) + 0.5));
            for (std::size_t k = 0; k < n_train; ++k) to_train[idx[k]] = 1;
        }
        Portfolio train{p.date, {}}, test{p.date, {}};
        for (std::size_t i = 0; i < p.loans.size(); ++i) (to_train[i] ? train : test).loans.push_back(p.loans[i]);
        if (!train.loans.empty()) out.train.push_back(std::move(train));
        if (!test.loans.empty()) out.test_overlap.push_back(std::move(test));
    }
    return out;
}

std::vector<LoanRecord> loans_of_category(std::span<const Portfolio> portfolios, CategoryId category) {
    std::vector<LoanRecord> out;
    for (const auto& p : portfolios)
        for (const auto& loan : p.loans)
            if (loan.category == category) out.push_back(loan);
    return out;
}

int max_category(std::span<const Portfolio> portfolios) {
    int j = 0;
    for (const auto& p : portfolios)
        for (const auto& loan : p.loans) j = std::max(j, loan.category);
    return j;
}

} // namespace npl
