#pragma once

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "countreg/dataset.hpp"
#include "countreg/errors.hpp"
#include "countreg/fit.hpp"

namespace countreg {

/// Upper tail P(X > x) of a chi-square with `df` degrees of freedom.
inline double chi_square_sf(double x, int df) {
  if (df < 1) throw DomainError("chi-square degrees of freedom must be positive");
  if (std::isnan(x) || x < 0.0) throw DomainError("chi-square statistic must be nonnegative");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

struct ContingencyResult {
  std::vector<std::string> row_labels;
  std::vector<std::string> column_labels;
  Eigen::MatrixXd observed;
  Eigen::MatrixXd expected;
  double chi2 = 0.0;
  int df = 0;
  double p_value = 1.0;
  double min_expected = 0.0;
  /// Some expected cell is below 5; reported, never fatal.
  bool low_expected_warning = false;
  /// Always false: the Pearson statistic is uncorrected.
  bool continuity_correction = false;
  std::string stars;
};

/// Pearson chi-square test of independence on an r x c table of counts.
inline ContingencyResult chi_square_table(const Eigen::MatrixXd& observed) {
  const auto r = observed.rows(), c = observed.cols();
  if (r < 2 || c < 2)
    throw DegenerateTableError("contingency table needs at least two rows and two columns");
  if ((observed.array() < 0.0).any() || !observed.allFinite())
    throw DegenerateTableError("contingency table holds negative or non-finite counts");
  const Eigen::VectorXd row_sum = observed.rowwise().sum();
  const Eigen::RowVectorXd col_sum = observed.colwise().sum();
  if ((row_sum.array() <= 0.0).any() || (col_sum.array() <= 0.0).any())
    throw DegenerateTableError("contingency table has an empty row or column margin");
  const double total = row_sum.sum();

  ContingencyResult res;
  res.observed = observed;
  res.expected = row_sum * col_sum / total;
  double chi2 = 0.0;
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) {
      const double diff = observed(i, j) - res.expected(i, j);
      chi2 += diff * diff / res.expected(i, j);
    }
  res.chi2 = chi2;
  res.df = static_cast<int>((r - 1) * (c - 1));
  res.p_value = chi_square_sf(chi2, res.df);
  res.min_expected = res.expected.minCoeff();
  res.low_expected_warning = res.min_expected < 5.0;
  res.stars = significance_stars(res.p_value);
  return res;
}

namespace detail {

/// Category labels and per-row codes of a categorical or count column.
/// Counts are tabulated at their observed distinct values, unbinned.
inline std::pair<std::vector<std::string>, std::vector<std::size_t>> categories_of(const Column& col) {
  if (const auto* cat = std::get_if<CategoricalColumn>(&col.data)) {
    // Only observed levels form rows so filtered-out levels do not empty a margin.
    std::vector<bool> seen(cat->levels.size(), false);
    for (auto code : cat->codes) seen[code] = true;
    std::vector<std::size_t> remap(cat->levels.size(), 0);
    std::vector<std::string> labels;
    for (std::size_t l = 0; l < seen.size(); ++l)
      if (seen[l]) {
        remap[l] = labels.size();
        labels.push_back(cat->levels[l]);
      }
    std::vector<std::size_t> codes;
    codes.reserve(cat->codes.size());
    for (auto code : cat->codes) codes.push_back(remap[code]);
    return {labels, codes};
  }
  if (const auto* cnt = std::get_if<CountColumn>(&col.data)) {
    std::map<Count, std::size_t> index;
    for (auto v : cnt->values) index.emplace(v, 0);
    std::vector<std::string> labels;
    for (auto& [v, k] : index) {
      k = labels.size();
      labels.push_back(std::to_string(v));
    }
    std::vector<std::size_t> codes;
    codes.reserve(cnt->values.size());
    for (auto v : cnt->values) codes.push_back(index.at(v));
    return {labels, codes};
  }
  throw SchemaError("column '" + col.name + "' is numeric; screening needs a categorical or count column");
}

}  // namespace detail

/// Cross-tabulates `covariate` (rows) against `response` (columns) and tests
/// independence.
inline ContingencyResult chi_square_independence(const Dataset& ds, const std::string& covariate,
                                                 const std::string& response) {
  const auto [row_labels, row_codes] = detail::categories_of(ds.column(covariate));
  const auto [col_labels, col_codes] = detail::categories_of(ds.column(response));
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(row_labels.size()),
                                                static_cast<Eigen::Index>(col_labels.size()));
  for (std::size_t i = 0; i < row_codes.size(); ++i)
    table(static_cast<Eigen::Index>(row_codes[i]), static_cast<Eigen::Index>(col_codes[i])) += 1.0;
  auto res = chi_square_table(table);
  res.row_labels = row_labels;
  res.column_labels = col_labels;
  return res;
}

enum class Dispersion { Equidispersed, Overdispersed, Underdispersed };

inline std::string_view to_string(Dispersion d) {
  switch (d) {
    case Dispersion::Equidispersed: return "equidispersed";
    case Dispersion::Overdispersed: return "overdispersed";
    case Dispersion::Underdispersed: return "underdispersed";
  }
  return "?";
}

struct DispersionSummary {
  double mean = 0.0;
  double variance = 0.0;  // denominator n - 1
  double ratio = 0.0;
  Dispersion verdict = Dispersion::Equidispersed;
};

inline DispersionSummary dispersion_summary(std::span<const Count> y) {
  if (y.size() < 2) throw InsufficientDataError("dispersion summary needs at least two observations");
  const double n = static_cast<double>(y.size());
  double mean = 0.0;
  for (auto v : y) mean += static_cast<double>(v);
  mean /= n;
  if (mean == 0.0) throw DomainError("dispersion ratio is undefined for an all-zero response");
  double ss = 0.0;
  for (auto v : y) {
    const double d = static_cast<double>(v) - mean;
    ss += d * d;
  }
  DispersionSummary s;
  s.mean = mean;
  s.variance = ss / (n - 1.0);
  s.ratio = s.variance / s.mean;
  s.verdict = s.ratio > 1.0   ? Dispersion::Overdispersed
              : s.ratio < 1.0 ? Dispersion::Underdispersed
                              : Dispersion::Equidispersed;
  return s;
}

struct ZeroSummary {
  double observed_zero_fraction = 0.0;
  /// Mean fitted P(Y = 0) when a fit was supplied.
  std::optional<double> expected_zero_fraction;
  std::optional<Family> family;
  /// histogram[v] = number of observations equal to v.
  std::vector<std::size_t> histogram;
};

inline ZeroSummary zero_summary(std::span<const Count> y) {
  if (y.empty()) throw InsufficientDataError("zero summary needs at least one observation");
  ZeroSummary s;
  const Count max = *std::max_element(y.begin(), y.end());
  if (max < 0) throw DomainError("negative count in response");
  s.histogram.assign(static_cast<std::size_t>(max) + 1, 0);
  for (auto v : y) {
    if (v < 0) throw DomainError("negative count in response");
    ++s.histogram[static_cast<std::size_t>(v)];
  }
  s.observed_zero_fraction = static_cast<double>(s.histogram[0]) / static_cast<double>(y.size());
  return s;
}

/// As above, plus the expected zero fraction (1/n) sum_i P(Y=0 | x_i, z_i)
/// under `fit`, whose designs are `x` and (ZINB) `z`.
inline ZeroSummary zero_summary(std::span<const Count> y, const FitResult& fit, const DesignMatrix& x,
                                const DesignMatrix* z = nullptr) {
  auto s = zero_summary(y);
  const CountModel model(fit.family, x, z, y);
  s.expected_zero_fraction = model.zero_probabilities(fit.theta()).mean();
  s.family = fit.family;
  return s;
}

inline void write_histogram_csv(const ZeroSummary& s, std::ostream& out) {
  out << "value,count\n";
  for (std::size_t v = 0; v < s.histogram.size(); ++v) out << v << ',' << s.histogram[v] << '\n';
}

}  // namespace countreg
