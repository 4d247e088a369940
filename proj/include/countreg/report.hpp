#pragma once

// Text, JSON and CSV renderings of fits, screens and diagnostics.
// Text rounds IRR and SE to three decimals, e.g. "0.840***(0.039)"; JSON
// carries full precision.

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "countreg/diagnostics.hpp"
#include "countreg/fit.hpp"

namespace countreg {

inline std::string format_fixed(double v, int decimals = 3) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s(buf);
  // Avoid printing "-0.000".
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

/// "IRR<stars>(SE)" with three decimals.
inline std::string format_irr_cell(const IrrRow& row) {
  return format_fixed(row.irr) + row.stars + "(" + format_fixed(row.std_error) + ")";
}

namespace detail {

inline nlohmann::json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace detail

inline nlohmann::json to_json(const IrrRow& r) {
  return {{"label", r.label},
          {"part", std::string(to_string(r.part))},
          {"estimate", r.coefficient},
          {"irr", r.irr},
          {"se", detail::number_or_null(r.std_error)},
          {"z", detail::number_or_null(r.z_value)},
          {"p", detail::number_or_null(r.p_value)},
          {"stars", r.stars}};
}

struct RunContext {
  std::size_t dropped_rows = 0;
  nlohmann::json config;  // echoed resolved configuration
};

inline nlohmann::json fit_to_json(const FitResult& fit, const RunContext& ctx = {}) {
  nlohmann::json j;
  j["family"] = std::string(to_string(fit.family));
  j["n_obs"] = fit.n_obs;
  j["dropped_rows"] = ctx.dropped_rows;
  auto& coefs = j["coefficients"] = nlohmann::json::array();
  for (const auto& row : irr_table(fit, true)) coefs.push_back(to_json(row));
  if (fit.estimates.log_tau) {
    const double se = fit.std_error(fit.layout.tau_index());
    j["tau"] = fit.estimates.tau();
    j["log_tau"] = *fit.estimates.log_tau;
    j["log_tau_se"] = detail::number_or_null(se);
    j["tau_fixed"] = std::find(fit.free_parameters.begin(), fit.free_parameters.end(),
                               fit.layout.tau_index()) == fit.free_parameters.end();
  } else {
    j["tau"] = nullptr;
  }
  j["log_likelihood"] = fit.log_likelihood;
  j["n_params"] = fit.n_free();
  j["aic"] = fit.aic();
  j["converged"] = fit.converged;
  j["iterations"] = fit.n_iterations;
  j["gradient_norm"] = fit.gradient_norm;
  if (!fit.message.empty()) j["message"] = fit.message;

  std::vector<std::string> labels;
  for (auto idx : fit.free_parameters) {
    if (idx < fit.layout.d) {
      labels.push_back("count:" + fit.count_terms[static_cast<std::size_t>(idx)].label);
    } else if (fit.layout.has_gamma() && idx < fit.layout.tau_index()) {
      labels.push_back("zero:" + fit.zero_terms[static_cast<std::size_t>(idx - fit.layout.d)].label);
    } else {
      labels.push_back("log_tau");
    }
  }
  j["covariance_labels"] = labels;
  j["covariance_available"] = fit.covariance_available;
  if (fit.covariance_available) {
    std::vector<double> flat;
    for (Eigen::Index r = 0; r < fit.covariance.rows(); ++r)
      for (Eigen::Index c = 0; c < fit.covariance.cols(); ++c) flat.push_back(fit.covariance(r, c));
    j["covariance"] = flat;
  } else {
    j["covariance"] = nullptr;
    j["covariance_message"] = fit.covariance_message;
  }
  if (!ctx.config.is_null()) j["config"] = ctx.config;
  return j;
}

/// Variable / level / IRR listing in the layout of a published count
/// regression table. ZINB zero-part rows are odds ratios of a structural zero.
inline void write_fit_text(const FitResult& fit, std::ostream& out, const RunContext& ctx = {}) {
  out << "Family: " << to_string(fit.family) << "   n_obs: " << fit.n_obs
      << "   dropped_rows: " << ctx.dropped_rows << '\n';
  const auto rows = irr_table(fit);
  auto section = [&](Part part, const std::string& heading) {
    out << detail::pad("Variable", 24) << detail::pad("Level", 16) << heading << '\n';
    bool any = false;
    std::string last_variable;
    for (const auto& r : rows) {
      if (r.part != part) continue;
      any = true;
      const std::string var = r.variable == last_variable ? "" : r.variable;
      last_variable = r.variable;
      out << detail::pad(var, 24) << detail::pad(r.level, 16) << format_irr_cell(r) << '\n';
    }
    if (!any) out << "(intercept only)\n";
  };
  section(Part::Count, fit.family == Family::ZINB ? "IRR (count part, log link)" : "IRR");
  if (fit.family == Family::ZINB) {
    out << '\n';
    section(Part::Zero, "OR (zero part, logit link)");
  }
  out << "Note: '*' 10%, '**' 5%, '***' 1% significance; (): standard error of coefficient\n";
  if (fit.estimates.log_tau) out << "tau: " << format_fixed(fit.estimates.tau()) << '\n';
  out << "log-likelihood: " << format_fixed(fit.log_likelihood) << "   AIC: " << format_fixed(fit.aic())
      << "   parameters: " << fit.n_free() << '\n';
  char gn[32];
  std::snprintf(gn, sizeof gn, "%.3e", fit.gradient_norm);
  out << "converged: " << (fit.converged ? "yes" : "NO") << "   iterations: " << fit.n_iterations
      << "   gradient_norm: " << gn << '\n';
  if (!fit.converged && !fit.message.empty()) out << "warning: " << fit.message << '\n';
  if (!fit.covariance_available) out << "warning: " << fit.covariance_message << '\n';
}

inline void write_fit_csv(const FitResult& fit, std::ostream& out) {
  out << "label,part,estimate,irr,se,z,p,stars\n";
  for (const auto& r : irr_table(fit, true)) {
    out << detail::csv_escape(r.label) << ',' << to_string(r.part) << ',' << detail::format_real(r.coefficient)
        << ',' << detail::format_real(r.irr) << ',' << detail::format_real(r.std_error) << ','
        << detail::format_real(r.z_value) << ',' << detail::format_real(r.p_value) << ',' << r.stars << '\n';
  }
}

struct ScreenRow {
  std::string variable;
  ContingencyResult result;
};

inline nlohmann::json screen_to_json(std::span<const ScreenRow> rows) {
  auto arr = nlohmann::json::array();
  for (const auto& s : rows) {
    const auto& r = s.result;
    nlohmann::json observed = nlohmann::json::array();
    for (Eigen::Index i = 0; i < r.observed.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(r.observed.cols()));
      for (Eigen::Index c = 0; c < r.observed.cols(); ++c) row[static_cast<std::size_t>(c)] = r.observed(i, c);
      observed.push_back(row);
    }
    arr.push_back({{"variable", s.variable},
                   {"chi2", r.chi2},
                   {"df", r.df},
                   {"p", r.p_value},
                   {"stars", r.stars},
                   {"min_expected", r.min_expected},
                   {"low_expected_warning", r.low_expected_warning},
                   {"continuity_correction", r.continuity_correction},
                   {"row_labels", r.row_labels},
                   {"column_labels", r.column_labels},
                   {"observed", observed}});
  }
  return arr;
}

inline void write_screen_text(std::span<const ScreenRow> rows, std::ostream& out) {
  out << detail::pad("Characteristic", 28) << detail::pad("chi2", 16) << detail::pad("df", 6) << "P-value\n";
  for (const auto& s : rows) {
    out << detail::pad(s.variable, 28) << detail::pad(format_fixed(s.result.chi2) + s.result.stars, 16)
        << detail::pad(std::to_string(s.result.df), 6) << format_fixed(s.result.p_value)
        << (s.result.low_expected_warning ? "   (warning: expected cell < 5)" : "") << '\n';
  }
  out << "Note: '*' 10%, '**' 5%, '***' 1% significance; Pearson chi-square without continuity correction\n";
}

inline void write_cross_table(const ScreenRow& s, std::ostream& out) {
  const auto& r = s.result;
  out << detail::pad(s.variable, 20);
  for (const auto& c : r.column_labels) out << detail::pad(c, 10);
  out << '\n';
  for (Eigen::Index i = 0; i < r.observed.rows(); ++i) {
    out << detail::pad(r.row_labels[static_cast<std::size_t>(i)], 20);
    for (Eigen::Index c = 0; c < r.observed.cols(); ++c)
      out << detail::pad(std::to_string(static_cast<long long>(r.observed(i, c))), 10);
    out << '\n';
  }
}

inline nlohmann::json diagnostics_to_json(const DispersionSummary& d, const ZeroSummary& z) {
  nlohmann::json j;
  j["dispersion"] = {{"mean", d.mean},
                     {"variance", d.variance},
                     {"ratio", d.ratio},
                     {"verdict", std::string(to_string(d.verdict))}};
  j["zeros"] = {{"observed_zero_fraction", z.observed_zero_fraction},
                {"expected_zero_fraction", z.expected_zero_fraction ? nlohmann::json(*z.expected_zero_fraction)
                                                                    : nlohmann::json(nullptr)},
                {"family", z.family ? nlohmann::json(std::string(to_string(*z.family))) : nlohmann::json(nullptr)},
                {"histogram", z.histogram}};
  return j;
}

inline void write_diagnostics_text(const DispersionSummary& d, const ZeroSummary& z, std::ostream& out) {
  out << "mean(Y): " << format_fixed(d.mean) << "   var(Y): " << format_fixed(d.variance)
      << "   var/mean: " << format_fixed(d.ratio) << "   verdict: " << to_string(d.verdict) << '\n';
  out << "observed zero fraction: " << format_fixed(z.observed_zero_fraction, 4) << '\n';
  if (z.expected_zero_fraction)
    out << "expected zero fraction under " << to_string(*z.family) << ": "
        << format_fixed(*z.expected_zero_fraction, 4) << '\n';
  out << "value  count\n";
  for (std::size_t v = 0; v < z.histogram.size(); ++v)
    out << detail::pad(std::to_string(v), 7) << z.histogram[v] << '\n';
}

inline nlohmann::json comparison_to_json(std::span<const ComparisonRow> rows) {
  auto arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"family", std::string(to_string(r.family))},
                   {"log_likelihood", r.log_likelihood},
                   {"n_params", r.n_params},
                   {"aic", r.aic},
                   {"converged", r.converged}});
  return arr;
}

inline void write_comparison_text(std::span<const ComparisonRow> rows, std::ostream& out) {
  out << detail::pad("Rank", 6) << detail::pad("Family", 10) << detail::pad("logLik", 16)
      << detail::pad("k", 5) << detail::pad("AIC", 16) << "converged\n";
  std::size_t rank = 1;
  for (const auto& r : rows)
    out << detail::pad(std::to_string(rank++), 6) << detail::pad(std::string(to_string(r.family)), 10)
        << detail::pad(format_fixed(r.log_likelihood), 16) << detail::pad(std::to_string(r.n_params), 5)
        << detail::pad(format_fixed(r.aic), 16) << (r.converged ? "yes" : "NO") << '\n';
}

}  // namespace countreg
