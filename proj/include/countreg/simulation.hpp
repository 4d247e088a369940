#pragma once

// Synthetic datasets from fully specified Poisson / NB / ZINB regressions.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "countreg/dataset.hpp"
#include "countreg/design.hpp"
#include "countreg/distributions.hpp"
#include "countreg/errors.hpp"

namespace countreg {

struct CovariateSpec {
  enum class Kind { Categorical, Numeric };

  std::string name;
  Kind kind = Kind::Numeric;
  // Categorical: levels in reference order (first is the reference) and
  // their probabilities.
  std::vector<std::string> levels;
  std::vector<double> probabilities;
  // Numeric: uniform on [lower, upper]; integer draws when `integer`.
  double lower = 0.0;
  double upper = 1.0;
  bool integer = false;
};

struct SimConfig {
  std::size_t n_rows = 1000;
  Family family = Family::NB;
  std::string response = "y";
  std::vector<CovariateSpec> covariates;
  /// Covariates entering the ZINB zero part; the count part uses all.
  std::vector<std::string> zero_covariates;
  std::map<std::string, double> true_beta;   // keyed by design label
  std::map<std::string, double> true_gamma;  // ZINB only
  double true_tau = 1.0;
  std::uint64_t seed = 1;
};

namespace detail {

inline std::vector<std::string> design_labels(const std::vector<CovariateSpec>& covs,
                                              const std::vector<std::string>& names) {
  std::vector<std::string> labels{std::string(kInterceptLabel)};
  for (const auto& name : names) {
    const auto it = std::find_if(covs.begin(), covs.end(), [&](const CovariateSpec& c) { return c.name == name; });
    if (it == covs.end()) throw ConfigError("zero-part covariate '" + name + "' is not a declared covariate");
    if (it->kind == CovariateSpec::Kind::Categorical) {
      for (std::size_t l = 1; l < it->levels.size(); ++l) labels.push_back(name + "=" + it->levels[l]);
    } else {
      labels.push_back(name);
    }
  }
  return labels;
}

inline std::vector<std::string> covariate_names(const SimConfig& cfg) {
  std::vector<std::string> names;
  for (const auto& c : cfg.covariates) names.push_back(c.name);
  return names;
}

inline void check_keys(const std::map<std::string, double>& coef, const std::vector<std::string>& labels,
                       const std::string& what) {
  std::set<std::string> want(labels.begin(), labels.end());
  std::set<std::string> have;
  for (const auto& [k, v] : coef) {
    if (!std::isfinite(v)) throw ConfigError(what + " coefficient '" + k + "' is not finite");
    have.insert(k);
  }
  if (want != have) {
    std::string msg = what + " keys must match the design columns:";
    for (const auto& l : labels) msg += " " + l;
    throw ConfigError(msg);
  }
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Count-part design labels implied by the config.
inline std::vector<std::string> count_design_labels(const SimConfig& cfg) {
  return detail::design_labels(cfg.covariates, detail::covariate_names(cfg));
}

inline std::vector<std::string> zero_design_labels(const SimConfig& cfg) {
  return detail::design_labels(cfg.covariates, cfg.zero_covariates);
}

inline void validate(const SimConfig& cfg) {
  if (cfg.n_rows == 0) throw ConfigError("n_rows must be positive");
  if (cfg.response.empty()) throw ConfigError("response name is empty");
  std::set<std::string> names{cfg.response};
  for (const auto& c : cfg.covariates) {
    if (!names.insert(c.name).second) throw ConfigError("duplicate column name '" + c.name + "'");
    if (c.kind == CovariateSpec::Kind::Categorical) {
      if (c.levels.size() < 2) throw ConfigError("categorical '" + c.name + "' needs at least two levels");
      if (c.probabilities.size() != c.levels.size())
        throw ConfigError("categorical '" + c.name + "' needs one probability per level");
      double total = 0.0;
      for (double p : c.probabilities) {
        if (!(p >= 0.0)) throw ConfigError("negative level probability in '" + c.name + "'");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-9) throw ConfigError("level probabilities of '" + c.name + "' must sum to 1");
    } else if (!(std::isfinite(c.lower) && std::isfinite(c.upper) && c.lower < c.upper)) {
      throw ConfigError("numeric '" + c.name + "' needs finite bounds lower < upper");
    }
  }
  detail::check_keys(cfg.true_beta, count_design_labels(cfg), "true_beta");
  if (cfg.family == Family::ZINB) {
    detail::check_keys(cfg.true_gamma, zero_design_labels(cfg), "true_gamma");
  } else if (!cfg.true_gamma.empty() || !cfg.zero_covariates.empty()) {
    throw ConfigError("zero-part settings are only valid for the zinb family");
  }
  if (cfg.family != Family::Poisson && !(std::isfinite(cfg.true_tau) && cfg.true_tau > kMinTau))
    throw ConfigError("true_tau must be finite and positive");
}

/// Draws a dataset: the response column first, then the covariates in
/// declaration order. Row i uses its own generator seeded from (seed, i), so
/// the output does not depend on generation order.
inline Dataset simulate(const SimConfig& cfg) {
  validate(cfg);
  const auto n = cfg.n_rows;
  const std::set<std::string> zero_set(cfg.zero_covariates.begin(), cfg.zero_covariates.end());

  std::vector<std::vector<std::size_t>> codes(cfg.covariates.size(), std::vector<std::size_t>(n));
  std::vector<std::vector<double>> numbers(cfg.covariates.size(), std::vector<double>(n));
  std::vector<Count> y(n);

  const std::uint64_t base = detail::splitmix64(cfg.seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(detail::splitmix64(base ^ detail::splitmix64(static_cast<std::uint64_t>(i))));
    double eta = cfg.true_beta.at(std::string(kInterceptLabel));
    double zeta = cfg.family == Family::ZINB ? cfg.true_gamma.at(std::string(kInterceptLabel)) : 0.0;
    for (std::size_t k = 0; k < cfg.covariates.size(); ++k) {
      const auto& c = cfg.covariates[k];
      const bool in_zero = zero_set.count(c.name) > 0;
      if (c.kind == CovariateSpec::Kind::Categorical) {
        const auto code = std::discrete_distribution<std::size_t>(c.probabilities.begin(), c.probabilities.end())(rng);
        codes[k][i] = code;
        if (code > 0) {
          const auto label = c.name + "=" + c.levels[code];
          eta += cfg.true_beta.at(label);
          if (in_zero) zeta += cfg.true_gamma.at(label);
        }
      } else {
        double v;
        if (c.integer) {
          v = static_cast<double>(std::uniform_int_distribution<long long>(
              static_cast<long long>(std::ceil(c.lower)), static_cast<long long>(std::floor(c.upper)))(rng));
        } else {
          v = std::uniform_real_distribution<double>(c.lower, c.upper)(rng);
        }
        numbers[k][i] = v;
        eta += cfg.true_beta.at(c.name) * v;
        if (in_zero) zeta += cfg.true_gamma.at(c.name) * v;
      }
    }
    if (!(std::abs(eta) <= 50.0))
      throw ConfigError("linear predictor " + std::to_string(eta) + " at row " + std::to_string(i) +
                        " exceeds |x'beta| <= 50");
    const double lambda = std::exp(eta);
    try {
      switch (cfg.family) {
        case Family::Poisson: y[i] = draw_poisson(lambda, rng); break;
        case Family::NB: y[i] = draw_nb(NbParams(lambda, cfg.true_tau), rng); break;
        case Family::ZINB: {
          const double p = detail::logistic(zeta);
          // p rounds to 1 only for zeta > ~37; treat as a certain structural zero.
          y[i] = p >= 1.0 ? 0 : draw_zinb(ZinbParams(NbParams(lambda, cfg.true_tau), p), rng);
          break;
        }
      }
    } catch (const DomainError& e) {
      throw ConfigError(std::string(e.what()) + " at row " + std::to_string(i));
    }
  }

  std::vector<Column> columns;
  columns.push_back({cfg.response, CountColumn{std::move(y)}});
  for (std::size_t k = 0; k < cfg.covariates.size(); ++k) {
    const auto& c = cfg.covariates[k];
    if (c.kind == CovariateSpec::Kind::Categorical)
      columns.push_back({c.name, CategoricalColumn{c.levels, std::move(codes[k])}});
    else
      columns.push_back({c.name, NumericColumn{std::move(numbers[k])}});
  }
  return Dataset(std::move(columns));
}

/// Intercept-only NB whose marginal moments are mean 0.701 and variance 1.003
/// in expectation; tau solves lambda + lambda^2 / tau = 1.003 at lambda = 0.701.
inline SimConfig paper_like_preset() {
  constexpr double mean = 0.701;
  constexpr double variance = 1.003;
  SimConfig cfg;
  cfg.n_rows = 100000;
  cfg.family = Family::NB;
  cfg.response = "y";
  cfg.true_beta = {{std::string(kInterceptLabel), std::log(mean)}};
  cfg.true_tau = mean * mean / (variance - mean);
  cfg.seed = 2019;
  return cfg;
}

// JSON mapping of SimConfig, also used for the truth sidecar.

inline void to_json(nlohmann::json& j, const CovariateSpec& c) {
  j = nlohmann::json{{"name", c.name}};
  if (c.kind == CovariateSpec::Kind::Categorical) {
    j["kind"] = "categorical";
    j["levels"] = c.levels;
    j["probabilities"] = c.probabilities;
  } else {
    j["kind"] = "numeric";
    j["lower"] = c.lower;
    j["upper"] = c.upper;
    j["integer"] = c.integer;
  }
}

inline void from_json(const nlohmann::json& j, CovariateSpec& c) {
  c.name = j.at("name").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "categorical") {
    c.kind = CovariateSpec::Kind::Categorical;
    c.levels = j.at("levels").get<std::vector<std::string>>();
    c.probabilities = j.at("probabilities").get<std::vector<double>>();
  } else if (kind == "numeric") {
    c.kind = CovariateSpec::Kind::Numeric;
    c.lower = j.value("lower", 0.0);
    c.upper = j.value("upper", 1.0);
    c.integer = j.value("integer", false);
  } else {
    throw ConfigError("covariate kind must be 'categorical' or 'numeric', got '" + kind + "'");
  }
}

inline void to_json(nlohmann::json& j, const SimConfig& cfg) {
  j = nlohmann::json{{"n_rows", cfg.n_rows},
                     {"family", std::string(to_string(cfg.family))},
                     {"response", cfg.response},
                     {"covariates", cfg.covariates},
                     {"zero_covariates", cfg.zero_covariates},
                     {"true_beta", cfg.true_beta},
                     {"true_gamma", cfg.true_gamma},
                     {"true_tau", cfg.true_tau},
                     {"seed", cfg.seed}};
}

inline void from_json(const nlohmann::json& j, SimConfig& cfg) {
  cfg.n_rows = j.at("n_rows").get<std::size_t>();
  cfg.family = parse_family(j.at("family").get<std::string>());
  cfg.response = j.value("response", std::string("y"));
  cfg.covariates = j.value("covariates", std::vector<CovariateSpec>{});
  cfg.zero_covariates = j.value("zero_covariates", std::vector<std::string>{});
  cfg.true_beta = j.at("true_beta").get<std::map<std::string, double>>();
  cfg.true_gamma = j.value("true_gamma", std::map<std::string, double>{});
  cfg.true_tau = j.value("true_tau", 1.0);
  cfg.seed = j.value("seed", std::uint64_t{1});
}

inline SimConfig load_sim_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in).get<SimConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid simulation config '" + path + "': " + e.what());
  }
}

/// Truth record written next to a simulated CSV.
inline nlohmann::json truth_sidecar(const SimConfig& cfg, const Dataset& ds) {
  nlohmann::json j;
  j["config"] = cfg;
  j["schema"] = ds.schema().to_string();
  j["count_design"] = count_design_labels(cfg);
  if (cfg.family == Family::ZINB) j["zero_design"] = zero_design_labels(cfg);
  return j;
}

/// Writes `csv_path` and `csv_path + ".truth.json"`.
inline void write_simulation(const SimConfig& cfg, const Dataset& ds, const std::string& csv_path) {
  save_csv(ds, csv_path);
  std::ofstream out(csv_path + ".truth.json", std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + csv_path + ".truth.json'");
  out << truth_sidecar(cfg, ds).dump(2) << '\n';
}

}  // namespace countreg
