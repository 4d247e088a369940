#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "countreg/dataset.hpp"
#include "countreg/errors.hpp"

namespace countreg {

inline constexpr std::string_view kInterceptLabel = "(Intercept)";

enum class Family { Poisson, NB, ZINB };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::Poisson: return "poisson";
    case Family::NB: return "nb";
    case Family::ZINB: return "zinb";
  }
  return "?";
}

inline Family parse_family(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "poisson") return Family::Poisson;
  if (lower == "nb" || lower == "negbin") return Family::NB;
  if (lower == "zinb") return Family::ZINB;
  throw ConfigError("unknown family '" + std::string(s) + "' (expected poisson, nb or zinb)");
}

struct ModelSpec {
  Family family = Family::NB;
  std::string response;
  std::vector<std::string> count_covariates;
  std::vector<std::string> zero_covariates;
  std::map<std::string, std::string> reference_levels;
};

/// Throws SchemaError/ConfigError if the spec does not fit the dataset.
inline void validate(const ModelSpec& spec, const Dataset& ds) {
  if (ds.column(spec.response).kind() != ColumnKind::Count)
    throw SchemaError("response '" + spec.response + "' must be a count column");
  if (spec.family != Family::ZINB && !spec.zero_covariates.empty())
    throw ConfigError("zero-part covariates are only allowed for the zinb family");
  for (const auto& [name, level] : spec.reference_levels) {
    const auto& col = ds.column(name);
    const auto* cat = std::get_if<CategoricalColumn>(&col.data);
    if (!cat) throw SchemaError("reference level given for non-categorical column '" + name + "'");
    if (std::find(cat->levels.begin(), cat->levels.end(), level) == cat->levels.end())
      throw SchemaError("reference level '" + level + "' is not in the vocabulary of '" + name + "'");
  }
  auto check = [&](const std::vector<std::string>& covs) {
    std::set<std::string> seen;
    for (const auto& c : covs) {
      if (c == spec.response) throw ConfigError("response '" + c + "' used as a covariate");
      if (!seen.insert(c).second) throw ConfigError("covariate '" + c + "' listed twice");
      ds.column(c);
    }
  };
  check(spec.count_covariates);
  check(spec.zero_covariates);
}

/// Intercept-first design matrix with dummy-coded categoricals.
struct DesignMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> labels;     // "(Intercept)", "var=level" or "var"
  std::vector<std::string> variables;  // source column per design column
  std::vector<std::string> levels;     // level per design column, empty if numeric

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

/// Builds the design for `covariates` in declaration order. A categorical with
/// k levels contributes k-1 indicator columns; its reference defaults to the
/// first vocabulary level. Count and numeric columns pass through unchanged.
inline DesignMatrix build_design(const Dataset& ds, const std::vector<std::string>& covariates,
                                 const std::map<std::string, std::string>& reference_levels = {}) {
  const auto n = static_cast<Eigen::Index>(ds.n_rows());
  DesignMatrix dm;

  struct Block {
    const Column* column;
    std::size_t reference = 0;
  };
  std::vector<Block> blocks;
  Eigen::Index width = 1;
  for (const auto& name : covariates) {
    const auto& col = ds.column(name);
    Block b{&col};
    if (const auto* cat = std::get_if<CategoricalColumn>(&col.data)) {
      if (auto it = reference_levels.find(name); it != reference_levels.end()) {
        const auto pos = std::find(cat->levels.begin(), cat->levels.end(), it->second);
        if (pos == cat->levels.end())
          throw SchemaError("reference level '" + it->second + "' is not in the vocabulary of '" +
                            name + "'");
        b.reference = static_cast<std::size_t>(pos - cat->levels.begin());
      }
      std::vector<std::size_t> freq(cat->levels.size(), 0);
      for (auto code : cat->codes) ++freq[code];
      if (cat->levels.size() < 2)
        throw DegenerateCovariateError("covariate '" + name + "' has a single level");
      for (std::size_t l = 0; l < freq.size(); ++l)
        if (freq[l] == 0)
          throw DegenerateCovariateError("level '" + cat->levels[l] + "' of covariate '" + name +
                                         "' is not observed; its dummy block would be degenerate");
      width += static_cast<Eigen::Index>(cat->levels.size()) - 1;
    } else {
      width += 1;
    }
    blocks.push_back(b);
  }

  dm.values.setZero(n, width);
  dm.values.col(0).setOnes();
  dm.labels.emplace_back(kInterceptLabel);
  dm.variables.emplace_back(kInterceptLabel);
  dm.levels.emplace_back();

  Eigen::Index j = 1;
  for (const auto& b : blocks) {
    const auto& col = *b.column;
    if (const auto* cat = std::get_if<CategoricalColumn>(&col.data)) {
      std::vector<Eigen::Index> target(cat->levels.size(), -1);
      for (std::size_t l = 0; l < cat->levels.size(); ++l) {
        if (l == b.reference) continue;
        target[l] = j++;
        dm.labels.push_back(col.name + "=" + cat->levels[l]);
        dm.variables.push_back(col.name);
        dm.levels.push_back(cat->levels[l]);
      }
      for (Eigen::Index r = 0; r < n; ++r) {
        const auto t = target[cat->codes[static_cast<std::size_t>(r)]];
        if (t >= 0) dm.values(r, t) = 1.0;
      }
    } else {
      bool constant = true;
      if (const auto* cnt = std::get_if<CountColumn>(&col.data)) {
        for (Eigen::Index r = 0; r < n; ++r) {
          dm.values(r, j) = static_cast<double>(cnt->values[static_cast<std::size_t>(r)]);
          constant = constant && dm.values(r, j) == dm.values(0, j);
        }
      } else {
        const auto& num = std::get<NumericColumn>(col.data);
        for (Eigen::Index r = 0; r < n; ++r) {
          dm.values(r, j) = num.values[static_cast<std::size_t>(r)];
          constant = constant && dm.values(r, j) == dm.values(0, j);
        }
      }
      if (constant && n > 0)
        throw DegenerateCovariateError("covariate '" + col.name + "' takes a single value");
      dm.labels.push_back(col.name);
      dm.variables.push_back(col.name);
      dm.levels.emplace_back();
      ++j;
    }
  }
  return dm;
}

}  // namespace countreg
