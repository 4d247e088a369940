#pragma once

// The `countreg` command line: fit, screen, diagnose, simulate, compare.
//
// Exit status: 0 success, 1 error, 2 usage error, 3 fit did not converge
// (the report is still written and flagged).

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "countreg/dataset.hpp"
#include "countreg/design.hpp"
#include "countreg/diagnostics.hpp"
#include "countreg/fit.hpp"
#include "countreg/report.hpp"
#include "countreg/simulation.hpp"

namespace countreg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNotConverged = 3;

struct RunConfig {
  std::string subcommand;
  std::string input;
  std::string schema;
  std::string preset;
  std::string sim_config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_rows;
  std::string family = "nb";
  std::vector<std::string> families{"poisson", "nb", "zinb"};
  std::string response;
  std::vector<std::string> covariates;
  std::vector<std::string> zero_covariates;
  std::vector<std::string> refs;
  std::string out;
  std::string histogram;
  std::string format = "text";
  int max_iterations = 500;

  nlohmann::json to_json() const {
    nlohmann::json j{{"subcommand", subcommand}, {"format", format}};
    if (!input.empty()) j["input"] = input;
    if (!schema.empty()) j["schema"] = schema;
    if (!preset.empty()) j["preset"] = preset;
    if (!sim_config.empty()) j["sim_config"] = sim_config;
    if (seed) j["seed"] = *seed;
    if (n_rows) j["n"] = *n_rows;
    if (!response.empty()) j["response"] = response;
    if (subcommand == "fit" || (subcommand == "diagnose" && !family.empty())) j["family"] = family;
    if (subcommand == "compare") j["families"] = families;
    if (subcommand != "simulate") {
      j["covariates"] = covariates;
      j["zero_covariates"] = zero_covariates;
      j["ref"] = refs;
      j["max_iterations"] = max_iterations;
    }
    if (!out.empty()) j["out"] = out;
    if (!histogram.empty()) j["histogram"] = histogram;
    return j;
  }
};

namespace detail {

inline std::string resolve_schema_text(const std::string& value) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_regular_file(value, ec)) return value;
  std::ifstream in(value);
  if (value.size() >= 5 && value.substr(value.size() - 5) == ".json") {
    const auto j = nlohmann::json::parse(in);
    if (!j.contains("schema")) throw SchemaError("'" + value + "' has no \"schema\" field");
    return j.at("schema").get<std::string>();
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return std::string(countreg::detail::trim(ss.str()));
}

inline SimConfig preset_config(const RunConfig& rc) {
  if (rc.preset != "paper-like") throw ConfigError("unknown preset '" + rc.preset + "' (expected paper-like)");
  auto cfg = paper_like_preset();
  if (rc.seed) cfg.seed = *rc.seed;
  if (rc.n_rows) cfg.n_rows = *rc.n_rows;
  return cfg;
}

inline LoadedData load_data(RunConfig& rc) {
  if (!rc.preset.empty()) {
    if (!rc.input.empty()) throw ConfigError("--input and --preset are mutually exclusive");
    const auto cfg = preset_config(rc);
    if (rc.response.empty()) rc.response = cfg.response;
    return {simulate(cfg), 0};
  }
  if (rc.input.empty()) throw ConfigError("either --input (with --schema) or --preset is required");
  if (rc.schema.empty()) throw ConfigError("--schema is required with --input");
  return load_csv(rc.input, Schema::parse(resolve_schema_text(rc.schema)));
}

inline std::map<std::string, std::string> parse_refs(const std::vector<std::string>& refs) {
  std::map<std::string, std::string> out;
  for (const auto& r : refs) {
    const auto eq = r.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == r.size())
      throw ConfigError("--ref expects <column=level>, got '" + r + "'");
    out[r.substr(0, eq)] = r.substr(eq + 1);
  }
  return out;
}

inline ModelSpec model_spec(const RunConfig& rc, Family family) {
  ModelSpec spec;
  spec.family = family;
  spec.response = rc.response;
  spec.count_covariates = rc.covariates;
  if (family == Family::ZINB) spec.zero_covariates = rc.zero_covariates;
  spec.reference_levels = parse_refs(rc.refs);
  return spec;
}

inline FitOptions fit_options(const RunConfig& rc) {
  FitOptions opts;
  opts.optimizer.max_iterations = rc.max_iterations;
  return opts;
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << j.dump(2) << '\n';
}

inline void echo_config(const RunConfig& rc, std::ostream& out) {
  out << "# countreg " << rc.subcommand << ' ' << rc.to_json().dump() << '\n';
}

inline int cmd_fit(RunConfig& rc, std::ostream& out) {
  auto data = load_data(rc);
  if (rc.response.empty()) throw ConfigError("--response is required");
  const auto family = parse_family(rc.family);
  if (family != Family::ZINB && !rc.zero_covariates.empty())
    throw ConfigError("--zero-covariates is only valid with --family zinb");
  const auto result = fit(model_spec(rc, family), data.dataset, fit_options(rc));
  const RunContext ctx{data.dropped_rows, rc.to_json()};
  const auto report = fit_to_json(result, ctx);
  if (!rc.out.empty()) write_json_file(report, rc.out);
  if (rc.format == "json") {
    out << report.dump(2) << '\n';
  } else if (rc.format == "csv") {
    write_fit_csv(result, out);
  } else {
    echo_config(rc, out);
    write_fit_text(result, out, ctx);
  }
  return result.converged ? kExitOk : kExitNotConverged;
}

inline int cmd_screen(RunConfig& rc, std::ostream& out) {
  auto data = load_data(rc);
  if (rc.response.empty()) throw ConfigError("--response is required");
  auto covs = rc.covariates;
  if (covs.empty())
    for (const auto& c : data.dataset.columns())
      if (c.name != rc.response && c.kind() != ColumnKind::Numeric) covs.push_back(c.name);
  if (covs.empty()) throw ConfigError("no categorical or count covariates to screen");
  std::vector<ScreenRow> rows;
  for (const auto& c : covs) rows.push_back({c, chi_square_independence(data.dataset, c, rc.response)});

  nlohmann::json report{{"screen", screen_to_json(rows)},
                        {"n_obs", data.dataset.n_rows()},
                        {"dropped_rows", data.dropped_rows},
                        {"config", rc.to_json()}};
  if (!rc.out.empty()) write_json_file(report, rc.out);
  if (rc.format == "json") {
    out << report.dump(2) << '\n';
  } else if (rc.format == "csv") {
    out << "variable,chi2,df,p,stars,min_expected\n";
    for (const auto& r : rows)
      out << countreg::detail::csv_escape(r.variable) << ',' << countreg::detail::format_real(r.result.chi2) << ','
          << r.result.df << ',' << countreg::detail::format_real(r.result.p_value) << ',' << r.result.stars << ','
          << countreg::detail::format_real(r.result.min_expected) << '\n';
  } else {
    echo_config(rc, out);
    write_screen_text(rows, out);
    out << '\n';
    for (const auto& r : rows) {
      write_cross_table(r, out);
      out << '\n';
    }
  }
  return kExitOk;
}

inline int cmd_diagnose(RunConfig& rc, std::ostream& out, bool family_given) {
  auto data = load_data(rc);
  if (rc.response.empty()) throw ConfigError("--response is required");
  const auto y = data.dataset.counts(rc.response);
  const auto disp = dispersion_summary(y);
  ZeroSummary zeros;
  int status = kExitOk;
  if (family_given) {
    const auto family = parse_family(rc.family);
    const auto spec = model_spec(rc, family);
    const auto result = fit(spec, data.dataset, fit_options(rc));
    const auto x = build_design(data.dataset, spec.count_covariates, spec.reference_levels);
    std::optional<DesignMatrix> z;
    if (family == Family::ZINB) z = build_design(data.dataset, spec.zero_covariates, spec.reference_levels);
    zeros = zero_summary(y, result, x, z ? &*z : nullptr);
    if (!result.converged) status = kExitNotConverged;
  } else {
    rc.family.clear();
    zeros = zero_summary(y);
  }
  if (!rc.histogram.empty()) {
    std::ofstream h(rc.histogram, std::ios::binary);
    if (!h) throw ConfigError("cannot write '" + rc.histogram + "'");
    write_histogram_csv(zeros, h);
  }
  auto report = diagnostics_to_json(disp, zeros);
  report["n_obs"] = data.dataset.n_rows();
  report["dropped_rows"] = data.dropped_rows;
  report["config"] = rc.to_json();
  if (!rc.out.empty()) write_json_file(report, rc.out);
  if (rc.format == "json") {
    out << report.dump(2) << '\n';
  } else if (rc.format == "csv") {
    write_histogram_csv(zeros, out);
  } else {
    echo_config(rc, out);
    write_diagnostics_text(disp, zeros, out);
  }
  return status;
}

inline int cmd_compare(RunConfig& rc, std::ostream& out) {
  auto data = load_data(rc);
  if (rc.response.empty()) throw ConfigError("--response is required");
  std::vector<FitResult> fits;
  for (const auto& f : rc.families) fits.push_back(fit(model_spec(rc, parse_family(f)), data.dataset, fit_options(rc)));
  const auto ranking = compare_models(fits);
  nlohmann::json report{{"ranking", comparison_to_json(ranking)},
                        {"n_obs", data.dataset.n_rows()},
                        {"dropped_rows", data.dropped_rows},
                        {"config", rc.to_json()}};
  if (!rc.out.empty()) write_json_file(report, rc.out);
  if (rc.format == "json") {
    out << report.dump(2) << '\n';
  } else if (rc.format == "csv") {
    out << "rank,family,log_likelihood,n_params,aic,converged\n";
    std::size_t rank = 1;
    for (const auto& r : ranking)
      out << rank++ << ',' << to_string(r.family) << ',' << countreg::detail::format_real(r.log_likelihood) << ','
          << r.n_params << ',' << countreg::detail::format_real(r.aic) << ',' << (r.converged ? "true" : "false")
          << '\n';
  } else {
    echo_config(rc, out);
    write_comparison_text(ranking, out);
  }
  for (const auto& f : fits)
    if (!f.converged) return kExitNotConverged;
  return kExitOk;
}

inline int cmd_simulate(RunConfig& rc, std::ostream& out) {
  SimConfig cfg;
  if (!rc.preset.empty() && !rc.sim_config.empty())
    throw ConfigError("--preset and --config are mutually exclusive");
  if (!rc.preset.empty()) {
    cfg = preset_config(rc);
  } else if (!rc.sim_config.empty()) {
    cfg = load_sim_config(rc.sim_config);
    if (rc.seed) cfg.seed = *rc.seed;
    if (rc.n_rows) cfg.n_rows = *rc.n_rows;
  } else {
    throw ConfigError("simulate needs --preset paper-like or --config <file.json>");
  }
  if (rc.out.empty()) throw ConfigError("simulate needs --out <file.csv>");
  const auto ds = simulate(cfg);
  write_simulation(cfg, ds, rc.out);
  const auto report = truth_sidecar(cfg, ds);
  if (rc.format == "json") {
    out << report.dump(2) << '\n';
  } else {
    echo_config(rc, out);
    out << "wrote " << ds.n_rows() << " rows to " << rc.out << " (truth: " << rc.out << ".truth.json)\n";
    out << "schema: " << report.at("schema").get<std::string>() << '\n';
  }
  return kExitOk;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Poisson, negative binomial and zero-inflated negative binomial count regression"};
  app.require_subcommand(1, 1);
  RunConfig rc;

  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--input", rc.input, "CSV file with a header row");
    sub->add_option("--schema", rc.schema,
                    "column types, e.g. y:count,wealth:categorical[poor|middle|rich],births:numeric; "
                    "or a file holding that text (a .json file is read for its \"schema\" field)");
    sub->add_option("--preset", rc.preset, "use simulated data from a shipped preset instead of --input")
        ->check(CLI::IsMember({"paper-like"}));
    sub->add_option("--seed", rc.seed, "seed for preset data");
    sub->add_option("--n", rc.n_rows, "number of rows for preset data");
    sub->add_option("--out", rc.out, "also write the JSON report here");
    sub->add_option("--format", rc.format, "stdout format")->check(CLI::IsMember({"text", "json", "csv"}));
  };
  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--response", rc.response, "count response column");
    sub->add_option("--covariates", rc.covariates, "count-part covariates (comma separated)")->delimiter(',');
    sub->add_option("--ref", rc.refs, "reference level as <column=level> (repeatable)");
    sub->add_option("--max-iter", rc.max_iterations, "optimizer iteration cap")->check(CLI::PositiveNumber);
  };

  auto* fit_cmd = app.add_subcommand("fit", "fit a count regression and print an IRR table");
  add_data(fit_cmd);
  add_model(fit_cmd);
  fit_cmd->add_option("--family", rc.family, "poisson, nb or zinb")
      ->check(CLI::IsMember({"poisson", "nb", "zinb"}))
      ->required();
  fit_cmd->add_option("--zero-covariates", rc.zero_covariates, "ZINB zero-part covariates (default: intercept only)")
      ->delimiter(',');

  auto* screen_cmd = app.add_subcommand("screen", "chi-square screening of covariates against the response");
  add_data(screen_cmd);
  screen_cmd->add_option("--response", rc.response, "count response column");
  screen_cmd->add_option("--covariates", rc.covariates, "columns to screen (default: all non-numeric)")
      ->delimiter(',');

  auto* diag_cmd = app.add_subcommand("diagnose", "dispersion and zero-inflation summaries");
  add_data(diag_cmd);
  add_model(diag_cmd);
  auto* diag_family = diag_cmd->add_option("--family", rc.family, "fit this family to get the expected zero fraction")
                          ->check(CLI::IsMember({"poisson", "nb", "zinb"}));
  diag_cmd->add_option("--zero-covariates", rc.zero_covariates, "ZINB zero-part covariates")->delimiter(',');
  diag_cmd->add_option("--histogram", rc.histogram, "write the response histogram as value,count CSV");

  auto* cmp_cmd = app.add_subcommand("compare", "rank families by AIC");
  add_data(cmp_cmd);
  add_model(cmp_cmd);
  cmp_cmd->add_option("--families", rc.families, "families to compare")
      ->delimiter(',')
      ->check(CLI::IsMember({"poisson", "nb", "zinb"}));
  cmp_cmd->add_option("--zero-covariates", rc.zero_covariates, "ZINB zero-part covariates")->delimiter(',');

  auto* sim_cmd = app.add_subcommand("simulate", "write a simulated dataset and its truth sidecar");
  sim_cmd->add_option("--preset", rc.preset, "shipped configuration")->check(CLI::IsMember({"paper-like"}));
  sim_cmd->add_option("--config", rc.sim_config, "simulation config JSON");
  sim_cmd->add_option("--seed", rc.seed, "override the config seed");
  sim_cmd->add_option("--n", rc.n_rows, "override the number of rows");
  sim_cmd->add_option("--out", rc.out, "output CSV path")->required();
  sim_cmd->add_option("--format", rc.format, "stdout format")->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (fit_cmd->parsed()) {
      rc.subcommand = "fit";
      return detail::cmd_fit(rc, out);
    }
    if (screen_cmd->parsed()) {
      rc.subcommand = "screen";
      return detail::cmd_screen(rc, out);
    }
    if (diag_cmd->parsed()) {
      rc.subcommand = "diagnose";
      return detail::cmd_diagnose(rc, out, diag_family->count() > 0);
    }
    if (cmp_cmd->parsed()) {
      rc.subcommand = "compare";
      return detail::cmd_compare(rc, out);
    }
    rc.subcommand = "simulate";
    return detail::cmd_simulate(rc, out);
  } catch (const std::exception& e) {
    err << "countreg " << rc.subcommand << ": error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace countreg::cli
