#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "countreg/cli.hpp"

using namespace countreg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "countreg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// A small survey-like CSV with a categorical covariate, a count covariate,
// a numeric covariate and one row with a missing value.
struct Fixture {
  fs::path dir = fs::temp_directory_path() / "countreg_test_cli";
  fs::path csv = dir / "survey.csv";
  std::string schema = "y:count,wealth:categorical[poor|middle|rich],parity:count,age:numeric";

  Fixture() {
    fs::create_directories(dir);
    SimConfig cfg;
    cfg.n_rows = 1500;
    cfg.family = Family::NB;
    CovariateSpec wealth;
    wealth.name = "wealth";
    wealth.kind = CovariateSpec::Kind::Categorical;
    wealth.levels = {"poor", "middle", "rich"};
    wealth.probabilities = {0.4, 0.35, 0.25};
    CovariateSpec parity;
    parity.name = "parity";
    parity.lower = 0;
    parity.upper = 3;
    parity.integer = true;
    CovariateSpec age;
    age.name = "age";
    age.lower = 20;
    age.upper = 45;
    cfg.covariates = {wealth, parity, age};
    cfg.true_beta = {{"(Intercept)", -0.2}, {"wealth=middle", -0.3}, {"wealth=rich", -0.6},
                     {"parity", 0.2}, {"age", 0.01}};
    cfg.true_tau = 1.5;
    cfg.seed = 17;
    std::ostringstream body;
    write_csv(simulate(cfg), body);
    auto text = body.str();
    // Blank out one response value to exercise listwise deletion.
    const auto second_line = text.find('\n') + 1;
    text.erase(second_line, text.find(',', second_line) - second_line);
    std::ofstream(csv, std::ios::binary) << text;
  }
  ~Fixture() { fs::remove_all(dir); }

  std::vector<std::string> data_args() const {
    return {"--input", csv.string(), "--schema", schema, "--response", "y"};
  }
};

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("fit prints an IRR table and agrees with its JSON report", "[cli]") {
  Fixture fx;
  const auto text = run_cli(std::vector<std::string>{"fit", "--family", "nb", "--covariates", "wealth,parity,age"} +
                            fx.data_args());
  REQUIRE(text.code == cli::kExitOk);
  CHECK(text.out.rfind("# countreg fit {", 0) == 0);
  CHECK(text.out.find("dropped_rows: 1") != std::string::npos);
  CHECK(text.out.find("wealth") != std::string::npos);
  CHECK(text.out.find("(Intercept)") == std::string::npos);

  const auto js = run_cli(std::vector<std::string>{"fit", "--family", "nb", "--covariates", "wealth,parity,age",
                                                   "--format", "json"} + fx.data_args());
  REQUIRE(js.code == cli::kExitOk);
  const auto report = nlohmann::json::parse(js.out);
  CHECK(report.at("n_obs") == 1499);
  CHECK(report.at("dropped_rows") == 1);
  CHECK(report.at("converged") == true);
  CHECK(report.at("config").at("family") == "nb");
  for (const auto& c : report.at("coefficients")) {
    if (c.at("label") == "(Intercept)") continue;
    const auto cell = format_fixed(c.at("irr").get<double>()) + c.at("stars").get<std::string>() + "(" +
                      format_fixed(c.at("se").get<double>()) + ")";
    INFO(c.at("label"));
    CHECK(text.out.find(cell) != std::string::npos);
  }
  // Same inputs, byte-identical report.
  const auto again = run_cli(std::vector<std::string>{"fit", "--family", "nb", "--covariates", "wealth,parity,age",
                                                      "--format", "json"} + fx.data_args());
  CHECK(again.out == js.out);
}

TEST_CASE("fit --ref changes the reference level", "[cli]") {
  Fixture fx;
  const auto r = run_cli(std::vector<std::string>{"fit", "--family", "poisson", "--covariates", "wealth",
                                                  "--ref", "wealth=rich", "--format", "json"} + fx.data_args());
  REQUIRE(r.code == cli::kExitOk);
  std::vector<std::string> labels;
  const auto report = nlohmann::json::parse(r.out);
  for (const auto& c : report.at("coefficients")) labels.push_back(c.at("label"));
  CHECK(labels == std::vector<std::string>{"(Intercept)", "wealth=poor", "wealth=middle"});
}

TEST_CASE("ZINB without zero covariates fits an intercept-only zero part", "[cli]") {
  Fixture fx;
  const auto out_json = (fx.dir / "zinb.json").string();
  const auto r = run_cli(std::vector<std::string>{"fit", "--family", "zinb", "--covariates", "wealth", "--out",
                                                  out_json} + fx.data_args());
  REQUIRE(r.code != cli::kExitError);
  CHECK(r.out.find("OR (zero part, logit link)") != std::string::npos);
  CHECK(r.out.find("(intercept only)") != std::string::npos);
  const auto report = nlohmann::json::parse(slurp(out_json));
  int zero_terms = 0;
  for (const auto& c : report.at("coefficients")) zero_terms += c.at("part") == "zero";
  CHECK(zero_terms == 1);
}

TEST_CASE("CSV output carries one row per coefficient", "[cli]") {
  Fixture fx;
  const auto r = run_cli(std::vector<std::string>{"fit", "--family", "nb", "--covariates", "wealth", "--format",
                                                  "csv"} + fx.data_args());
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.rfind("label,part,estimate,irr,se,z,p,stars\n", 0) == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1 + 3);  // header and 3 count terms
}

TEST_CASE("screen, diagnose and compare run end to end", "[cli]") {
  Fixture fx;
  const auto screen = run_cli(std::vector<std::string>{"screen", "--format", "json"} + fx.data_args());
  REQUIRE(screen.code == cli::kExitOk);
  const auto sj = nlohmann::json::parse(screen.out);
  REQUIRE(sj.at("screen").size() == 2);  // wealth and parity; age is numeric
  CHECK(sj.at("screen")[0].at("variable") == "wealth");

  const auto hist = (fx.dir / "hist.csv").string();
  const auto diag = run_cli(std::vector<std::string>{"diagnose", "--family", "nb", "--covariates", "wealth",
                                                     "--histogram", hist, "--format", "json"} + fx.data_args());
  REQUIRE(diag.code == cli::kExitOk);
  const auto dj = nlohmann::json::parse(diag.out);
  CHECK(dj.dump().find("overdispersed") != std::string::npos);
  CHECK(slurp(hist).rfind("value,count\n", 0) == 0);

  const auto cmp = run_cli(std::vector<std::string>{"compare", "--covariates", "wealth,parity", "--format", "json"} +
                           fx.data_args());
  REQUIRE(cmp.code == cli::kExitOk);
  const auto ranking = nlohmann::json::parse(cmp.out).at("ranking");
  REQUIRE(ranking.size() == 3);
  CHECK(ranking[0].at("aic").get<double>() <= ranking[1].at("aic").get<double>());
  CHECK(ranking[2].at("family") == "poisson");
}

TEST_CASE("simulate writes data and a truth sidecar", "[cli]") {
  Fixture fx;
  const auto csv = (fx.dir / "sim.csv").string();
  const auto r = run_cli({"simulate", "--preset", "paper-like", "--n", "500", "--seed", "4", "--out", csv});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(fs::exists(csv + ".truth.json"));
  const auto first = slurp(csv);
  REQUIRE(run_cli({"simulate", "--preset", "paper-like", "--n", "500", "--seed", "4", "--out", csv}).code == 0);
  CHECK(slurp(csv) == first);

  const auto fit = run_cli({"fit", "--preset", "paper-like", "--n", "2000", "--family", "nb"});
  CHECK(fit.code == cli::kExitOk);
  CHECK(fit.out.find("(intercept only)") != std::string::npos);
}

TEST_CASE("exit codes distinguish usage, data errors and success", "[cli]") {
  Fixture fx;
  CHECK(run_cli({}).code == cli::kExitUsage);
  CHECK(run_cli({"fit", "--bogus"}).code == cli::kExitUsage);
  CHECK(run_cli({"fit", "--family", "gamma"}).code == cli::kExitUsage);
  CHECK(run_cli({"--help"}).code == cli::kExitOk);

  const auto missing = run_cli(std::vector<std::string>{"fit", "--family", "nb", "--covariates", "height"} +
                               fx.data_args());
  CHECK(missing.code == cli::kExitError);
  CHECK(missing.err.find("height") != std::string::npos);

  const auto no_data = run_cli({"fit", "--family", "nb", "--response", "y"});
  CHECK(no_data.code == cli::kExitError);

  const auto bad_ref = run_cli(std::vector<std::string>{"fit", "--family", "nb", "--covariates", "wealth",
                                                        "--ref", "wealth"} + fx.data_args());
  CHECK(bad_ref.code == cli::kExitError);

  const auto capped = run_cli(std::vector<std::string>{"fit", "--family", "nb", "--covariates", "wealth,parity",
                                                       "--max-iter", "1"} + fx.data_args());
  CHECK(capped.code == cli::kExitNotConverged);
  CHECK(capped.out.find("converged: NO") != std::string::npos);
}
