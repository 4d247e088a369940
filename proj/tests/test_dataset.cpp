#include <catch_amalgamated.hpp>

#include <sstream>

#include "countreg/dataset.hpp"
#include "countreg/design.hpp"
#include "countreg/simulation.hpp"

using namespace countreg;

namespace {

LoadedData read(const std::string& text, const std::string& schema) {
  std::istringstream in(text);
  return read_csv(in, Schema::parse(schema));
}

const char* kHouseholds =
    "id,y,wealth,births,area\n"
    "1,0,poor,2,rural\n"
    "2,1,middle,3,urban\n"
    "3,,rich,1,rural\n"
    "4,2,poor,4,urban\n"
    "5,0,rich,2,rural\n";

}  // namespace

TEST_CASE("schema text round-trips", "[dataset]") {
  const auto s = Schema::parse("y:count, wealth:categorical[poor|middle|rich],births:numeric,area:cat");
  REQUIRE(s.columns().size() == 4);
  CHECK(s.columns()[1].levels == std::vector<std::string>{"poor", "middle", "rich"});
  CHECK(s.columns()[3].kind == ColumnKind::Categorical);
  CHECK(Schema::parse(s.to_string()).to_string() == s.to_string());

  CHECK_THROWS_AS(Schema::parse("y"), SchemaError);
  CHECK_THROWS_AS(Schema::parse("y:float"), SchemaError);
  CHECK_THROWS_AS(Schema::parse("y:count,y:numeric"), SchemaError);
  CHECK_THROWS_AS(Schema::parse("x:numeric[a|b]"), SchemaError);
}

TEST_CASE("rows with missing values are dropped and counted", "[dataset]") {
  const auto data = read(kHouseholds, "y:count,wealth:categorical,births:numeric");
  CHECK(data.dataset.n_rows() == 4);
  CHECK(data.dropped_rows == 1);
  const auto y = data.dataset.counts("y");
  CHECK(std::vector<Count>(y.begin(), y.end()) == std::vector<Count>{0, 1, 2, 0});
  // Undeclared columns are ignored.
  CHECK_FALSE(data.dataset.has_column("id"));
}

TEST_CASE("vocabulary includes levels seen only in dropped rows", "[dataset]") {
  const auto data = read("y,g\n1,a\n,b\n0,a\n2,c\n", "y:count,g:categorical");
  const auto& cat = std::get<CategoricalColumn>(data.dataset.column("g").data);
  CHECK(cat.levels == std::vector<std::string>{"a", "b", "c"});
  CHECK(data.dataset.n_rows() == 3);
}

TEST_CASE("declared vocabulary is kept in declared order", "[dataset]") {
  const auto data = read(kHouseholds, "y:count,wealth:categorical[poor|middle|rich|richest]");
  const auto& cat = std::get<CategoricalColumn>(data.dataset.column("wealth").data);
  CHECK(cat.levels == std::vector<std::string>{"poor", "middle", "rich", "richest"});
  CHECK_THROWS_AS(read(kHouseholds, "y:count,wealth:categorical[poor|rich]"), ParseError);
}

TEST_CASE("unparseable cells name their row", "[dataset]") {
  try {
    read("y,x\n1,0.5\n2.5,1\n", "y:count,x:numeric");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row() == 2);
  }
  CHECK_THROWS_AS(read("y\n-1\n", "y:count"), ParseError);
  CHECK_THROWS_AS(read("y,x\n1,abc\n", "y:count,x:numeric"), ParseError);
  CHECK_THROWS_AS(read("y,x\n1\n", "y:count,x:numeric"), ParseError);
  CHECK_THROWS_AS(read("y\n1\n", "y:count,x:numeric"), SchemaError);
  CHECK_THROWS_AS(read("", "y:count"), SchemaError);
}

TEST_CASE("quoted fields and CRLF line endings", "[dataset]") {
  const auto data = read("y,\"label\"\r\n1,\"a, b\"\r\n0,\"say \"\"hi\"\"\"\r\n", "y:count,label:categorical");
  const auto& cat = std::get<CategoricalColumn>(data.dataset.column("label").data);
  CHECK(cat.levels == std::vector<std::string>{"a, b", "say \"hi\""});
}

TEST_CASE("write_csv then read_csv reproduces a simulated dataset", "[dataset][property]") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SimConfig cfg;
    cfg.n_rows = 300;
    cfg.family = Family::NB;
    cfg.covariates = {{"g", CovariateSpec::Kind::Categorical, {"x", "y,z", "w"}, {0.2, 0.5, 0.3}},
                      {"u", CovariateSpec::Kind::Numeric, {}, {}, -1.0, 1.0, false}};
    cfg.true_beta = {{"(Intercept)", 0.1}, {"g=y,z", 0.2}, {"g=w", -0.3}, {"u", 0.5}};
    cfg.true_tau = 1.5;
    cfg.seed = seed;
    const auto ds = simulate(cfg);
    std::stringstream buf;
    write_csv(ds, buf);
    const auto back = read_csv(buf, ds.schema());
    std::stringstream again;
    write_csv(back.dataset, again);
    CHECK(again.str() == buf.str());
    CHECK(back.dataset.schema().to_string() == ds.schema().to_string());
    const auto& u0 = std::get<NumericColumn>(ds.column("u").data).values;
    const auto& u1 = std::get<NumericColumn>(back.dataset.column("u").data).values;
    CHECK(u0 == u1);
  }
}

TEST_CASE("design: dummy coding with explicit reference", "[design]") {
  const auto ds = read(kHouseholds, "y:count,wealth:categorical[poor|middle|rich],births:numeric,area:categorical")
                      .dataset;
  const auto dm = build_design(ds, {"wealth", "births"});
  CHECK(dm.labels == std::vector<std::string>{"(Intercept)", "wealth=middle", "wealth=rich", "births"});
  REQUIRE(dm.rows() == 4);
  CHECK(dm.values.col(0).isOnes());
  CHECK(dm.values(1, 1) == 1.0);  // middle
  CHECK(dm.values(3, 2) == 1.0);  // rich
  CHECK(dm.values.row(0).segment(1, 2).sum() == 0.0);  // poor is the reference
  CHECK(dm.values(2, 3) == 4.0);  // births untouched

  const auto alt = build_design(ds, {"wealth"}, {{"wealth", "rich"}});
  CHECK(alt.labels == std::vector<std::string>{"(Intercept)", "wealth=poor", "wealth=middle"});
  CHECK_THROWS_AS(build_design(ds, {"wealth"}, {{"wealth", "absent"}}), SchemaError);
}

TEST_CASE("design: intercept only and default reference", "[design]") {
  const auto ds = read(kHouseholds, "y:count,area:categorical").dataset;
  const auto empty = build_design(ds, {});
  CHECK(empty.cols() == 1);
  CHECK(empty.rows() == 4);
  CHECK(empty.values.isOnes());
  // Undeclared vocabulary is sorted; the first level is the reference.
  CHECK(build_design(ds, {"area"}).labels == std::vector<std::string>{"(Intercept)", "area=urban"});
}

TEST_CASE("design: degenerate covariates are rejected", "[design]") {
  const auto one_level = read("y,g,x\n1,a,1\n2,a,1\n0,a,1\n", "y:count,g:categorical,x:numeric").dataset;
  CHECK_THROWS_AS(build_design(one_level, {"g"}), DegenerateCovariateError);
  CHECK_THROWS_AS(build_design(one_level, {"x"}), DegenerateCovariateError);
  const auto unobserved = read("y,g\n1,a\n2,b\n", "y:count,g:categorical[a|b|c]").dataset;
  CHECK_THROWS_AS(build_design(unobserved, {"g"}), DegenerateCovariateError);
  CHECK_THROWS_AS(build_design(unobserved, {"missing"}), SchemaError);
}

TEST_CASE("design: dummy rows sum to 1 exactly for non-reference rows", "[design][property]") {
  SimConfig cfg;
  cfg.n_rows = 2000;
  cfg.family = Family::Poisson;
  cfg.covariates = {{"a", CovariateSpec::Kind::Categorical, {"r", "s", "t", "u"}, {0.25, 0.25, 0.25, 0.25}},
                    {"b", CovariateSpec::Kind::Categorical, {"p", "q"}, {0.5, 0.5}}};
  cfg.true_beta = {{"(Intercept)", 0.0}, {"a=s", 0.1}, {"a=t", 0.1}, {"a=u", 0.1}, {"b=q", 0.1}};
  cfg.seed = 9;
  const auto ds = simulate(cfg);
  for (const auto& ref : {"r", "s", "t", "u"}) {
    const auto dm = build_design(ds, {"a", "b"}, {{"a", ref}});
    CHECK(dm.cols() == 1 + 3 + 1);
    const auto& codes = std::get<CategoricalColumn>(ds.column("a").data);
    const auto ref_code = static_cast<std::size_t>(
        std::find(codes.levels.begin(), codes.levels.end(), ref) - codes.levels.begin());
    for (Eigen::Index i = 0; i < dm.rows(); ++i) {
      const double s = dm.values.row(i).segment(1, 3).sum();
      CHECK(s == (codes.codes[static_cast<std::size_t>(i)] == ref_code ? 0.0 : 1.0));
    }
    CHECK(build_design(ds, {"a", "b"}, {{"a", ref}}).values == dm.values);
  }
}

TEST_CASE("model spec validation", "[design]") {
  const auto ds = read(kHouseholds, "y:count,wealth:categorical,births:numeric").dataset;
  ModelSpec spec{Family::NB, "y", {"wealth"}, {}, {}};
  CHECK_NOTHROW(validate(spec, ds));
  spec.zero_covariates = {"births"};
  CHECK_THROWS_AS(validate(spec, ds), ConfigError);
  spec = {Family::NB, "births", {}, {}, {}};
  CHECK_THROWS_AS(validate(spec, ds), SchemaError);
  spec = {Family::NB, "y", {"wealth"}, {}, {{"wealth", "nope"}}};
  CHECK_THROWS_AS(validate(spec, ds), SchemaError);
  spec = {Family::NB, "y", {"y"}, {}, {}};
  CHECK_THROWS_AS(validate(spec, ds), ConfigError);
}
