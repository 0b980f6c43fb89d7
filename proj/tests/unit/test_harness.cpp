#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "poolprice/harness.hpp"
#include "poolprice/io.hpp"

using namespace poolprice;
namespace h = poolprice::harness;
using nlohmann::json;

namespace {

std::vector<h::ExperimentRecord> rows_with(const std::vector<h::ExperimentRecord>& rows,
                                           const std::string& metric) {
  std::vector<h::ExperimentRecord> out;
  for (const auto& r : rows)
    if (r.metric == metric) out.push_back(r);
  return out;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("poolprice_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("slope of an exact power law") {
  std::vector<std::pair<double, double>> pts;
  for (int i = 6; i <= 11; ++i) pts.push_back({std::ldexp(1.0, i), 3.0 * std::pow(std::ldexp(1.0, i), 0.7)});
  const auto fit = h::fit_loglog_slope(pts);
  CHECK(std::abs(fit.slope - 0.7) <= 1e-12);
  CHECK(fit.intercept == doctest::Approx(std::log2(3.0)));
  CHECK(fit.r_squared == doctest::Approx(1.0));
  CHECK(h::fit_loglog_slope({{64, 8}, {256, 32}}).slope == doctest::Approx(1.0));
}

TEST_CASE("slope of a noisy power law") {
  std::mt19937_64 gen(83);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<double, double>> pts;
    for (int i = 1; i <= 6; ++i) {
      const double n = std::ldexp(1.0, 5 + i);
      pts.push_back({n, 2.0 * std::pow(n, 2.0 / 3.0) * (1.0 + noise(gen))});
    }
    CHECK(std::abs(h::fit_loglog_slope(pts).slope - 2.0 / 3.0) <= 0.05);
  }
}

TEST_CASE("slope fit drops nonpositive points") {
  const auto fit = h::fit_loglog_slope({{64, -1.0}, {128, 4}, {256, 8}, {512, 0.0}});
  CHECK(fit.points_used == 2);
  CHECK(fit.slope == doctest::Approx(1.0));
  CHECK_THROWS_AS(h::fit_loglog_slope({{64, 1.0}, {128, -1.0}}), std::invalid_argument);
}

TEST_CASE("names and ladders") {
  for (auto k : {h::ExperimentKind::kAvgRevenue, h::ExperimentKind::kCr,
                 h::ExperimentKind::kRegret, h::ExperimentKind::kEquivalence,
                 h::ExperimentKind::kDiagnostics})
    CHECK(h::parse_kind(h::to_string(k)) == k);
  CHECK(h::to_string(h::ExperimentKind::kAvgRevenue) == "avg-revenue");
  CHECK_THROWS_AS(h::parse_kind("fig7"), std::invalid_argument);
  CHECK_THROWS_AS(h::parse_family("harmonic"), std::invalid_argument);
  CHECK(h::make_ladder(h::LadderFamily::kUniform, 4) == PriceLadder({1.0, 0.75, 0.5, 0.25}));
  CHECK(h::make_ladder(h::LadderFamily::kGeometric, 3) == PriceLadder({1.0, 0.5, 0.25}));
}

TEST_CASE("config parsing") {
  const auto c = h::parse_config(json::parse(R"({"k": [3, 4], "reps": 7, "families": ["geometric"]})"),
                                 h::ExperimentKind::kCr);
  CHECK(c.ks == std::vector<std::size_t>{3, 4});
  CHECK(c.reps == 7);
  CHECK(c.families == std::vector<h::LadderFamily>{h::LadderFamily::kGeometric});
  CHECK(c.policies == h::default_config(h::ExperimentKind::kCr).policies);

  const auto round = h::parse_config(h::config_to_json(c), h::ExperimentKind::kCr);
  CHECK(h::config_to_json(round) == h::config_to_json(c));

  const auto bad = [](const char* text) {
    return h::parse_config(json::parse(text), h::ExperimentKind::kRegret);
  };
  CHECK_THROWS_AS(bad(R"({"kk": [3]})"), std::invalid_argument);
  CHECK_THROWS_AS(bad(R"({"reps": 0})"), std::invalid_argument);
  CHECK_THROWS_AS(bad(R"({"reps": 2.5})"), std::invalid_argument);
  CHECK_THROWS_AS(bad(R"({"lambda": [1, -3]})"), std::invalid_argument);
  CHECK_THROWS_AS(bad(R"({"n": []})"), std::invalid_argument);
  CHECK_THROWS_AS(bad(R"({"experiment": "cr"})"), std::invalid_argument);
  CHECK_THROWS_AS(bad(R"({"rs_evaluation": "guess"})"), std::invalid_argument);
  CHECK_THROWS_AS(bad("[1]"), std::invalid_argument);
}

TEST_CASE("CSV formatting") {
  CHECK(h::format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(h::format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(h::format_double(std::nan("")) == "nan");
  h::ExperimentRecord r;
  r.experiment = "cr";
  r.policy = "RP";
  r.params = R"({"a": "b, c"})";
  const auto row = h::to_csv_row(r);
  CHECK(row.find("\"{\"\"a\"\": \"\"b, c\"\"}\"") != std::string::npos);
  CHECK(h::csv_header() ==
        "experiment,policy,family,k,lambda,n,reps,metric,value,stderr,seed,params");
}

TEST_CASE("CSV is byte identical across runs and orderings") {
  auto c = h::default_config(h::ExperimentKind::kCr);
  c.ks = {3, 4, 5};
  auto rows = h::run_cr(c);
  const auto a = h::render_csv(rows, true);
  std::mt19937_64 gen(3);
  std::shuffle(rows.begin(), rows.end(), gen);
  CHECK(h::render_csv(rows, true) == a);
  c.threads = 3;
  CHECK(h::render_csv(h::run_cr(c), true) == a);
  CHECK(a.rfind("# schema: poolprice.records/1\n", 0) == 0);
  CHECK(h::render_csv(rows, false).find("# generated: ") != std::string::npos);
}

TEST_CASE("cr experiment rows") {
  auto c = h::default_config(h::ExperimentKind::kCr);
  c.ks = {3, 6};
  const auto rows = h::run_cr(c);
  CHECK(rows_with(rows, "worst_case_ratio").size() == 2 * 2 * 4);
  for (const auto& lb : rows_with(rows, "cr_lower_bound")) {
    for (const auto& r : rows_with(rows, "worst_case_ratio")) {
      if (r.policy == "RP" && r.family == lb.family && r.k == lb.k)
        CHECK(r.value >= lb.value - 1e-9);
    }
  }
}

TEST_CASE("avg-revenue experiment on a small grid") {
  auto c = h::default_config(h::ExperimentKind::kAvgRevenue);
  c.ks = {3};
  c.lambdas = {1.0, 5.0};
  c.instances = 20;
  const auto rows = h::run_avg_revenue(c);
  auto value = [&](const std::string& fam, double lambda, const std::string& p) {
    for (const auto& r : rows)
      if (r.family == fam && r.lambda == lambda && r.policy == p) return r.value;
    FAIL("missing row");
    return 0.0;
  };
  for (std::string fam : {"uniform", "geometric"}) {
    for (double lambda : {1.0, 5.0}) {
      CHECK(value(fam, lambda, "UB") >= value(fam, lambda, "ON"));
      CHECK(value(fam, lambda, "ON") >= value(fam, lambda, "RP"));
    }
  }
  const auto counts = h::sample_uniform_counts(4, 100, 9);
  double total = 0.0;
  for (double x : counts) total += x;
  CHECK(total == 100.0);
  CHECK(counts == h::sample_uniform_counts(4, 100, 9));
}

TEST_CASE("regret experiment with a tuned exploration constant") {
  auto c = h::default_config(h::ExperimentKind::kRegret);
  c.families = {h::LadderFamily::kGeometric};
  c.ns = {64, 128};
  c.reps = 20;
  c.policies = {"LTE", "ON"};
  c.exploration_c_grid = {0.5, 1.0};
  c.tuning_reps = 10;
  const auto rows = h::run_regret(c);
  const auto tuning = rows_with(rows, "tuning_total_regret");
  REQUIRE(tuning.size() == 2);
  const auto tuned = h::tune_exploration_c(c);
  CHECK((tuned.best_c == 0.5 || tuned.best_c == 1.0));
  CHECK(tuned.seed != c.seed);
  for (const auto& r : rows_with(rows, "regret")) {
    CHECK(json::parse(r.params).at("exploration_c") == tuned.best_c);
    if (r.policy == "ON") CHECK(std::abs(r.value) <= 4 * r.std_error);
  }
  CHECK(rows_with(rows, "loglog_slope").size() == 2);
}

TEST_CASE("equivalence and diagnostics experiments run") {
  auto e = h::default_config(h::ExperimentKind::kEquivalence);
  e.reps = 2000;
  const auto eq = h::run_equivalence(e);
  CHECK(rows_with(eq, "z").size() == 3 * 10);
  auto d = h::default_config(h::ExperimentKind::kDiagnostics);
  d.reps = 2000;
  const auto dg = h::run_diagnostics(d);
  CHECK(rows_with(dg, "bias").size() == 3);
}

TEST_CASE("outputs and manifest") {
  const auto dir = scratch_dir("outputs");
  auto c = h::default_config(h::ExperimentKind::kCr);
  c.ks = {3};
  const auto path = h::write_outputs(dir.string(), c, h::run_cr(c), true);
  CHECK(std::filesystem::exists(path));
  auto d = h::default_config(h::ExperimentKind::kDiagnostics);
  d.reps = 100;
  h::write_outputs(dir.string(), d, h::run_diagnostics(d), true);
  const auto manifest = json::parse(io::read_file((dir / "manifest.json").string()));
  CHECK(manifest.at("experiments").contains("cr"));
  CHECK(manifest.at("experiments").contains("diagnostics"));
  std::filesystem::remove_all(dir);
}
