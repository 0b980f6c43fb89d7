#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "poolprice/core.hpp"

namespace poolprice::harness {

inline constexpr const char* kSchemaVersion = "poolprice.records/1";

enum class ExperimentKind { kAvgRevenue, kCr, kRegret, kEquivalence, kDiagnostics };
enum class LadderFamily { kUniform, kGeometric };

std::string to_string(ExperimentKind kind);
std::string to_string(LadderFamily family);
ExperimentKind parse_kind(const std::string& name);
LadderFamily parse_family(const std::string& name);

// Uniform: {1 - (i-1)/k}; geometric: {2^{-(i-1)}}.
PriceLadder make_ladder(LadderFamily family, std::size_t k);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kAvgRevenue;
  std::vector<LadderFamily> families;
  std::vector<std::size_t> ks;
  std::vector<double> lambdas;
  std::vector<double> ns;
  // Simulation replications per estimate.
  std::size_t reps = 500;
  // Sampled instances per cell (avg-revenue).
  std::size_t instances = 500;
  std::uint64_t seed = 1;
  std::vector<std::string> policies;
  // Bandit and random-round discretization.
  std::size_t rounds = 64;
  std::size_t explore_per_arm = 0;
  double exp3_rate = 0.0;
  // LTE exploration constant.
  double exploration_c = 1.0;
  // When non-empty, run_regret first picks exploration_c from this grid by
  // total LTE regret on an independent seed (see tune_exploration_c).
  std::vector<double> exploration_c_grid;
  // Replications per tuning cell; 0 means `reps`.
  std::size_t tuning_reps = 0;
  // Regret instances: n_j = n * valuation_probs[j].
  std::vector<double> valuation_probs;
  // "exact" or "simulated".
  std::string rs_evaluation = "exact";
  std::size_t intervals = 10;
  std::vector<double> tau_multiples;
  std::size_t threads = 1;
};

// Full-scale defaults for each experiment.
ExperimentConfig default_config(ExperimentKind kind);

// Overrides defaults with the keys present in `j`; unknown keys and
// nonpositive numbers throw std::invalid_argument.
ExperimentConfig parse_config(const nlohmann::json& j, ExperimentKind kind);
nlohmann::json config_to_json(const ExperimentConfig& config);

struct ExperimentRecord {
  std::string experiment;
  std::string policy;
  std::string family;
  std::size_t k = 0;
  double lambda = 0.0;
  double n = 0.0;
  std::size_t reps = 0;
  std::string metric;
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t seed = 0;
  std::string params;
};

// 17 significant digits; nan and inf spelled out.
std::string format_double(double x);

std::string csv_header();
std::string to_csv_row(const ExperimentRecord& r);
// Sorted by (experiment, family, k, lambda, n, policy, metric, params).
void canonical_sort(std::vector<ExperimentRecord>& records);
// Schema line, optional timestamp line, header, rows in canonical order.
std::string render_csv(std::vector<ExperimentRecord> records,
                       bool deterministic);

std::vector<ExperimentRecord> run_avg_revenue(const ExperimentConfig& config);
std::vector<ExperimentRecord> run_cr(const ExperimentConfig& config);
std::vector<ExperimentRecord> run_regret(const ExperimentConfig& config);
std::vector<ExperimentRecord> run_equivalence(const ExperimentConfig& config);
std::vector<ExperimentRecord> run_diagnostics(const ExperimentConfig& config);
std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& config);

struct ExplorationTuning {
  double best_c = 0.0;
  // (c, LTE regret summed over the n grid), in grid order.
  std::vector<std::pair<double, double>> totals;
  std::uint64_t seed = 0;
};

// Runs LTE alone for every c in config.exploration_c_grid with a seed
// derived from config.seed and distinct from the evaluation seed; returns
// the c with the smallest total regret (first one on ties).
ExplorationTuning tune_exploration_c(const ExperimentConfig& config);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points_used = 0;
};

// OLS of log2(regret) on log2(n). Points with nonpositive regret are
// dropped with a warning on stderr; fewer than two usable points throws.
SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points);

// Counts from n valuations drawn uniformly from the ladder.
std::vector<double> sample_uniform_counts(std::size_t k, std::size_t n,
                                          std::uint64_t seed);

// Writes <out>/<kind>.csv and <out>/manifest.json. Returns the CSV path.
std::string write_outputs(const std::string& out_dir,
                          const ExperimentConfig& config,
                          const std::vector<ExperimentRecord>& records,
                          bool deterministic);

}  // namespace poolprice::harness
