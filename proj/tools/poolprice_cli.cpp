#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "poolprice/core.hpp"
#include "poolprice/harness.hpp"
#include "poolprice/io.hpp"
#include "poolprice/revenue.hpp"
#include "poolprice/robust.hpp"
#include "poolprice/sim.hpp"
#include "poolprice/solver.hpp"

using nlohmann::json;
namespace pp = poolprice;
namespace h = poolprice::harness;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  bool deterministic = false;
  std::size_t threads = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--reps", c.reps, "Replications");
  cmd->add_flag("--deterministic", c.deterministic,
                "Omit timestamps so reruns are byte-identical");
  cmd->add_option("--threads", c.threads, "Worker threads")
      ->check(CLI::PositiveNumber);
}

json load_json(const std::string& path) {
  try {
    return json::parse(pp::io::read_file(path));
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("malformed JSON in " + path + ": " + e.what());
  }
}

// Writes to <out>/<name> when --out is given, else to stdout.
void emit(const Common& c, const std::string& name, const json& j) {
  if (c.out.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::filesystem::create_directories(c.out);
  pp::io::write_file(c.out + "/" + name, j.dump(2) + "\n");
}

pp::UdpmInstance instance_from(const json& cfg) {
  const json& j = cfg.contains("instance") ? cfg.at("instance") : cfg;
  return pp::io::parse_instance(j.dump());
}

int cmd_solve(const Common& c, const std::string& method, double eps_time,
              std::size_t mass_grid) {
  if (c.config.empty()) throw std::invalid_argument("solve needs --config");
  const auto inst = instance_from(load_json(c.config));
  pp::GradientOptions opt;
  if (c.seed) opt.seed = *c.seed;
  const pp::SolverResult res = method == "dp"
                                   ? pp::solve_dp(inst, {eps_time, mass_grid})
                                   : pp::solve_gradient(inst, opt);
  json out = {{"method", method},
              {"t", std::vector<double>(res.allocation.fractions().begin(),
                                        res.allocation.fractions().end())},
              {"value", res.value},
              {"model_value", res.model_value},
              {"iterations", res.iterations},
              {"converged", res.converged},
              {"upper_bound", pp::upper_bound(inst)}};
  emit(c, "solve.json", out);
  return 0;
}

int cmd_robust(const Common& c, std::vector<double> prices, double p_min,
               double p_max, std::size_t steps) {
  if (prices.empty() && !c.config.empty()) {
    const auto cfg = load_json(c.config);
    const json& j = cfg.contains("ladder") ? cfg.at("ladder") : cfg;
    const auto ladder = pp::io::parse_ladder(j.dump());
    prices.assign(ladder.prices().begin(), ladder.prices().end());
  }
  json out;
  if (!prices.empty()) {
    const pp::PriceLadder ladder(prices);
    const auto t = pp::robust_finite(ladder);
    out["ladder"] = prices;
    out["t"] = std::vector<double>(t.fractions().begin(), t.fractions().end());
    out["cr_lower_bound"] = pp::cr_lower_bound(ladder);
  }
  if (p_max > 0.0) {
    const auto policy = pp::robust_continuous(p_min, p_max);
    const auto schedule = policy.discretize(steps);
    out["continuous"] = {
        {"p_min", p_min},
        {"p_max", p_max},
        {"floor_onset", policy.floor_onset()},
        {"cr_guarantee", policy.cr_guarantee()},
        {"schedule", json::parse(pp::io::emit_schedule(schedule))}};
  }
  if (out.empty()) {
    throw std::invalid_argument("robust needs --prices, --config or --p-max");
  }
  emit(c, "robust.json", out);
  return 0;
}

int cmd_simulate(const Common& c, const std::string& mode_name) {
  if (c.config.empty()) throw std::invalid_argument("simulate needs --config");
  const auto cfg = load_json(c.config);
  const auto inst = instance_from(cfg);
  pp::DiscountMode mode;
  if (mode_name == "unit-demand") mode = pp::DiscountMode::kUnitDemand;
  else if (mode_name == "constant-one") mode = pp::DiscountMode::kConstantOne;
  else throw std::invalid_argument("--mode is unit-demand or constant-one");

  std::optional<pp::PriceSchedule> schedule;
  if (cfg.contains("schedule")) {
    schedule = pp::io::parse_schedule(cfg.at("schedule").dump());
  } else if (cfg.contains("allocation")) {
    schedule = pp::PriceSchedule::FromAllocation(
        pp::io::parse_allocation(cfg.at("allocation").dump()), inst.ladder());
  } else {
    schedule = pp::PriceSchedule::FromAllocation(
        pp::robust_finite(inst.ladder()), inst.ladder());
  }
  const pp::ReplicationPlan plan{c.reps.value_or(1000), c.seed.value_or(1),
                                 c.threads};
  const auto est = pp::estimate_revenue(inst, mode, *schedule, plan);
  json out = {{"mean_revenue", est.mean},
              {"stderr", est.std_error},
              {"reps", plan.num_reps},
              {"seed", plan.master_seed},
              {"mode", mode_name}};
  if (mode == pp::DiscountMode::kUnitDemand &&
      !cfg.contains("schedule")) {
    const auto t = cfg.contains("allocation")
                       ? pp::io::parse_allocation(cfg.at("allocation").dump())
                       : pp::robust_finite(inst.ladder());
    out["expected_revenue"] = pp::expected_revenue(t, inst);
  }
  emit(c, "simulate.json", out);
  return 0;
}

int cmd_experiment(const Common& c, const std::string& kind_name) {
  const auto kind = h::parse_kind(kind_name);
  h::ExperimentConfig config =
      c.config.empty() ? h::default_config(kind)
                       : h::parse_config(load_json(c.config), kind);
  if (c.seed) config.seed = *c.seed;
  if (c.reps) {
    if (*c.reps == 0) throw std::invalid_argument("--reps must be positive");
    config.reps = *c.reps;
  }
  config.threads = c.threads;
  const auto records = h::run_experiment(config);
  const std::string out = c.out.empty() ? "results" : c.out;
  const auto path = h::write_outputs(out, config, records, c.deterministic);
  std::cerr << "wrote " << records.size() << " rows to " << path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pool-model pricing: solvers, robust policies, simulation and "
               "experiments"};
  app.require_subcommand(1);

  Common solve_opts, robust_opts, sim_opts, exp_opts;

  auto* solve = app.add_subcommand("solve", "Optimal markdown allocation");
  add_common(solve, solve_opts);
  std::string method = "gradient";
  double eps_time = 1e-3;
  std::size_t mass_grid = 200;
  solve->add_option("--method", method, "gradient or dp")
      ->check(CLI::IsMember({"gradient", "dp"}));
  solve->add_option("--eps-time", eps_time, "DP time step");
  solve->add_option("--mass-grid", mass_grid, "DP mass grid size");

  auto* robust = app.add_subcommand("robust", "Detail-free robust policies");
  add_common(robust, robust_opts);
  std::vector<double> prices;
  double p_min = 0.0, p_max = 0.0;
  std::size_t steps = 512;
  robust->add_option("--prices", prices, "Price ladder, highest first")
      ->delimiter(',');
  robust->add_option("--p-min", p_min, "Continuous policy: lowest price");
  robust->add_option("--p-max", p_max, "Continuous policy: highest price");
  robust->add_option("--steps", steps, "Continuous policy: pieces");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo revenue");
  add_common(simulate, sim_opts);
  std::string mode = "unit-demand";
  simulate->add_option("--mode", mode, "unit-demand or constant-one");

  auto* experiment = app.add_subcommand("experiment", "Run an experiment");
  add_common(experiment, exp_opts);
  std::string kind;
  experiment
      ->add_option("kind", kind,
                   "avg-revenue | cr | regret | equivalence | diagnostics")
      ->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*solve) return cmd_solve(solve_opts, method, eps_time, mass_grid);
    if (*robust) return cmd_robust(robust_opts, prices, p_min, p_max, steps);
    if (*simulate) return cmd_simulate(sim_opts, mode);
    if (*experiment) return cmd_experiment(exp_opts, kind);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
