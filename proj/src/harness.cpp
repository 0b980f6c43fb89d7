#include "poolprice/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "poolprice/adaptive.hpp"
#include "poolprice/io.hpp"
#include "poolprice/parallel.hpp"
#include "poolprice/revenue.hpp"
#include "poolprice/rng.hpp"
#include "poolprice/robust.hpp"
#include "poolprice/sim.hpp"
#include "poolprice/solver.hpp"

namespace poolprice::harness {

using nlohmann::json;

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kAvgRevenue: return "avg-revenue";
    case ExperimentKind::kCr: return "cr";
    case ExperimentKind::kRegret: return "regret";
    case ExperimentKind::kEquivalence: return "equivalence";
    case ExperimentKind::kDiagnostics: return "diagnostics";
  }
  return "unknown";
}

std::string to_string(LadderFamily family) {
  return family == LadderFamily::kUniform ? "uniform" : "geometric";
}

ExperimentKind parse_kind(const std::string& name) {
  for (auto kind : {ExperimentKind::kAvgRevenue, ExperimentKind::kCr,
                    ExperimentKind::kRegret, ExperimentKind::kEquivalence,
                    ExperimentKind::kDiagnostics}) {
    if (to_string(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown experiment '" + name + "'");
}

LadderFamily parse_family(const std::string& name) {
  if (name == "uniform") return LadderFamily::kUniform;
  if (name == "geometric") return LadderFamily::kGeometric;
  throw std::invalid_argument("unknown ladder family '" + name + "'");
}

PriceLadder make_ladder(LadderFamily family, std::size_t k) {
  return family == LadderFamily::kUniform ? PriceLadder::Uniform(k)
                                          : PriceLadder::Geometric(k, 0.5, 1.0);
}

namespace {

std::vector<std::size_t> k_range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> ks;
  for (std::size_t k = lo; k <= hi; ++k) ks.push_back(k);
  return ks;
}

const std::vector<LadderFamily> kBothFamilies = {LadderFamily::kUniform,
                                                 LadderFamily::kGeometric};

}  // namespace

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.families = kBothFamilies;
  c.tau_multiples = {0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5};
  switch (kind) {
    case ExperimentKind::kAvgRevenue:
      c.ks = k_range(2, 11);
      c.lambdas = {1.0, 3.0, 5.0};
      c.ns = {100.0};
      c.instances = 500;
      c.reps = 500;
      c.policies = {"ON", "RP", "RS", "UB"};
      break;
    case ExperimentKind::kCr:
      c.ks = k_range(3, 12);
      c.lambdas = {1.0};
      c.ns = {1.0};
      c.policies = {"RP", "RS", "NR", "ND"};
      break;
    case ExperimentKind::kRegret:
      c.ks = {5};
      c.lambdas = {3.0};
      c.ns = {64, 128, 256, 512, 1024, 2048};
      c.reps = 500;
      c.policies = {"LTE", "ETC", "UCB", "EXP3"};
      c.valuation_probs = {0.5, 0.25, 0.125, 0.0625, 0.0625};
      break;
    case ExperimentKind::kEquivalence:
      c.families = {LadderFamily::kUniform};
      c.ks = {4};
      c.lambdas = {2.0};
      c.ns = {20.0};
      c.reps = 100'000;
      c.policies = {"ND", "RP", "ON"};
      c.intervals = 10;
      break;
    case ExperimentKind::kDiagnostics:
      c.families = {LadderFamily::kUniform};
      c.ks = {3};
      c.lambdas = {1.0};
      c.ns = {300.0};
      c.reps = 100'000;
      c.policies = {"LTE"};
      break;
  }
  return c;
}

namespace {

template <typename T>
std::vector<T> positive_list(const json& j, const char* key) {
  if (!j.is_array() || j.empty()) {
    throw std::invalid_argument(std::string("'") + key +
                                "' must be a non-empty list");
  }
  std::vector<T> out;
  for (const auto& x : j) {
    if (!x.is_number()) {
      throw std::invalid_argument(std::string("'") + key +
                                  "' must hold numbers");
    }
    const double v = x.get<double>();
    if (!(v > 0.0)) {
      throw std::invalid_argument(std::string("'") + key +
                                  "' entries must be positive");
    }
    out.push_back(static_cast<T>(v));
  }
  return out;
}

template <typename T>
T positive_number(const json& j, const char* key) {
  if (!j.is_number()) {
    throw std::invalid_argument(std::string("'") + key + "' must be a number");
  }
  const double v = j.get<double>();
  if (!(v > 0.0)) {
    throw std::invalid_argument(std::string("'") + key + "' must be positive");
  }
  if constexpr (std::is_integral_v<T>) {
    if (v != std::floor(v)) {
      throw std::invalid_argument(std::string("'") + key +
                                  "' must be an integer");
    }
  }
  return static_cast<T>(v);
}

}  // namespace

ExperimentConfig parse_config(const json& j, ExperimentKind kind) {
  if (!j.is_object()) throw std::invalid_argument("config must be an object");
  if (j.contains("experiment") &&
      parse_kind(j.at("experiment").get<std::string>()) != kind) {
    throw std::invalid_argument("config is for a different experiment");
  }
  ExperimentConfig c = default_config(kind);
  for (const auto& [key, v] : j.items()) {
    if (key == "experiment") continue;
    if (key == "families") {
      c.families.clear();
      for (const auto& f : v) c.families.push_back(parse_family(f.get<std::string>()));
      if (c.families.empty()) throw std::invalid_argument("'families' is empty");
    } else if (key == "k") {
      c.ks = positive_list<std::size_t>(v, "k");
    } else if (key == "lambda") {
      c.lambdas = positive_list<double>(v, "lambda");
    } else if (key == "n") {
      c.ns = positive_list<double>(v, "n");
    } else if (key == "reps") {
      c.reps = positive_number<std::size_t>(v, "reps");
    } else if (key == "instances") {
      c.instances = positive_number<std::size_t>(v, "instances");
    } else if (key == "seed") {
      c.seed = v.get<std::uint64_t>();
    } else if (key == "policies") {
      c.policies = v.get<std::vector<std::string>>();
    } else if (key == "rounds") {
      c.rounds = positive_number<std::size_t>(v, "rounds");
    } else if (key == "explore_per_arm") {
      // null selects the default rule.
      c.explore_per_arm =
          v.is_null() ? 0 : positive_number<std::size_t>(v, "explore_per_arm");
    } else if (key == "exp3_rate") {
      c.exp3_rate = v.is_null() ? 0.0 : positive_number<double>(v, "exp3_rate");
    } else if (key == "exploration_c") {
      c.exploration_c = positive_number<double>(v, "exploration_c");
    } else if (key == "exploration_c_grid") {
      c.exploration_c_grid =
          v.is_array() && v.empty()
              ? std::vector<double>{}
              : positive_list<double>(v, "exploration_c_grid");
    } else if (key == "tuning_reps") {
      c.tuning_reps =
          v.is_null() ? 0 : positive_number<std::size_t>(v, "tuning_reps");
    } else if (key == "valuation_probs") {
      c.valuation_probs = v.is_array() && v.empty()
                              ? std::vector<double>{}
                              : positive_list<double>(v, "valuation_probs");
    } else if (key == "rs_evaluation") {
      c.rs_evaluation = v.get<std::string>();
      if (c.rs_evaluation != "exact" && c.rs_evaluation != "simulated") {
        throw std::invalid_argument("'rs_evaluation' is exact or simulated");
      }
    } else if (key == "intervals") {
      c.intervals = positive_number<std::size_t>(v, "intervals");
    } else if (key == "tau_multiples") {
      c.tau_multiples = positive_list<double>(v, "tau_multiples");
    } else if (key == "threads") {
      c.threads = positive_number<std::size_t>(v, "threads");
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.kind);
  j["families"] = json::array();
  for (auto f : c.families) j["families"].push_back(to_string(f));
  j["k"] = c.ks;
  j["lambda"] = c.lambdas;
  j["n"] = c.ns;
  j["reps"] = c.reps;
  j["instances"] = c.instances;
  j["seed"] = c.seed;
  j["policies"] = c.policies;
  j["rounds"] = c.rounds;
  // Zero means "default rule" internally and is written as null.
  j["explore_per_arm"] =
      c.explore_per_arm > 0 ? json(c.explore_per_arm) : json(nullptr);
  j["exp3_rate"] = c.exp3_rate > 0.0 ? json(c.exp3_rate) : json(nullptr);
  j["exploration_c"] = c.exploration_c;
  j["exploration_c_grid"] = c.exploration_c_grid;
  j["tuning_reps"] = c.tuning_reps > 0 ? json(c.tuning_reps) : json(nullptr);
  j["valuation_probs"] = c.valuation_probs;
  j["rs_evaluation"] = c.rs_evaluation;
  j["intervals"] = c.intervals;
  j["tau_multiples"] = c.tau_multiples;
  j["threads"] = c.threads;
  return j;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string csv_header() {
  return "experiment,policy,family,k,lambda,n,reps,metric,value,stderr,seed,"
         "params";
}

std::string to_csv_row(const ExperimentRecord& r) {
  std::ostringstream os;
  os << csv_field(r.experiment) << ',' << csv_field(r.policy) << ','
     << csv_field(r.family) << ',' << r.k << ',' << format_double(r.lambda)
     << ',' << format_double(r.n) << ',' << r.reps << ','
     << csv_field(r.metric) << ',' << format_double(r.value) << ','
     << format_double(r.std_error) << ',' << r.seed << ','
     << csv_field(r.params);
  return os.str();
}

void canonical_sort(std::vector<ExperimentRecord>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const ExperimentRecord& a, const ExperimentRecord& b) {
                     return std::tie(a.experiment, a.family, a.k, a.lambda, a.n,
                                     a.policy, a.metric, a.params) <
                            std::tie(b.experiment, b.family, b.k, b.lambda, b.n,
                                     b.policy, b.metric, b.params);
                   });
}

std::string render_csv(std::vector<ExperimentRecord> records,
                       bool deterministic) {
  canonical_sort(records);
  std::ostringstream os;
  os << "# schema: " << kSchemaVersion << '\n';
  if (!deterministic) {
    const auto now = std::chrono::system_clock::to_time_t(
        std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    os << "# generated: " << buf << '\n';
  }
  os << csv_header() << '\n';
  for (const auto& r : records) os << to_csv_row(r) << '\n';
  return os.str();
}

SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
  std::vector<double> xs, ys;
  for (const auto& [n, regret] : points) {
    if (!(n > 0.0) || !(regret > 0.0)) {
      std::cerr << "warning: dropping point (" << n << ", " << regret
                << ") with nonpositive value from the slope fit\n";
      continue;
    }
    xs.push_back(std::log2(n));
    ys.push_back(std::log2(regret));
  }
  if (xs.size() < 2) {
    throw std::invalid_argument("slope fit needs two positive points");
  }
  const auto m = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("slope fit needs distinct n");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  fit.points_used = xs.size();
  return fit;
}

std::vector<double> sample_uniform_counts(std::size_t k, std::size_t n,
                                          std::uint64_t seed) {
  RandomStream rng(seed);
  std::vector<double> counts(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) counts[rng.below(k)] += 1.0;
  return counts;
}

namespace {

std::uint64_t cell_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t s = seed;
  for (auto key : keys) s = derive_seed(s, key);
  return s;
}

std::uint64_t lambda_key(double lambda) {
  return static_cast<std::uint64_t>(std::llround(lambda * 1e6));
}

std::size_t whole(double n, const char* what) {
  if (n != std::floor(n)) {
    throw std::invalid_argument(std::string(what) + " must be a whole number");
  }
  return static_cast<std::size_t>(n);
}

ExperimentRecord base_record(const ExperimentConfig& c, LadderFamily family,
                             std::size_t k, double lambda, double n) {
  ExperimentRecord r;
  r.experiment = to_string(c.kind);
  r.family = to_string(family);
  r.k = k;
  r.lambda = lambda;
  r.n = n;
  r.seed = c.seed;
  return r;
}

struct Cell {
  LadderFamily family;
  std::size_t k;
  double lambda;
  double n;
};

std::vector<Cell> cells(const ExperimentConfig& c) {
  std::vector<Cell> out;
  for (auto f : c.families)
    for (auto k : c.ks)
      for (auto l : c.lambdas)
        for (auto n : c.ns) out.push_back({f, k, l, n});
  return out;
}

bool wants(const ExperimentConfig& c, const std::string& policy) {
  return std::find(c.policies.begin(), c.policies.end(), policy) !=
         c.policies.end();
}

// Runs one job per cell (possibly in parallel) and concatenates the rows in
// cell order.
template <typename Fn>
std::vector<ExperimentRecord> per_cell(const ExperimentConfig& c,
                                       std::size_t threads, Fn&& fn) {
  const auto all = cells(c);
  std::vector<std::vector<ExperimentRecord>> parts(all.size());
  parallel_for(all.size(), threads,
               [&](std::size_t i) { parts[i] = fn(all[i]); });
  std::vector<ExperimentRecord> out;
  for (auto& p : parts) {
    for (auto& r : p) out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<ExperimentRecord> run_avg_revenue(const ExperimentConfig& c) {
  for (const auto& p : c.policies) {
    if (p != "ON" && p != "RP" && p != "RS" && p != "UB") {
      throw std::invalid_argument("avg-revenue does not know policy " + p);
    }
  }
  const std::size_t cell_threads = c.rs_evaluation == "simulated" ? 1 : c.threads;
  return per_cell(c, cell_threads, [&](const Cell& cell) {
    const std::size_t n = whole(cell.n, "n");
    const PriceLadder ladder = make_ladder(cell.family, cell.k);
    const auto rp = robust_finite(ladder);
    const auto rs = robust_stream(ladder);
    const std::uint64_t seed =
        cell_seed(c.seed, {static_cast<std::uint64_t>(cell.family), cell.k,
                           lambda_key(cell.lambda), n});
    std::map<std::string, std::vector<double>> values;
    for (std::size_t i = 0; i < c.instances; ++i) {
      UdpmInstance inst(cell.lambda, ladder,
                        sample_uniform_counts(cell.k, n, derive_seed(seed, i)));
      if (wants(c, "ON")) values["ON"].push_back(solve_gradient(inst).value);
      if (wants(c, "RP")) values["RP"].push_back(expected_revenue(rp, inst));
      if (wants(c, "RS")) {
        if (c.rs_evaluation == "exact") {
          values["RS"].push_back(random_round_revenue(rs, inst, c.rounds));
        } else {
          ReplicationPlan plan{c.reps, derive_seed(seed, ~i), c.threads};
          values["RS"].push_back(
              estimate_revenue(inst, DiscountMode::kUnitDemand,
                               random_round_factory(ladder, rs, c.rounds), plan)
                  .mean);
        }
      }
      if (wants(c, "UB")) values["UB"].push_back(upper_bound(inst));
    }
    json params = {{"instances", c.instances},
                   {"rounds", c.rounds},
                   {"rs_evaluation", c.rs_evaluation}};
    std::vector<ExperimentRecord> rows;
    for (const auto& [policy, v] : values) {
      auto r = base_record(c, cell.family, cell.k, cell.lambda, cell.n);
      r.policy = policy;
      r.metric = "mean_revenue";
      const auto est = summarize(v);
      r.value = est.mean;
      r.std_error = est.std_error;
      r.reps = c.instances;
      r.params = params.dump();
      rows.push_back(r);
    }
    if (values.count("RP") && values.count("RS")) {
      auto r = base_record(c, cell.family, cell.k, cell.lambda, cell.n);
      r.policy = "RP/RS";
      r.metric = "mean_ratio";
      r.value = summarize(values["RP"]).mean / summarize(values["RS"]).mean;
      r.std_error = std::nan("");
      r.reps = c.instances;
      r.params = params.dump();
      rows.push_back(r);
    }
    return rows;
  });
}

std::vector<ExperimentRecord> run_cr(const ExperimentConfig& c) {
  return per_cell(c, c.threads, [&](const Cell& cell) {
    const PriceLadder ladder = make_ladder(cell.family, cell.k);
    std::vector<std::pair<std::string, NonAdaptivePolicy>> policies;
    for (const auto& p : c.policies) {
      if (p == "RP") policies.emplace_back(p, robust_finite(ladder));
      else if (p == "RS") policies.emplace_back(p, robust_stream(ladder));
      else if (p == "NR") policies.emplace_back(p, naive_randomized(ladder));
      else if (p == "ND") policies.emplace_back(p, naive_deterministic(ladder));
      else throw std::invalid_argument("cr does not know policy " + p);
    }
    std::vector<ExperimentRecord> rows;
    for (const auto& [name, policy] : policies) {
      auto r = base_record(c, cell.family, cell.k, cell.lambda, cell.n);
      r.policy = name;
      r.metric = "worst_case_ratio";
      r.value = worst_case_ratio(policy, ladder, cell.lambda, cell.n);
      r.std_error = 0.0;
      r.params = json{{"adversary", "dirac"}}.dump();
      rows.push_back(r);
    }
    auto r = base_record(c, cell.family, cell.k, cell.lambda, cell.n);
    r.policy = "RP";
    r.metric = "cr_lower_bound";
    r.value = cr_lower_bound(ladder);
    r.params = json{{"adversary", "dirac"}}.dump();
    rows.push_back(r);
    return rows;
  });
}

ExplorationTuning tune_exploration_c(const ExperimentConfig& config) {
  if (config.exploration_c_grid.empty()) {
    throw std::invalid_argument("exploration_c_grid is empty");
  }
  ExperimentConfig t = config;
  t.exploration_c_grid.clear();
  t.policies = {"LTE"};
  t.reps = config.tuning_reps > 0 ? config.tuning_reps : config.reps;
  t.seed = derive_seed(config.seed, 0x74756e65ULL);
  ExplorationTuning out;
  out.seed = t.seed;
  double best = std::numeric_limits<double>::infinity();
  for (double cv : config.exploration_c_grid) {
    t.exploration_c = cv;
    double total = 0.0;
    for (const auto& r : run_regret(t)) {
      if (r.metric == "regret") total += r.value;
    }
    out.totals.push_back({cv, total});
    if (total < best) {
      best = total;
      out.best_c = cv;
    }
  }
  return out;
}

std::vector<ExperimentRecord> run_regret(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  std::vector<ExperimentRecord> tuning_rows;
  if (!config.exploration_c_grid.empty()) {
    const auto tuned = tune_exploration_c(config);
    c.exploration_c = tuned.best_c;
    for (const auto& [cv, total] : tuned.totals) {
      ExperimentRecord r;
      r.experiment = to_string(c.kind);
      r.policy = "LTE";
      r.metric = "tuning_total_regret";
      r.value = total;
      r.std_error = std::nan("");
      r.reps = config.tuning_reps > 0 ? config.tuning_reps : config.reps;
      r.seed = tuned.seed;
      r.params = json{{"exploration_c", cv}, {"selected", cv == tuned.best_c}}.dump();
      tuning_rows.push_back(r);
    }
  }
  for (auto k : c.ks) {
    if (k != c.valuation_probs.size()) {
      throw std::invalid_argument("valuation_probs must have k entries");
    }
  }
  // Cells run one at a time; replications inside a cell use the threads.
  auto rows = per_cell(c, 1, [&](const Cell& cell) {
    const PriceLadder ladder = make_ladder(cell.family, cell.k);
    std::vector<double> counts(cell.k);
    for (std::size_t j = 0; j < cell.k; ++j) {
      counts[j] = cell.n * c.valuation_probs[j];
    }
    const UdpmInstance inst(cell.lambda, ladder, counts);
    if (!inst.has_integral_counts()) {
      throw std::invalid_argument("n * valuation_probs must be whole numbers");
    }
    const double opt = solve_gradient(inst).value;
    BanditParams bp{c.rounds, bandit_normalizer(ladder, cell.n, cell.lambda, c.rounds),
                    c.explore_per_arm, c.exp3_rate};
    const auto plan =
        default_exploration(cell.lambda, cell.k, cell.n, c.exploration_c);
    // Every policy sees the same customer randomness in a cell.
    const ReplicationPlan rp{c.reps,
                             cell_seed(c.seed, {static_cast<std::uint64_t>(cell.family),
                                                cell.k, lambda_key(cell.lambda),
                                                whole(cell.n, "n")}),
                             c.threads};
    json params = {{"rounds", c.rounds},
                   {"normalizer", bp.normalizer},
                   {"explore_per_arm", c.explore_per_arm > 0
                                           ? c.explore_per_arm
                                           : default_explore_per_arm(cell.k, c.rounds)},
                   {"exp3_rate", c.exp3_rate > 0.0
                                     ? c.exp3_rate
                                     : default_exp3_rate(cell.k, c.rounds)},
                   {"exploration_c", c.exploration_c},
                   {"exploration_s", plan[0]},
                   {"opt", opt}};
    std::vector<ExperimentRecord> out;
    for (const auto& name : c.policies) {
      Estimate est;
      if (name == "LTE") {
        est = estimate_revenue(inst, DiscountMode::kUnitDemand,
                               lte_factory(cell.lambda, ladder, plan), rp);
      } else if (name == "ETC") {
        est = estimate_revenue(inst, DiscountMode::kUnitDemand,
                               etc_factory(ladder, bp), rp);
      } else if (name == "UCB") {
        est = estimate_revenue(inst, DiscountMode::kUnitDemand,
                               ucb_factory(ladder, bp), rp);
      } else if (name == "EXP3") {
        est = estimate_revenue(inst, DiscountMode::kUnitDemand,
                               exp3_factory(ladder, bp), rp);
      } else if (name == "ON") {
        est = estimate_revenue(
            inst, DiscountMode::kUnitDemand,
            PriceSchedule::FromAllocation(solve_gradient(inst).allocation, ladder),
            rp);
      } else {
        throw std::invalid_argument("regret does not know policy " + name);
      }
      auto r = base_record(c, cell.family, cell.k, cell.lambda, cell.n);
      r.policy = name;
      r.metric = "regret";
      r.value = opt - est.mean;
      r.std_error = est.std_error;
      r.reps = c.reps;
      r.params = params.dump();
      out.push_back(r);
    }
    return out;
  });

  // One log-log slope per (family, k, lambda, policy) across the n grid.
  std::map<std::tuple<std::string, std::size_t, double, std::string>,
           std::vector<std::pair<double, double>>>
      series;
  for (const auto& r : rows) {
    series[{r.family, r.k, r.lambda, r.policy}].push_back({r.n, r.value});
  }
  if (c.ns.size() >= 2) {
    for (const auto& [key, points] : series) {
      const auto& [family, k, lambda, policy] = key;
      ExperimentRecord r;
      r.experiment = to_string(c.kind);
      r.family = family;
      r.k = k;
      r.lambda = lambda;
      r.n = 0.0;
      r.policy = policy;
      r.reps = c.reps;
      r.seed = c.seed;
      r.metric = "loglog_slope";
      try {
        const auto fit = fit_loglog_slope(points);
        r.value = fit.slope;
        r.std_error = std::nan("");
        r.params = json{{"intercept", fit.intercept},
                        {"r_squared", fit.r_squared},
                        {"points", fit.points_used}}
                       .dump();
      } catch (const std::invalid_argument&) {
        r.value = std::nan("");
        r.std_error = std::nan("");
        r.params = json{{"points", 0}}.dump();
      }
      rows.push_back(r);
    }
  }
  rows.insert(rows.end(), tuning_rows.begin(), tuning_rows.end());
  return rows;
}

namespace {

// Sales counts per interval of a [0, 1] grid.
void bin_sales(const SimOutcome& out, std::size_t intervals, double* bins) {
  for (const auto& s : out.sales) {
    auto b = static_cast<std::size_t>(s.time * static_cast<double>(intervals));
    if (b >= intervals) b = intervals - 1;
    bins[b] += 1.0;
  }
}

}  // namespace

std::vector<ExperimentRecord> run_equivalence(const ExperimentConfig& c) {
  return per_cell(c, 1, [&](const Cell& cell) {
    const std::size_t n = whole(cell.n, "n");
    const PriceLadder ladder = make_ladder(cell.family, cell.k);
    const std::uint64_t seed =
        cell_seed(c.seed, {static_cast<std::uint64_t>(cell.family), cell.k,
                           lambda_key(cell.lambda), n});
    // Valuations v: pool types are their tallies, stream demand is d_v.
    const auto counts = sample_uniform_counts(cell.k, n, derive_seed(seed, 0));
    const UdpmInstance pool(cell.lambda, ladder, counts);
    std::vector<double> valuations;
    for (std::size_t j = 0; j < cell.k; ++j) {
      valuations.insert(valuations.end(), static_cast<std::size_t>(counts[j]),
                        ladder[j]);
    }
    const StreamInstance stream(cell.n * cell.lambda, ladder,
                                demand_function(valuations, ladder));
    const std::size_t bins = c.intervals;
    std::vector<ExperimentRecord> rows;
    for (const auto& name : c.policies) {
      MarkdownAllocation t = MarkdownAllocation::Uniform(cell.k);
      if (name == "RP") t = robust_finite(ladder);
      else if (name == "ON") t = solve_gradient(pool).allocation;
      else if (name != "ND") {
        throw std::invalid_argument("equivalence does not know policy " + name);
      }
      const auto schedule = PriceSchedule::FromAllocation(t, ladder);
      std::vector<double> pool_bins(c.reps * bins, 0.0);
      std::vector<double> stream_bins(c.reps * bins, 0.0);
      const ReplicationPlan pool_plan{c.reps, derive_seed(seed, 1), c.threads};
      const ReplicationPlan stream_plan{c.reps, derive_seed(seed, 2), c.threads};
      parallel_for(c.reps, c.threads, [&](std::size_t r) {
        bin_sales(simulate_pool_events(pool, DiscountMode::kConstantOne,
                                       schedule, pool_plan.replication_seed(r)),
                  bins, &pool_bins[r * bins]);
        bin_sales(simulate_stream(stream, schedule,
                                  stream_plan.replication_seed(r)),
                  bins, &stream_bins[r * bins]);
      });
      std::vector<double> a(c.reps), b(c.reps);
      for (std::size_t i = 0; i < bins; ++i) {
        for (std::size_t r = 0; r < c.reps; ++r) {
          a[r] = pool_bins[r * bins + i];
          b[r] = stream_bins[r * bins + i];
        }
        const auto ea = summarize(a);
        const auto eb = summarize(b);
        const double se = std::hypot(ea.std_error, eb.std_error);
        const double z = se > 0.0 ? (ea.mean - eb.mean) / se : 0.0;
        const json params = {
            {"from", static_cast<double>(i) / static_cast<double>(bins)},
            {"to", static_cast<double>(i + 1) / static_cast<double>(bins)},
            {"interval", i},
            {"mode", "constant-one"}};
        auto base = base_record(c, cell.family, cell.k, cell.lambda, cell.n);
        base.policy = name;
        base.reps = c.reps;
        base.params = params.dump();
        auto r1 = base;
        r1.metric = "pool_mean_demand";
        r1.value = ea.mean;
        r1.std_error = ea.std_error;
        auto r2 = base;
        r2.metric = "stream_mean_demand";
        r2.value = eb.mean;
        r2.std_error = eb.std_error;
        auto r3 = base;
        r3.metric = "z";
        r3.value = z;
        r3.std_error = std::nan("");
        rows.insert(rows.end(), {r1, r2, r3});
      }
    }
    return rows;
  });
}

std::vector<ExperimentRecord> run_diagnostics(const ExperimentConfig& c) {
  return per_cell(c, 1, [&](const Cell& cell) {
    const std::size_t n = whole(cell.n, "n");
    const PriceLadder ladder = make_ladder(cell.family, cell.k);
    std::vector<double> counts(cell.k);
    for (std::size_t j = 0; j < cell.k; ++j) {
      counts[j] = static_cast<double>(n / cell.k + (j < n % cell.k ? 1 : 0));
    }
    const UdpmInstance inst(cell.lambda, ladder, counts);
    const auto plan =
        default_exploration(cell.lambda, cell.k, cell.n, c.exploration_c);
    DiagnosticsOptions opts;
    opts.tau_multiples = c.tau_multiples;
    opts.threads = c.threads;
    const std::uint64_t seed =
        cell_seed(c.seed, {static_cast<std::uint64_t>(cell.family), cell.k,
                           lambda_key(cell.lambda), n});
    const auto report = error_process_diagnostics(inst, plan, c.reps, seed, opts);
    std::vector<ExperimentRecord> rows;
    auto base = base_record(c, cell.family, cell.k, cell.lambda, cell.n);
    base.policy = "LTE";
    base.reps = c.reps;
    for (std::size_t j = 0; j < cell.k; ++j) {
      auto r = base;
      r.params = json{{"j", j + 1}, {"s", plan[j]}, {"n_j", counts[j]}}.dump();
      r.metric = "bias";
      r.value = report.bias[j].mean;
      r.std_error = report.bias[j].std_error;
      rows.push_back(r);
      r.metric = "running_sum_mean";
      r.value = report.running_sum[j].mean;
      r.std_error = report.running_sum[j].std_error;
      rows.push_back(r);
    }
    auto emit_tail = [&](const TailCheck& t, const char* kind) {
      json params = {{"tau", t.tau},
                     {"bound", t.bound},
                     {"slack", t.slack},
                     {"within", t.within()}};
      if (t.basis != TailCheck::kUniform) params["m"] = t.basis;
      auto r = base;
      r.metric = kind;
      r.value = t.empirical;
      r.std_error = std::sqrt(t.empirical * (1.0 - t.empirical) /
                              static_cast<double>(c.reps));
      r.params = params.dump();
      rows.push_back(r);
    };
    for (const auto& t : report.pointwise) emit_tail(t, "tail_pointwise");
    for (const auto& t : report.uniform) emit_tail(t, "tail_uniform");
    return rows;
  });
}

std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& config) {
  switch (config.kind) {
    case ExperimentKind::kAvgRevenue: return run_avg_revenue(config);
    case ExperimentKind::kCr: return run_cr(config);
    case ExperimentKind::kRegret: return run_regret(config);
    case ExperimentKind::kEquivalence: return run_equivalence(config);
    case ExperimentKind::kDiagnostics: return run_diagnostics(config);
  }
  throw std::invalid_argument("unknown experiment");
}

std::string write_outputs(const std::string& out_dir,
                          const ExperimentConfig& config,
                          const std::vector<ExperimentRecord>& records,
                          bool deterministic) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string name = to_string(config.kind) + ".csv";
  const fs::path csv = fs::path(out_dir) / name;
  io::write_file(csv.string(), render_csv(records, deterministic));

  // The manifest lists every experiment written to this directory so far.
  const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
  json manifest = {{"schema", kSchemaVersion}, {"experiments", json::object()}};
  if (fs::exists(manifest_path)) {
    try {
      auto old = json::parse(io::read_file(manifest_path.string()));
      if (old.contains("experiments") && old["experiments"].is_object()) {
        manifest["experiments"] = old["experiments"];
      }
    } catch (const std::exception&) {
      // A corrupt manifest is rewritten from scratch.
    }
  }
  json entry = {{"csv", name},
                {"rows", records.size()},
                {"config", config_to_json(config)},
                {"deterministic", deterministic}};
  if (!deterministic) {
    entry["generated_unix"] = std::chrono::duration_cast<std::chrono::seconds>(
                                  std::chrono::system_clock::now().time_since_epoch())
                                  .count();
  }
  manifest["experiments"][to_string(config.kind)] = entry;
  io::write_file(manifest_path.string(), manifest.dump(2) + "\n");
  return csv.string();
}

}  // namespace poolprice::harness
