#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "poolprice/adaptive.hpp"
#include "poolprice/core.hpp"
#include "poolprice/harness.hpp"
#include "poolprice/revenue.hpp"
#include "poolprice/robust.hpp"
#include "poolprice/sim.hpp"
#include "poolprice/solver.hpp"

namespace py = pybind11;
namespace pp = poolprice;
namespace h = poolprice::harness;

namespace {

std::vector<double> to_vec(std::span<const double> s) {
  return {s.begin(), s.end()};
}

pp::MarkdownAllocation alloc(const std::vector<double>& t) {
  return pp::MarkdownAllocation(t);
}

pp::DiscountMode parse_mode(const std::string& mode) {
  if (mode == "unit-demand") return pp::DiscountMode::kUnitDemand;
  if (mode == "constant-one") return pp::DiscountMode::kConstantOne;
  throw std::invalid_argument("mode is 'unit-demand' or 'constant-one'");
}

py::dict solver_dict(const pp::SolverResult& r) {
  py::dict d;
  d["t"] = to_vec(r.allocation.fractions());
  d["value"] = r.value;
  d["model_value"] = r.model_value;
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  return d;
}

}  // namespace

PYBIND11_MODULE(_poolprice, m) {
  m.doc() = "Pool-model dynamic pricing";

  py::register_exception<std::invalid_argument>(m, "InvalidArgument",
                                                 PyExc_ValueError);

  py::class_<pp::PriceLadder>(m, "PriceLadder")
      .def(py::init<std::vector<double>>(), py::arg("prices"))
      .def_static("uniform", &pp::PriceLadder::Uniform, py::arg("k"))
      .def_static("geometric", &pp::PriceLadder::Geometric, py::arg("k"),
                  py::arg("ratio") = 0.5, py::arg("first") = 1.0)
      .def_property_readonly("prices",
                             [](const pp::PriceLadder& l) { return to_vec(l.prices()); })
      .def("__len__", &pp::PriceLadder::size)
      .def("__repr__", [](const pp::PriceLadder& l) {
        return "PriceLadder(" + py::repr(py::cast(to_vec(l.prices()))).cast<std::string>() + ")";
      });

  py::class_<pp::UdpmInstance>(m, "Instance")
      .def(py::init([](double lambda, std::vector<double> prices,
                       std::vector<double> counts) {
             return pp::make_udpm(lambda, std::move(prices), std::move(counts));
           }),
           py::arg("lam"), py::arg("prices"), py::arg("counts"))
      .def_property_readonly("lam", &pp::UdpmInstance::lambda)
      .def_property_readonly("ladder", &pp::UdpmInstance::ladder)
      .def_property_readonly("counts",
                             [](const pp::UdpmInstance& i) { return to_vec(i.counts()); })
      .def_property_readonly("total", &pp::UdpmInstance::total);

  m.def("expected_revenue",
        [](const std::vector<double>& t, const pp::UdpmInstance& inst) {
          return pp::expected_revenue(alloc(t), inst);
        },
        py::arg("t"), py::arg("instance"));
  m.def("per_type_revenues",
        [](const std::vector<double>& t, const pp::UdpmInstance& inst) {
          return pp::per_type_revenues(alloc(t), inst);
        },
        py::arg("t"), py::arg("instance"));
  m.def("revenue_gradient",
        [](const std::vector<double>& t, const pp::UdpmInstance& inst) {
          return pp::revenue_gradient(std::span<const double>(t), inst);
        },
        py::arg("t"), py::arg("instance"));
  m.def("upper_bound", &pp::upper_bound, py::arg("instance"));

  m.def("solve_gradient",
        [](const pp::UdpmInstance& inst, double tol, std::size_t max_iters) {
          pp::GradientOptions o;
          o.tol = tol;
          o.max_iters = max_iters;
          return solver_dict(pp::solve_gradient(inst, o));
        },
        py::arg("instance"), py::arg("tol") = 1e-8, py::arg("max_iters") = 10000);
  m.def("solve_dp",
        [](const pp::UdpmInstance& inst, double eps_time, std::size_t mass_grid) {
          return solver_dict(pp::solve_dp(inst, {eps_time, mass_grid}));
        },
        py::arg("instance"), py::arg("eps_time") = 1e-3, py::arg("mass_grid") = 200);

  m.def("robust_finite",
        [](const pp::PriceLadder& l) { return to_vec(pp::robust_finite(l).fractions()); },
        py::arg("ladder"));
  m.def("cr_lower_bound", &pp::cr_lower_bound, py::arg("ladder"));
  m.def("worst_case_ratio",
        [](const std::vector<double>& t, const pp::PriceLadder& l, double lambda,
           bool randomized) {
          const pp::NonAdaptivePolicy p =
              randomized ? pp::NonAdaptivePolicy(pp::PriceDistribution(t))
                         : pp::NonAdaptivePolicy(alloc(t));
          return pp::worst_case_ratio(p, l, lambda);
        },
        py::arg("policy"), py::arg("ladder"), py::arg("lam"),
        py::arg("randomized") = false);
  m.def("robust_continuous",
        [](double p_min, double p_max, std::size_t steps) {
          const auto c = pp::robust_continuous(p_min, p_max);
          const auto s = c.discretize(steps);
          py::dict d;
          d["floor_onset"] = c.floor_onset();
          d["cr_guarantee"] = c.cr_guarantee();
          d["breakpoints"] = to_vec(s.breakpoints());
          d["prices"] = to_vec(s.prices());
          return d;
        },
        py::arg("p_min"), py::arg("p_max"), py::arg("steps") = 512);

  m.def("simulate_revenue",
        [](const pp::UdpmInstance& inst, const std::vector<double>& t,
           std::size_t reps, std::uint64_t seed, const std::string& mode,
           std::size_t threads) {
          const auto s = pp::PriceSchedule::FromAllocation(alloc(t), inst.ladder());
          py::gil_scoped_release release;
          const auto e = pp::estimate_revenue(inst, parse_mode(mode), s,
                                              {reps, seed, threads});
          return std::make_pair(e.mean, e.std_error);
        },
        py::arg("instance"), py::arg("t"), py::arg("reps") = 1000,
        py::arg("seed") = 1, py::arg("mode") = "unit-demand", py::arg("threads") = 1);

  m.def("q", &pp::q, py::arg("s"), py::arg("lam"));
  m.def("debiased_estimates",
        [](const std::vector<std::size_t>& sales, const std::vector<double>& s,
           double lambda) {
          return pp::debiased_estimates({sales}, pp::ExplorationPlan(s), lambda).n_hat;
        },
        py::arg("sales"), py::arg("s"), py::arg("lam"));
  m.def("default_exploration",
        [](double lambda, std::size_t k, double n, double c) {
          return to_vec(pp::default_exploration(lambda, k, n, c).lengths());
        },
        py::arg("lam"), py::arg("k"), py::arg("n"), py::arg("c") = 1.0);

  m.def("fit_loglog_slope",
        [](const std::vector<std::pair<double, double>>& pts) {
          const auto f = h::fit_loglog_slope(pts);
          return py::make_tuple(f.slope, f.intercept, f.r_squared);
        },
        py::arg("points"));
  m.def("run_experiment",
        [](const std::string& kind, const std::string& config_json) {
          const auto k = h::parse_kind(kind);
          const auto config =
              h::parse_config(nlohmann::json::parse(config_json), k);
          std::vector<h::ExperimentRecord> rows;
          {
            py::gil_scoped_release release;
            rows = h::run_experiment(config);
          }
          h::canonical_sort(rows);
          py::list out;
          for (const auto& r : rows) {
            py::dict d;
            d["experiment"] = r.experiment;
            d["policy"] = r.policy;
            d["family"] = r.family;
            d["k"] = r.k;
            d["lambda"] = r.lambda;
            d["n"] = r.n;
            d["reps"] = r.reps;
            d["metric"] = r.metric;
            d["value"] = r.value;
            d["stderr"] = r.std_error;
            d["seed"] = r.seed;
            d["params"] = r.params;
            out.append(d);
          }
          return out;
        },
        py::arg("kind"), py::arg("config_json") = "{}");
}
