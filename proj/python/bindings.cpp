#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "storage_dr/controllers.hpp"
#include "storage_dr/dp.hpp"
#include "storage_dr/error.hpp"
#include "storage_dr/lp.hpp"
#include "storage_dr/model.hpp"
#include "storage_dr/scenario.hpp"
#include "storage_dr/sim.hpp"

namespace py = pybind11;
using namespace storage_dr;

namespace {

ControllerConfig config_for(const SystemParams& params, double v) {
  return make_controller_config(params, v);
}

py::dict metrics_dict(const Metrics& m) {
  py::dict out;
  out["slots"] = m.slots;
  out["average_cost"] = m.average_cost;
  out["cost_se"] = m.cost_se;
  out["min_energy"] = m.min_energy;
  out["max_energy"] = m.max_energy;
  out["bound_violations"] = m.bound_violations;
  out["ea_violations"] = m.ea_violations;
  out["monotonic_violations"] = m.monotonic_violations;
  out["drift_violations"] = m.drift_violations;
  out["drift_min_margin"] = m.drift_min_margin;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Online storage control for demand response";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_ArithmeticError);
  py::register_exception<ResourceError>(m, "ResourceError", PyExc_RuntimeError);
  py::register_exception<TheoremViolation>(m, "TheoremViolation", PyExc_AssertionError);

  py::class_<SystemParams>(m, "SystemParams")
      .def(py::init<>())
      .def_readwrite("eta_e", &SystemParams::eta_e)
      .def_readwrite("eta_i", &SystemParams::eta_i)
      .def_readwrite("c_grid", &SystemParams::c_grid)
      .def_readwrite("c_char", &SystemParams::c_char)
      .def_readwrite("c_dis", &SystemParams::c_dis)
      .def_readwrite("l_max", &SystemParams::l_max)
      .def_readwrite("r_max", &SystemParams::r_max)
      .def_readwrite("p_max", &SystemParams::p_max)
      .def_readwrite("q_max", &SystemParams::q_max)
      .def("validate", [](const SystemParams& p) {
        std::vector<std::string> out;
        for (const auto& v : validate_params(p)) out.push_back(v.field + ": " + v.detail);
        return out;
      });

  py::class_<ExogenousSample>(m, "ExogenousSample")
      .def(py::init([](double p, double q, double r, StateId s, std::optional<double> load) {
             return ExogenousSample{p, q, r, s, load};
           }),
           py::arg("p") = 0.0, py::arg("q") = 0.0, py::arg("r") = 0.0, py::arg("s") = 0,
           py::arg("exo_load") = py::none())
      .def_readwrite("p", &ExogenousSample::p)
      .def_readwrite("q", &ExogenousSample::q)
      .def_readwrite("r", &ExogenousSample::r)
      .def_readwrite("s", &ExogenousSample::s)
      .def_readwrite("exo_load", &ExogenousSample::exo_load);

  py::class_<ControlAction>(m, "ControlAction")
      .def(py::init<>())
      .def_readwrite("l_tilde", &ControlAction::l_tilde)
      .def_readwrite("d_l", &ControlAction::d_l)
      .def_readwrite("d_c", &ControlAction::d_c)
      .def_readwrite("d_s", &ControlAction::d_s)
      .def_readwrite("h_s", &ControlAction::h_s)
      .def_readwrite("r_c", &ControlAction::r_c)
      .def("__repr__", [](const ControlAction& a) {
        return "ControlAction(l_tilde=" + std::to_string(a.l_tilde) + ", d_l=" +
               std::to_string(a.d_l) + ", d_c=" + std::to_string(a.d_c) + ", d_s=" +
               std::to_string(a.d_s) + ", h_s=" + std::to_string(a.h_s) + ", r_c=" +
               std::to_string(a.r_c) + ")";
      });

  py::class_<DisutilityState>(m, "DisutilityState")
      .def(py::init([](std::string name, double beta, double target) {
             return DisutilityState{std::move(name), beta, target};
           }),
           py::arg("name"), py::arg("beta"), py::arg("target"))
      .def_readwrite("name", &DisutilityState::name)
      .def_readwrite("beta", &DisutilityState::beta)
      .def_readwrite("target", &DisutilityState::target);

  py::class_<DisutilitySpec>(m, "DisutilitySpec")
      .def(py::init([](std::vector<DisutilityState> states) { return DisutilitySpec{std::move(states)}; }),
           py::arg("states"))
      .def_readwrite("states", &DisutilitySpec::states);

  py::class_<StorageLP>(m, "StorageLP")
      .def(py::init<>())
      .def_readwrite("w_h", &StorageLP::w_h)
      .def_readwrite("w_s", &StorageLP::w_s)
      .def_readwrite("w_c", &StorageLP::w_c)
      .def_readwrite("w_r", &StorageLP::w_r)
      .def_readwrite("l_plus", &StorageLP::l_plus)
      .def_readwrite("l_minus", &StorageLP::l_minus)
      .def_readwrite("params", &StorageLP::params);

  py::class_<LPSolution>(m, "LPSolution")
      .def_readonly("d_l", &LPSolution::d_l)
      .def_readonly("d_c", &LPSolution::d_c)
      .def_readonly("d_s", &LPSolution::d_s)
      .def_readonly("h_s", &LPSolution::h_s)
      .def_readonly("r_c", &LPSolution::r_c)
      .def_readonly("objective", &LPSolution::objective);

  py::class_<ControllerConfig>(m, "ControllerConfig")
      .def_readonly("v", &ControllerConfig::v)
      .def_readonly("epsilon", &ControllerConfig::epsilon)
      .def_readonly("theta", &ControllerConfig::theta)
      .def_readonly("capacity", &ControllerConfig::capacity);

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def_readonly("params", &ScenarioConfig::params)
      .def_readonly("disutility", &ScenarioConfig::disutility)
      .def_property_readonly("is_markov", &ScenarioConfig::is_markov)
      .def_property_readonly("outcome_count", &ScenarioConfig::outcome_count)
      .def("to_json", &dump_scenario_config);

  m.def("residual_load", &residual_load, py::arg("l_tilde"), py::arg("r"));
  m.def("apply_storage_dynamics", &apply_storage_dynamics, py::arg("e"), py::arg("action"),
        py::arg("params"));
  m.def("disutility", &disutility, py::arg("l_tilde"), py::arg("s"), py::arg("spec"));
  m.def(
      "check_feasibility",
      [](const ControlAction& a, const ExogenousSample& x, double e, const SystemParams& p) {
        std::vector<std::string> out;
        for (const auto& v : check_feasibility(a, x, e, p)) out.push_back(to_string(v.kind));
        return out;
      },
      py::arg("action"), py::arg("sample"), py::arg("e"), py::arg("params"));

  m.def("solve_storage_lp", &solve_storage_lp, py::arg("lp"));
  m.def("brute_force_lp", &brute_force_lp, py::arg("lp"), py::arg("step"),
        py::arg("max_points") = 200'000'000);
  m.def("verify_optimality", &verify_optimality, py::arg("solution"), py::arg("lp"),
        py::arg("tol") = 1e-9);

  m.def("compute_theta", &compute_theta, py::arg("params"), py::arg("epsilon"));
  m.def("make_controller_config", &config_for, py::arg("params"), py::arg("v"));
  m.def("drift_constant", &drift_constant, py::arg("params"));
  m.def("esm_decide", &esm_decide, py::arg("e"), py::arg("sample"), py::arg("config"),
        py::arg("params"));
  m.def("dresm_decide", &dresm_decide, py::arg("e"), py::arg("sample"), py::arg("config"),
        py::arg("params"), py::arg("disutility"));
  m.def("dresm_objective", &dresm_objective, py::arg("action"), py::arg("e"), py::arg("sample"),
        py::arg("config"), py::arg("params"), py::arg("disutility"));
  m.def("greedy_decide", &greedy_decide, py::arg("sample"), py::arg("disutility"),
        py::arg("params"));

  m.def(
      "build_reference_scenario",
      [](std::optional<std::filesystem::path> profile_file) {
        ReferenceOverrides o;
        o.profile_file = std::move(profile_file);
        return build_reference_scenario(o);
      },
      py::arg("profile_file") = py::none());
  m.def("load_scenario_config", &load_scenario_config, py::arg("path"));
  m.def("parse_scenario_config", &parse_scenario_config, py::arg("text"));

  m.def(
      "run_simulation",
      [](const std::string& controller, const ScenarioConfig& scenario, double v, std::size_t slots,
         std::uint64_t seed, double e0) {
        const ControllerConfig cfg = make_controller_config(scenario.params, v);
        SimOptions opts;
        opts.slots = slots;
        opts.e0 = e0;
        opts.keep_trace = false;
        SimResult res;
        {
          py::gil_scoped_release release;
          res = run_simulation(parse_controller(controller), scenario, cfg, opts, seed);
        }
        return metrics_dict(res.metrics);
      },
      py::arg("controller"), py::arg("scenario"), py::arg("v"), py::arg("slots") = 10'000,
      py::arg("seed") = 0, py::arg("e0") = 0.0);

  m.def("savings_percent", &savings_percent, py::arg("base_cost"), py::arg("alg_cost"));

  m.def(
      "optimal_gain",
      [](const ScenarioConfig& scenario, double capacity, double delta_e, double delta_a) {
        py::gil_scoped_release release;
        const StorageMdp mdp = discretize(scenario, capacity, delta_e, delta_a);
        return relative_value_iteration(mdp.mdp).gain;
      },
      py::arg("scenario"), py::arg("capacity"), py::arg("delta_e"), py::arg("delta_a"));
}
