#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "penlin/bounds.hpp"
#include "penlin/experiments.hpp"
#include "penlin/model_io.hpp"
#include "penlin/mrp.hpp"

namespace py = pybind11;
using namespace penlin;

namespace {

// A missing weight means the identity.
WeightMatrix weight_of(const std::optional<Matrix>& m, Eigen::Index rows) {
  return m ? WeightMatrix(*m) : WeightMatrix::identity(rows);
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Penalized estimators for noisy linear systems";

  py::register_exception<Error>(mod, "Error", PyExc_ValueError);

  py::enum_<PenaltyNorm>(mod, "Penalty")
      .value("L1", PenaltyNorm::L1)
      .value("L2", PenaltyNorm::L2);

  py::class_<SolveResult>(mod, "SolveResult")
      .def_readonly("theta", &SolveResult::theta)
      .def_readonly("objective", &SolveResult::objective)
      .def_readonly("iterations", &SolveResult::iterations)
      .def_readonly("converged", &SolveResult::converged);

  py::class_<RhoSelection>(mod, "RhoSelection")
      .def_readonly("rho_hat", &RhoSelection::rho_hat)
      .def_readonly("index", &RhoSelection::index)
      .def_readonly("grid", &RhoSelection::grid)
      .def_readonly("selector_values", &RhoSelection::selector_values)
      .def_readonly("result", &RhoSelection::result);

  py::class_<LinearSystem>(mod, "LinearSystem")
      .def_readonly("a", &LinearSystem::a)
      .def_readonly("b", &LinearSystem::b)
      .def_readonly("c", &LinearSystem::c)
      .def_readonly("mu", &LinearSystem::mu);

  py::class_<TailModel>(mod, "TailModel")
      .def_property_readonly("s_a", &TailModel::s_a)
      .def_property_readonly("s_b", &TailModel::s_b)
      .def_property_readonly("sample_size", &TailModel::sample_size)
      .def("z_a", &TailModel::z_a, py::arg("delta"))
      .def("z_b", &TailModel::z_b, py::arg("delta"))
      .def("to_json", [](const TailModel& t) { return t.to_json().dump(); });

  mod.def(
      "loss",
      [](const Vector& theta, const Matrix& a, const Vector& b, const std::optional<Matrix>& m) {
        return loss(theta, a, b, weight_of(m, a.rows()));
      },
      py::arg("theta"), py::arg("a"), py::arg("b"), py::arg("m") = py::none());

  mod.def(
      "solve_unsquared",
      [](const Matrix& a, const Vector& b, double lambda, PenaltyNorm p,
         const std::optional<Matrix>& m) {
        return solve_unsquared(a, b, weight_of(m, a.rows()), lambda, p);
      },
      py::arg("a"), py::arg("b"), py::arg("lam"), py::arg("penalty") = PenaltyNorm::L1,
      py::arg("m") = py::none());

  mod.def(
      "solve_squared",
      [](const Matrix& a, const Vector& b, double rho, PenaltyNorm p, const std::optional<Matrix>& m) {
        return solve_squared(a, b, weight_of(m, a.rows()), rho, p);
      },
      py::arg("a"), py::arg("b"), py::arg("rho"), py::arg("penalty") = PenaltyNorm::L1,
      py::arg("m") = py::none());

  mod.def(
      "select_rho",
      [](const Matrix& a, const Vector& b, double lambda, double c, PenaltyNorm p,
         const std::optional<Matrix>& m) {
        return select_rho(a, b, weight_of(m, a.rows()), lambda, c, p);
      },
      py::arg("a"), py::arg("b"), py::arg("lam"), py::arg("c"), py::arg("penalty") = PenaltyNorm::L1,
      py::arg("m") = py::none());

  mod.def(
      "oracle_infimum",
      [](const Matrix& a, const Vector& b, double weight, PenaltyNorm p, const std::optional<Matrix>& m,
         std::optional<double> radius) {
        return oracle_infimum(a, b, weight_of(m, a.rows()), weight, p, {}, radius);
      },
      py::arg("a"), py::arg("b"), py::arg("weight"), py::arg("penalty") = PenaltyNorm::L1,
      py::arg("m") = py::none(), py::arg("radius") = py::none());

  mod.def(
      "compute_errors",
      [](const Matrix& a, const Vector& b, const Matrix& a_obs, const Vector& b_obs, PenaltyNorm p,
         const std::optional<Matrix>& m) {
        const ErrorPair e = compute_errors(ProblemInstance{a, b, a_obs, b_obs, weight_of(m, a.rows()), p});
        return std::pair{e.delta_a, e.delta_b};
      },
      py::arg("a"), py::arg("b"), py::arg("a_obs"), py::arg("b_obs"),
      py::arg("penalty") = PenaltyNorm::L1, py::arg("m") = py::none());

  mod.def(
      "conditioning",
      [](const Matrix& m, const Matrix& c) {
        const Conditioning k = conditioning(WeightMatrix(m), c);
        return std::pair{k.kappa, k.tau};
      },
      py::arg("m"), py::arg("c"));

  mod.def(
      "calibrate_tails",
      [](const std::vector<double>& a, const std::vector<double>& b, long n) {
        return calibrate_tails(a, b, n);
      },
      py::arg("delta_a"), py::arg("delta_b"), py::arg("n"));

  mod.def(
      "exact_system",
      [](const std::string& model_path) {
        const ModelFile f = load_model(model_path);
        return exact_system(f.model, f.features);
      },
      py::arg("model_path"));

  mod.def("derive_seed", &derive_seed, py::arg("master"), py::arg("role"), py::arg("a"), py::arg("b"));

  mod.def(
      "run_experiment",
      [](const std::string& config_json) {
        const ExperimentResult r =
            run_experiment(ExperimentConfig::from_json(parse_json(config_json, "<config>")));
        return py::make_tuple(r.csv, r.passed);
      },
      py::arg("config_json"),
      "Runs an experiment from its JSON config; returns (csv, passed).");
}
