#include "athero/direct.hpp"
#include "athero/errors.hpp"
#include "athero/indirect.hpp"
#include "athero/model.hpp"
#include "athero/spectral.hpp"
#include "athero/verify.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>

namespace py = pybind11;
using namespace athero;

namespace {

template <class T>
std::array<double, 3> triple(const T (&a)[3]) {
  return {a[0], a[1], a[2]};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spectral solvers for optimal control of a free-boundary plaque growth model";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<SingularSystem>(m, "SingularSystem", base.ptr());
  py::register_exception<NonConvergence>(m, "NonConvergence", base.ptr());
  py::register_exception<IntegrationFailure>(m, "IntegrationFailure", base.ptr());

  py::class_<model::ModelParameters>(m, "ModelParameters")
      .def(py::init<>())
      .def_readwrite("k1", &model::ModelParameters::k1)
      .def_readwrite("K1", &model::ModelParameters::K1)
      .def_readwrite("k2", &model::ModelParameters::k2)
      .def_readwrite("K2", &model::ModelParameters::K2)
      .def_readwrite("r1", &model::ModelParameters::r1)
      .def_readwrite("r2", &model::ModelParameters::r2)
      .def_readwrite("D", &model::ModelParameters::D)
      .def_readwrite("mu1", &model::ModelParameters::mu1)
      .def_readwrite("mu2", &model::ModelParameters::mu2)
      .def_readwrite("lambda_", &model::ModelParameters::lambda)
      .def_readwrite("delta", &model::ModelParameters::delta)
      .def_readwrite("M0", &model::ModelParameters::M0)
      .def_readwrite("alpha", &model::ModelParameters::alpha)
      .def_readwrite("beta", &model::ModelParameters::beta)
      .def_readwrite("L0", &model::ModelParameters::L0)
      .def_readwrite("H0", &model::ModelParameters::H0)
      .def_readwrite("epsilon", &model::ModelParameters::epsilon)
      .def_readwrite("T", &model::ModelParameters::T)
      .def_readwrite("Kbound", &model::ModelParameters::Kbound)
      .def_readwrite("denominator_floor", &model::ModelParameters::denominator_floor)
      .def("validate", &model::ModelParameters::validate)
      .def_static("decoupled_limit", &model::ModelParameters::decoupled_limit);

  py::class_<spectral::CollocationSetup>(m, "CollocationSetup")
      .def_readonly("N", &spectral::CollocationSetup::N)
      .def_readonly("M", &spectral::CollocationSetup::M)
      .def_readonly("space_nodes", &spectral::CollocationSetup::space_nodes)
      .def_readonly("time_nodes", &spectral::CollocationSetup::time_nodes)
      .def("space_eval", &spectral::CollocationSetup::space_eval, py::arg("d") = 0)
      .def("time_eval", &spectral::CollocationSetup::time_eval, py::arg("d") = 0);

  m.def("build_setup", &spectral::build_setup, py::arg("N"), py::arg("M"));
  m.def("legendre_gauss_nodes", &spectral::legendre_gauss_nodes, py::arg("N"));
  m.def("legendre_gauss_radau_nodes", &spectral::legendre_gauss_radau_nodes, py::arg("M"));
  m.def("jacobi_eval", &spectral::jacobi_eval, py::arg("n"), py::arg("a"), py::arg("b"),
        py::arg("x"), py::arg("d") = 0);

  py::enum_<direct::Field>(m, "Field")
      .value("L", direct::Field::L)
      .value("H", direct::Field::H)
      .value("F", direct::Field::F);

  py::class_<direct::ControlVector>(m, "ControlVector")
      .def(py::init<>())
      .def_readwrite("segments", &direct::ControlVector::segments)
      .def_readwrite("Kbound", &direct::ControlVector::Kbound)
      .def_static("constant", &direct::ControlVector::constant, py::arg("M"), py::arg("value"),
                  py::arg("Kbound"))
      .def("value_at", &direct::ControlVector::value_at)
      .def("segment_index", &direct::ControlVector::segment_index)
      .def("validate", &direct::ControlVector::validate);

  py::class_<direct::FixedPointOptions>(m, "FixedPointOptions")
      .def(py::init<>())
      .def_readwrite("tol", &direct::FixedPointOptions::tol)
      .def_readwrite("max_iter", &direct::FixedPointOptions::max_iter)
      .def_readwrite("implicit_reaction", &direct::FixedPointOptions::implicit_reaction);

  py::class_<nlp::NlpOptions>(m, "NlpOptions")
      .def(py::init<>())
      .def_readwrite("fd_step", &nlp::NlpOptions::fd_step)
      .def_readwrite("tol", &nlp::NlpOptions::tol)
      .def_readwrite("max_iter", &nlp::NlpOptions::max_iter)
      .def_readwrite("armijo_c", &nlp::NlpOptions::armijo_c)
      .def_readwrite("max_backtracks", &nlp::NlpOptions::max_backtracks)
      .def_readwrite("damping", &nlp::NlpOptions::damping)
      .def_readwrite("concurrent_gradient", &nlp::NlpOptions::concurrent_gradient);

  py::class_<direct::StateSolution>(m, "StateSolution")
      .def_readonly("CL", &direct::StateSolution::CL)
      .def_readonly("CH", &direct::StateSolution::CH)
      .def_readonly("CF", &direct::StateSolution::CF)
      .def_readonly("CR", &direct::StateSolution::CR)
      .def_readonly("v", &direct::StateSolution::v)
      .def_readonly("residual_history", &direct::StateSolution::residual_history)
      .def_readonly("iterations", &direct::StateSolution::iterations)
      .def_readonly("converged", &direct::StateSolution::converged);

  py::class_<nlp::NlpResult>(m, "NlpResult")
      .def_readonly("x", &nlp::NlpResult::x)
      .def_readonly("f", &nlp::NlpResult::f)
      .def_readonly("iterations", &nlp::NlpResult::iterations)
      .def_readonly("evaluations", &nlp::NlpResult::evaluations)
      .def_readonly("converged", &nlp::NlpResult::converged)
      .def_readonly("projected_gradient", &nlp::NlpResult::projected_gradient)
      .def_readonly("message", &nlp::NlpResult::message);

  py::class_<direct::DirectSolution>(m, "DirectSolution")
      .def_readonly("control", &direct::DirectSolution::control)
      .def_readonly("state", &direct::DirectSolution::state)
      .def_readonly("objective", &direct::DirectSolution::objective)
      .def_readonly("nlp", &direct::DirectSolution::nlp);

  m.def("fixed_point_solve", &direct::fixed_point_solve, py::arg("control"), py::arg("setup"),
        py::arg("params"), py::arg("options") = direct::FixedPointOptions{});
  m.def("objective", &direct::objective, py::arg("control"), py::arg("setup"), py::arg("params"),
        py::arg("options") = direct::FixedPointOptions{});
  m.def("solve_direct", &direct::solve_direct, py::arg("setup"), py::arg("params"),
        py::arg("nlp_options") = nlp::NlpOptions{},
        py::arg("fp_options") = direct::FixedPointOptions{},
        py::call_guard<py::gil_scoped_release>());
  m.def("evaluate_field",
        py::overload_cast<const direct::StateSolution&, direct::Field, double, double,
                          const spectral::CollocationSetup&>(&direct::evaluate_field),
        py::arg("state"), py::arg("field"), py::arg("rho"), py::arg("t"), py::arg("setup"));
  m.def("evaluate_radius",
        py::overload_cast<const direct::StateSolution&, double, const spectral::CollocationSetup&>(
            &direct::evaluate_radius),
        py::arg("state"), py::arg("t"), py::arg("setup"));

  py::class_<indirect::Rk4Options>(m, "Rk4Options")
      .def(py::init<>())
      .def_readwrite("steps", &indirect::Rk4Options::steps)
      .def_readwrite("stiffness_steps", &indirect::Rk4Options::stiffness_steps)
      .def_readwrite("stability_margin", &indirect::Rk4Options::stability_margin)
      .def_readwrite("blowup", &indirect::Rk4Options::blowup)
      .def_readwrite("retry_on_failure", &indirect::Rk4Options::retry_on_failure);

  py::class_<indirect::ShootingOptions>(m, "ShootingOptions")
      .def(py::init<>())
      .def_readwrite("fd_step", &indirect::ShootingOptions::fd_step)
      .def_readwrite("tol", &indirect::ShootingOptions::tol)
      .def_readwrite("max_iter", &indirect::ShootingOptions::max_iter)
      .def_readwrite("max_halvings", &indirect::ShootingOptions::max_halvings)
      .def_readwrite("sentinel", &indirect::ShootingOptions::sentinel)
      .def_readwrite("concurrent_jacobian", &indirect::ShootingOptions::concurrent_jacobian);

  py::class_<indirect::AdjointSolution>(m, "AdjointSolution")
      .def_readonly("time_grid", &indirect::AdjointSolution::time_grid)
      .def_readonly("R", &indirect::AdjointSolution::R)
      .def_readonly("P_R", &indirect::AdjointSolution::P_R)
      .def_readonly("phi", &indirect::AdjointSolution::phi)
      .def_readonly("switching_times", &indirect::AdjointSolution::switching_times)
      .def_readonly("s", &indirect::AdjointSolution::s)
      .def_readonly("residual", &indirect::AdjointSolution::residual)
      .def_readonly("newton_iterations", &indirect::AdjointSolution::newton_iterations)
      .def_readonly("converged", &indirect::AdjointSolution::converged)
      .def_readonly("steps", &indirect::AdjointSolution::steps);

  m.def("solve_indirect", &indirect::solve_indirect, py::arg("setup"), py::arg("params"),
        py::arg("options") = indirect::ShootingOptions{}, py::arg("rk4") = indirect::Rk4Options{},
        py::call_guard<py::gil_scoped_release>());
  m.def("evaluate_indirect_field",
        py::overload_cast<const indirect::AdjointSolution&, direct::Field, double, double,
                          const spectral::CollocationSetup&>(&indirect::evaluate_field),
        py::arg("solution"), py::arg("field"), py::arg("rho"), py::arg("t"), py::arg("setup"));
  m.def("evaluate_indirect_radius", &indirect::evaluate_radius, py::arg("solution"), py::arg("t"));
  m.def("control_at", &indirect::control_at, py::arg("solution"), py::arg("t"));

  py::class_<verify::GridSpec>(m, "GridSpec")
      .def(py::init<int, int>(), py::arg("N"), py::arg("M"))
      .def_readwrite("N", &verify::GridSpec::N)
      .def_readwrite("M", &verify::GridSpec::M);

  py::class_<verify::SolverOptions>(m, "SolverOptions")
      .def(py::init<>())
      .def_readwrite("nlp", &verify::SolverOptions::nlp)
      .def_readwrite("fixed_point", &verify::SolverOptions::fixed_point)
      .def_readwrite("shooting", &verify::SolverOptions::shooting)
      .def_readwrite("rk4", &verify::SolverOptions::rk4);

  py::class_<verify::ErrorReport>(m, "ErrorReport")
      .def_readonly("grid", &verify::ErrorReport::grid)
      .def_property_readonly("Einf", [](const verify::ErrorReport& r) { return triple(r.Einf); })
      .def_property_readonly("E2", [](const verify::ErrorReport& r) { return triple(r.E2); })
      .def_readonly("EJ", &verify::ErrorReport::EJ)
      .def_readonly("objective", &verify::ErrorReport::objective)
      .def_readonly("cpu_seconds", &verify::ErrorReport::cpu_seconds)
      .def_readonly("failed", &verify::ErrorReport::failed)
      .def_readonly("error", &verify::ErrorReport::error);

  py::class_<verify::ConvergenceStudy>(m, "ConvergenceStudy")
      .def_readonly("reference", &verify::ConvergenceStudy::reference)
      .def_readonly("reference_objective", &verify::ConvergenceStudy::reference_objective)
      .def_readonly("rows", &verify::ConvergenceStudy::rows)
      .def("table", [](const verify::ConvergenceStudy& s) { return verify::format_convergence_table(s); });

  m.def("convergence_study", &verify::convergence_study, py::arg("params"), py::arg("grids"),
        py::arg("reference") = verify::GridSpec{16, 16},
        py::arg("options") = verify::SolverOptions{}, py::call_guard<py::gil_scoped_release>());

  py::class_<verify::CrossMethodRecord>(m, "CrossMethodRecord")
      .def_property_readonly("field", [](const verify::CrossMethodRecord& r) { return triple(r.field); })
      .def_readonly("radius", &verify::CrossMethodRecord::radius)
      .def_readonly("control", &verify::CrossMethodRecord::control)
      .def_readonly("segments", &verify::CrossMethodRecord::segments)
      .def_readonly("matching_segments", &verify::CrossMethodRecord::matching_segments)
      .def_readonly("match_fraction", &verify::CrossMethodRecord::match_fraction);

  m.def(
      "cross_method_diff",
      [](const direct::DirectSolution& d, const spectral::CollocationSetup& ds,
         const indirect::AdjointSolution& ind, const spectral::CollocationSetup& is,
         const model::ModelParameters& p, int radius_samples, double membership_tol) {
        return verify::cross_method_diff(d, ds, ind, is, p, verify::node_grid(ds),
                                         verify::uniform_times(radius_samples), membership_tol);
      },
      py::arg("direct"), py::arg("direct_setup"), py::arg("indirect"), py::arg("indirect_setup"),
      py::arg("params"), py::arg("radius_samples") = 101, py::arg("membership_tol") = 1e-6);

  py::class_<verify::SweepRow>(m, "SweepRow")
      .def_readonly("L0", &verify::SweepRow::L0)
      .def_readonly("H0", &verify::SweepRow::H0)
      .def_readonly("t", &verify::SweepRow::t)
      .def_readonly("R_controlled", &verify::SweepRow::R_controlled)
      .def_readonly("R_uncontrolled", &verify::SweepRow::R_uncontrolled)
      .def_readonly("control", &verify::SweepRow::control)
      .def_readonly("objective_controlled", &verify::SweepRow::objective_controlled)
      .def_readonly("objective_uncontrolled", &verify::SweepRow::objective_uncontrolled)
      .def_readonly("failed", &verify::SweepRow::failed)
      .def_readonly("error", &verify::SweepRow::error);

  m.def("control_effect_sweep", &verify::control_effect_sweep, py::arg("pairs"), py::arg("params"),
        py::arg("setup"), py::arg("options") = verify::SolverOptions{}, py::arg("samples") = 101,
        py::arg("concurrent") = false, py::call_guard<py::gil_scoped_release>());
  m.def("default_sweep_pairs", &verify::default_sweep_pairs);
}
