#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nvlab/geometry.hpp"
#include "nvlab/potential.hpp"

namespace py = pybind11;
using namespace nvlab;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Finite-volume particle-system laboratory";
  m.attr("__version__") = "0.1.0";

  py::class_<BoxDomain>(m, "BoxDomain")
      .def(py::init<std::vector<double>>(), py::arg("lengths"))
      .def_property_readonly("dim", &BoxDomain::dim)
      .def_property_readonly("volume", &BoxDomain::volume)
      .def_property_readonly("lengths", [](const BoxDomain& b) { return b.lengths; });

  py::class_<Configuration>(m, "Configuration")
      .def_static("empty", &Configuration::empty, py::arg("box"))
      .def_property_readonly("size", &Configuration::size)
      .def_property_readonly("dim", &Configuration::dim)
      .def("point",
           [](const Configuration& g, int i) {
             auto s = g.point(i);
             return std::vector<double>(s.begin(), s.end());
           },
           py::arg("i"))
      .def("__len__", &Configuration::size)
      .def("__eq__", [](const Configuration& a, const Configuration& b) { return a == b; });

  m.def("sym", &sym, py::arg("box"), py::arg("points"),
        "Build a configuration from unordered points");

  py::class_<PairPotentialModel>(m, "PairPotentialModel")
      .def_static("ideal_gas", &PairPotentialModel::ideal_gas, py::arg("dim"))
      .def_static("soft_sphere", &PairPotentialModel::soft_sphere, py::arg("dim"),
                  py::arg("epsilon"), py::arg("sigma"), py::arg("exponent"),
                  py::arg("cutoff") = std::optional<double>{})
      .def_static("lennard_jones", &PairPotentialModel::lennard_jones, py::arg("dim"),
                  py::arg("epsilon"), py::arg("sigma"),
                  py::arg("cutoff") = std::optional<double>{})
      .def_static("bounded_step", &PairPotentialModel::bounded_step, py::arg("dim"),
                  py::arg("height"), py::arg("radius"))
      .def_static("user_table", &PairPotentialModel::user_table, py::arg("dim"),
                  py::arg("radii"), py::arg("values"))
      .def("evaluate_radial", &PairPotentialModel::evaluate_radial, py::arg("r"))
      .def("evaluate",
           [](const PairPotentialModel& p, const std::vector<double>& x) {
             return p.evaluate(x);
           },
           py::arg("x"))
      .def("gradient",
           [](const PairPotentialModel& p, const std::vector<double>& x) {
             return p.gradient(x);
           },
           py::arg("x"));

  m.def("energy",
        [](const PairPotentialModel& p, const Configuration& g) { return energy(p, g); },
        py::arg("potential"), py::arg("configuration"));
  m.def("interaction_energy",
        [](const PairPotentialModel& p, const Configuration& a, const Configuration& b) {
          return interaction_energy(p, a, b);
        },
        py::arg("potential"), py::arg("a"), py::arg("b"));

  m.def("mayer_integral",
        [](const PairPotentialModel& p, double beta, double tol) {
          auto r = mayer_integral(p, beta, tol);
          py::dict d;
          d["value"] = r.value;
          d["error"] = r.error;
          d["converged"] = r.converged;
          return d;
        },
        py::arg("potential"), py::arg("beta"), py::arg("tol") = 1e-8);

  m.def("check_conditions",
        [](const PairPotentialModel& p, double beta) {
          auto rep = check_conditions(p, beta);
          py::dict d;
          d["all_ok"] = rep.all_ok();
          py::dict entries;
          for (const auto& e : rep.entries) {
            py::dict one;
            one["status"] = e.status;
            one["detail"] = e.detail;
            entries[e.name.c_str()] = one;
          }
          d["entries"] = entries;
          d["mayer_value"] = rep.mayer_value;
          return d;
        },
        py::arg("potential"), py::arg("beta"));
}
