#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/operators.h>
#include <pybind11/stl.h>

#include "mellin_radon/cost_model.hpp"
#include "mellin_radon/diagnostics.hpp"
#include "mellin_radon/errors.hpp"
#include "mellin_radon/gamma.hpp"
#include "mellin_radon/inversion.hpp"
#include "mellin_radon/kernel.hpp"
#include "mellin_radon/mellin.hpp"
#include "mellin_radon/scene.hpp"
#include "mellin_radon/selftest.hpp"
#include "mellin_radon/transforms.hpp"

namespace py = pybind11;
using namespace mellin_radon;

namespace {

// JSON crosses the boundary as text and is decoded by the json module.
py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::array_t<double> grid_values(const GridFunction& f) {
  std::vector<py::ssize_t> shape(f.grid().N.begin(), f.grid().N.end());
  py::array_t<double> out(shape);
  std::copy(f.values().begin(), f.values().end(), out.mutable_data());
  return out;
}

GridFunction make_grid_function(const LogGrid& g, py::array_t<double, py::array::c_style | py::array::forcecast> v) {
  if (static_cast<std::size_t>(v.size()) != g.size()) fail(ErrorKind::Shape, "value array does not match the grid size");
  return GridFunction(g, std::vector<double>(v.data(), v.data() + v.size()));
}

WeightedNormSpec::R r_from(const py::object& r) {
  return WeightedNormSpec::parse_r(py::str(r).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Generalized Radon transforms under CES costs: forward, Mellin inversion, diagnostics";

  static py::exception<Error> exc(m, "MellinRadonError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = py::handle(exc.ptr())(std::string(to_string(e.kind())) + ": " + e.what());
      err.attr("kind") = to_string(e.kind());
      PyErr_SetObject(exc.ptr(), err.ptr());
    }
  });

  py::class_<CostExpr>(m, "CostExpr")
      .def_static("parse", [](const std::string& s) { return CostExpr::parse(s); })
      .def_static("ces", &CostExpr::ces, py::arg("alpha"), py::arg("C"), py::arg("a"), py::arg("children"))
      .def_static("axis", &CostExpr::axis)
      .def("__str__", &CostExpr::to_string)
      .def("__repr__", [](const CostExpr& q) { return "CostExpr.parse('" + q.to_string() + "')"; })
      .def_property_readonly("dimension", &CostExpr::dimension)
      .def("__call__", [](const CostExpr& q, std::vector<double> x) { return q.value(x); })
      .def("gradient", [](const CostExpr& q, std::vector<double> x) { return grad_cost(q, x); })
      .def("hash", &CostExpr::hash)
      .def(
          "validate",
          [](const CostExpr& q, int samples, std::uint64_t seed) {
            const auto r = validate_cost(q, samples, seed);
            py::dict d;
            d["ok"] = r.ok();
            d["homogeneity_max_residual"] = r.homogeneity_max_residual;
            d["positivity_ok"] = r.positivity_ok;
            d["level_set_bounded"] = r.level_set_bounded;
            d["analytic_bounded"] = r.analytic_bounded;
            d["ray_growth"] = r.ray_growth;
            return d;
          },
          py::arg("samples") = 256, py::arg("seed") = 1);

  py::class_<LogGrid>(m, "LogGrid")
      .def_static("uniform", &LogGrid::uniform, py::arg("n"), py::arg("ymin"), py::arg("ymax"), py::arg("N"))
      .def_readonly("y0", &LogGrid::y0)
      .def_readonly("dy", &LogGrid::dy)
      .def_readonly("N", &LogGrid::N)
      .def_property_readonly("dim", &LogGrid::dim)
      .def("axis", [](const LogGrid& g, std::size_t i) {
        std::vector<double> y(g.N.at(i));
        for (std::size_t k = 0; k < y.size(); ++k) y[k] = g.y(i, k);
        return y;
      })
      .def("reflected", &reflected_grid)
      .def(py::self == py::self);

  py::class_<GridFunction>(m, "GridFunction")
      .def(py::init(&make_grid_function), py::arg("grid"), py::arg("values"))
      .def_static("family", [](const LogGrid& g, const std::string& name, const Params& params) {
        return GridFunction::sample(g, synthetic_family(name, g.dim(), params));
      }, py::arg("grid"), py::arg("name"), py::arg("params") = Params{})
      .def_property_readonly("grid", &GridFunction::grid)
      .def_property_readonly("values", &grid_values)
      .def("save", &GridFunction::save)
      .def_static("load", &GridFunction::load);

  py::class_<KernelSpec>(m, "KernelSpec")
      .def_static("profit", &KernelSpec::profit, py::arg("p0"))
      .def_static("exponential", &KernelSpec::exponential)
      .def_static("two_exponential", &two_exponential_kernel, py::arg("dy") = 0.005)
      .def("__call__", &KernelSpec::operator())
      .def("mellin", [](const KernelSpec& h, cplx s) { return kernel_mellin(h, s); })
      .def("__repr__", &KernelSpec::describe);

  py::enum_<RadonScheme>(m, "RadonScheme")
      .value("volume_difference", RadonScheme::VolumeDifference)
      .value("level_curve", RadonScheme::LevelCurve)
      .value("ray_chart", RadonScheme::RayChart);

  m.def("gamma", [](cplx z) { return complex_gamma(z); });
  m.def("mellin_expcost_closed", [](const CostExpr& q, std::vector<cplx> z) { return mellin_expcost_closed(q, z); });

  m.def(
      "radon_forward",
      [](const GridFunction& f, const CostExpr& q, std::vector<double> p, RadonScheme scheme) {
        return radon_forward(f, q, p, {.scheme = scheme});
      },
      py::arg("f"), py::arg("q"), py::arg("p"), py::arg("scheme") = RadonScheme::VolumeDifference);
  m.def(
      "rhq_forward",
      [](const GridFunction& f, const CostExpr& q, const KernelSpec& h, std::vector<double> p) {
        return rhq_forward(f, q, h, p);
      },
      py::arg("f"), py::arg("q"), py::arg("h"), py::arg("p"));
  m.def(
      "profit_forward",
      [](const GridFunction& f, const CostExpr& q, double p0, std::vector<double> p) {
        return profit_forward(f, q, p0, p);
      },
      py::arg("f"), py::arg("q"), py::arg("p0"), py::arg("p"));
  m.def(
      "forward_batch",
      [](const GridFunction& f, const CostExpr& q, const LogGrid& pgrid, const KernelSpec* h, double p0) {
        auto b = forward_batch(f, q, pgrid, h, p0);
        py::dict d;
        d["radon"] = b.radon;
        d["profit"] = b.profit;
        if (h) d["kernel"] = b.kernel;
        return d;
      },
      py::arg("f"), py::arg("q"), py::arg("pgrid"), py::arg("h") = nullptr, py::arg("p0") = 1.0);
  m.def(
      "weighted_norm",
      [](const GridFunction& f, const py::object& r, std::vector<double> c) {
        return weighted_norm(f, {r_from(r), std::move(c)});
      },
      py::arg("f"), py::arg("r"), py::arg("c"));
  m.def(
      "prop1_check",
      [](const GridFunction& f, const CostExpr& q, const KernelSpec* h, const py::object& r, std::vector<double> c,
         double p0) {
        const auto rep = prop1_check(f, q, h, r_from(r), c, p0);
        py::list lines;
        for (const auto& l : rep.lines) {
          py::dict d;
          d["name"] = l.name;
          d["lhs"] = l.lhs;
          d["rhs"] = l.rhs;
          d["slack"] = l.slack();
          lines.append(d);
        }
        return lines;
      },
      py::arg("f"), py::arg("q"), py::arg("h"), py::arg("r"), py::arg("c"), py::arg("p0") = 1.0);
  m.def(
      "coarea_check",
      [](const GridFunction& f, const CostExpr& q, std::vector<double> p) { return coarea_check(f, q, p); },
      py::arg("f"), py::arg("q"), py::arg("p"));

  m.def(
      "invert",
      [](const std::string& mode, const GridFunction& g, const CostExpr& q, std::vector<double> c, double epsilon,
         const GridFunction* truth, double p0, const KernelSpec* h) {
        const InversionOptions opts{.c = std::move(c), .epsilon = epsilon};
        InversionResult res;
        if (mode == "radon") {
          res = invert_radon(g, q, opts, truth);
        } else if (mode == "profit") {
          res = invert_profit(g, p0, q, opts, truth);
        } else if (mode == "kernel") {
          if (!h) fail(ErrorKind::Argument, "kernel inversion needs h");
          res = invert_kernel(g, q, *h, opts, truth);
        } else {
          fail(ErrorKind::Argument, "unknown mode '" + mode + "'");
        }
        return py::make_tuple(res.estimate, to_py(res.report.to_json()));
      },
      py::arg("mode"), py::arg("g"), py::arg("q"), py::arg("c") = std::vector<double>{}, py::arg("epsilon") = 1e-4,
      py::arg("truth") = nullptr, py::arg("p0") = 1.0, py::arg("h") = nullptr,
      "Returns (estimate, report) for mode 'radon', 'profit' or 'kernel'.");

  m.def(
      "zero_scan",
      [](const CostExpr& q, std::vector<double> c, double radius, std::size_t resolution) {
        return to_py(zero_scan(q, c, radius, resolution).to_json());
      },
      py::arg("q"), py::arg("c"), py::arg("radius") = 20.0, py::arg("resolution") = 128);
  m.def(
      "kernel_zero_scan",
      [](const KernelSpec& h, double alpha, double radius, std::size_t resolution) {
        return to_py(kernel_zero_scan(h, alpha, radius, resolution).to_json());
      },
      py::arg("h"), py::arg("alpha"), py::arg("radius") = 8.0, py::arg("resolution") = 256);
  m.def(
      "injectivity_report",
      [](const std::string& op, const CostExpr& q, const KernelSpec* h, std::vector<double> c, const py::object& r) {
        return to_py(injectivity_report(operator_kind_from_string(op), q, h, c, r_from(r)).to_json());
      },
      py::arg("operator"), py::arg("q"), py::arg("h"), py::arg("c"), py::arg("r") = 2);

  m.def("demo_scene_text", &demo_scene_text);
  m.def("tolerances", [] { return to_py(tolerance_table()); });
  m.def(
      "selftest",
      [](const std::string& level) {
        if (level != "quick" && level != "full") fail(ErrorKind::Argument, "level must be 'quick' or 'full'");
        CheckList checks;
        {
          py::gil_scoped_release release;
          checks = run_selftest(level == "quick" ? SelftestLevel::Quick : SelftestLevel::Full);
        }
        py::list out;
        for (const auto& c : checks) {
          py::dict d;
          d["criterion"] = c.criterion;
          d["identity"] = c.identity;
          d["residual"] = c.residual;
          d["tolerance"] = c.tolerance;
          d["pass"] = c.pass;
          d["detail"] = c.detail;
          out.append(d);
        }
        return out;
      },
      py::arg("level") = "quick");
}
