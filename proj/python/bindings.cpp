#include <optional>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cmcprobe/cmc_solver.hpp"
#include "cmcprobe/errors.hpp"
#include "cmcprobe/functionals.hpp"
#include "cmcprobe/harness.hpp"
#include "cmcprobe/serialization.hpp"
#include "cmcprobe/surface_geometry.hpp"

namespace py = pybind11;
using namespace cmcprobe;

namespace {

py::dict report_dict(const FunctionalReport& r) {
    py::dict d;
    d["area"] = r.area;
    d["willmore"] = r.willmore;
    d["hawking"] = r.hawking;
    d["cy_lhs"] = r.cy_lhs;
    d["cy_rhs"] = r.cy_rhs;
    d["cy_margin"] = r.cy_margin();
    d["dlm_lambda"] = r.dlm_lambda;
    d["dlm_ratio"] = r.dlm_ratio;
    d["minkowski_deficit"] = r.minkowski_deficit;
    d["flux"] = r.flux;
    d["r0"] = r.r0;
    d["H_mean"] = r.H_mean;
    return d;
}

ExperimentConfig config_from(const std::string& text, const std::string& out_dir) {
    ExperimentConfig c;
    parse_config_text(c, text);
    if (!out_dir.empty()) c.output_dir = out_dir;
    return c;
}

}  // namespace

PYBIND11_MODULE(_cmcprobe, m) {
    m.doc() = "Constant-mean-curvature surfaces in asymptotically flat metrics";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<MetricModel>(m, "MetricModel")
        .def_static("euclidean", &MetricModel::euclidean)
        .def_static("schwarzschild", &MetricModel::schwarzschild, py::arg("mass"))
        .def_static(
            "conformal",
            [](double mass, const std::vector<std::tuple<double, double, std::array<int, 3>>>& terms, double cutoff) {
                std::vector<ConformalTerm> cts;
                for (const auto& [decay, coef, powers] : terms) cts.push_back({decay, Monomial{coef, powers}});
                return conformal_perturbed(mass, cts, cutoff);
            },
            py::arg("mass"), py::arg("terms"), py::arg("cutoff") = 2.0,
            "u = 1 + m/(2r) + sum coef * n^powers * r^-decay; terms are (decay, coef, (a, b, c)).")
        .def_property_readonly("kind", [](const MetricModel& mm) { return to_string(mm.kind()); })
        .def_property_readonly("mass", &MetricModel::mass)
        .def("metric", [](const MetricModel& mm, const Vec3& x) { return mm.evaluate(x).g; })
        .def("scalar_curvature", [](const MetricModel& mm, const Vec3& x) { return scalar_curvature(mm, x); });

    py::class_<SphereGraph>(m, "SphereGraph")
        .def(py::init<Vec3, double, int, Eigen::VectorXd>(), py::arg("center"), py::arg("scale"), py::arg("degree"),
             py::arg("coeffs"))
        .def_static("round", &SphereGraph::round, py::arg("center"), py::arg("radius"), py::arg("degree"))
        .def_property_readonly("center", &SphereGraph::center)
        .def_property_readonly("scale", &SphereGraph::scale)
        .def_property_readonly("degree", &SphereGraph::degree)
        .def_property_readonly("coeffs", &SphereGraph::coeffs)
        .def_property_readonly("c1_norm", &SphereGraph::c1_norm)
        .def("coefficient", &SphereGraph::coefficient)
        .def("dilated", &SphereGraph::dilated)
        .def("point", &SphereGraph::point)
        .def("to_json", [](const SphereGraph& g) { return to_json(g).dump(); })
        .def_static("from_json", [](const std::string& s) { return graph_from_json(Json::parse(s)); });

    m.def("mode_index", &mode_index);
    m.def("mode_count", &mode_count);

    m.def(
        "functional_report",
        [](const SphereGraph& g, const MetricModel& mm) { return report_dict(compute_report(build_geometry(g, mm))); },
        py::arg("graph"), py::arg("model"));
    m.def(
        "hawking_mass", [](const SphereGraph& g, const MetricModel& mm) { return hawking_mass(build_geometry(g, mm)); },
        py::arg("graph"), py::arg("model"));
    m.def(
        "mean_curvature",
        [](const SphereGraph& g, const MetricModel& mm) { return build_geometry(g, mm).g.H; }, py::arg("graph"),
        py::arg("model"));

    m.def(
        "solve_cmc",
        [](const SphereGraph& g, const MetricModel& mm, double H, double tolerance, int max_iterations) {
            SolveOptions o;
            o.tolerance = tolerance;
            o.max_iterations = max_iterations;
            std::optional<SolveReport> result;
            {
                py::gil_scoped_release release;
                result.emplace(solve_cmc(g, mm, H, o));
            }
            const SolveReport& r = *result;
            py::dict d;
            d["converged"] = r.converged;
            d["iterations"] = r.iterations;
            d["final_residual"] = r.final_residual;
            d["certified_residual"] = r.certified_residual;
            d["stability_eigenvalue"] = r.stability_eigenvalue;
            d["stable"] = r.stable;
            d["surface"] = r.surface;
            d["diagnostic"] = r.diagnostic;
            return d;
        },
        py::arg("initial"), py::arg("model"), py::arg("H_target"), py::arg("tolerance") = 1e-9,
        py::arg("max_iterations") = 60);

    m.def("centered_sphere_radius", &centered_sphere_radius, py::arg("mass"), py::arg("H"));
    m.def("centered_sphere_mean_curvature", &centered_sphere_mean_curvature, py::arg("mass"), py::arg("r"));

    m.def(
        "taylor_fit",
        [](int l, int mm, const std::vector<double>& eps) {
            const TaylorFit f = taylor_prefactor_fit(l, mm, eps);
            py::dict d;
            d["Q"] = f.Q;
            d["alpha"] = f.alpha;
            d["remainder_order"] = f.remainder_order;
            d["deficits"] = f.deficits;
            return d;
        },
        py::arg("l"), py::arg("m"), py::arg("epsilons"));

    m.def(
        "run",
        [](const std::string& command, const std::string& config_text, const std::string& out_dir) {
            const ExperimentConfig c = config_from(config_text, out_dir);
            py::gil_scoped_release release;
            if (command == "verify") return cmd_verify(c);
            if (command == "foliate") return cmd_foliate(c);
            if (command == "scan") return cmd_scan(c);
            if (command == "expand") return cmd_expand(c);
            throw ConfigError("command", "unknown command '" + command + "'");
        },
        py::arg("command"), py::arg("config") = "", py::arg("out_dir") = "",
        "Runs a harness subcommand with key = value configuration text; returns the exit status.");
}
