#pragma once

#include <string>
#include <vector>

#include "cmcprobe/metric_models.hpp"
#include "cmcprobe/sphere_graph.hpp"
#include "cmcprobe/spherical_harmonics.hpp"

namespace cmcprobe {

// Fundamental forms of one surface at one node, expressed on the graph frame
// F_a = d/de_a (center + scale (1 + f) u) where (e_1, e_2) = (e_theta, e_phi).
struct SurfaceForms {
    std::vector<double> gam11, gam12, gam22;  // induced metric
    std::vector<double> h11, h12, h22;        // second fundamental form
    std::vector<double> H;                    // mean curvature, 2/r on round spheres
    std::vector<double> h_norm2;              // |h|^2
    std::vector<double> tracefree_norm2;      // |h|^2 - H^2/2
    std::vector<double> dmu;                  // quadrature weight times area density
    std::vector<double> K;                    // Gauss curvature
    std::vector<Vec3> nu;                     // unit normal (vector)

    double area() const;
    double integrate(const std::vector<double>& values) const;
};

// Per-node geometry of a graph surface in a background metric, with the
// Euclidean (barred) quantities stored alongside.
struct GeometryCache {
    SphereGraph graph;
    MetricModel model;
    QuadratureGrid grid;
    NodeFields fields;

    std::vector<Vec3> x{};       // embedding points
    std::vector<Vec3> F1{}, F2{};  // frame tangent vectors
    std::vector<double> radius{};

    SurfaceForms g{};    // ambient metric
    SurfaceForms bar{};  // Euclidean metric

    std::vector<double> conformal{};   // (1 + m/2|x|)^4
    std::vector<double> scalar{};      // R
    std::vector<double> ric_nn{};      // Ric(nu, nu)
    std::vector<double> sectional{};   // Rm(F1, F2, F1, F2) / det gamma

    int size() const { return static_cast<int>(x.size()); }
};

GeometryCache build_geometry(const SphereGraph& graph, const MetricModel& model, const QuadratureGrid& grid);
GeometryCache build_geometry(const SphereGraph& graph, const MetricModel& model);

// (dmu - phi^4 (1 + tr_Sigma sigma / 2) dmu_bar) / dmu_bar per node.
std::vector<double> area_element_comparison_residual(const GeometryCache& cache);

// phi^2 H minus the first-order conformal/perturbative prediction for it, per node.
std::vector<double> mean_curvature_comparison_residual(const GeometryCache& cache);

struct GaussCurvatureCheck {
    double integral = 0.0;           // integral of K dmu
    double defect = 0.0;             // integral - 4 pi
    double gauss_equation_residual = 0.0;
};

GaussCurvatureCheck gauss_curvature_check(const GeometryCache& cache);

struct GeometrySummary {
    double area = 0.0;
    double willmore = 0.0;          // integral H^2 dmu
    double tracefree_energy = 0.0;  // integral |h - H/2 gamma|^2 dmu
    double gauss_integral = 0.0;
    double H_min = 0.0;
    double H_max = 0.0;
};

GeometrySummary summarize(const GeometryCache& cache);
std::string to_json(const GeometrySummary& summary);

}  // namespace cmcprobe
