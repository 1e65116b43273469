#pragma once

#include <string>
#include <vector>

#include "cmcprobe/metric_models.hpp"
#include "cmcprobe/sphere_graph.hpp"
#include "cmcprobe/spherical_harmonics.hpp"

namespace cmcprobe {

struct SolveOptions {
    double tolerance = 1e-9;           // max-node |H - H_target|
    int max_iterations = 60;
    int divergence_window = 5;         // successive damped steps with residual growth
    double backtrack_factor = 0.5;
    double backtrack_floor = 1.0 / 1024.0;
    bool finite_difference_jacobian = false;
    double finite_difference_step = 1e-6;
    bool compute_stability = true;
    int n_theta = 32;
    int n_phi = 64;
};

struct SolveReport {
    bool converged = false;
    int iterations = 0;
    double final_residual = 0.0;
    SphereGraph surface;
    double H_target = 0.0;
    double stability_eigenvalue = 0.0;
    bool stable = false;
    bool stability_computed = false;
    double certified_residual = 0.0;   // max-node residual on the 2x refined grid
    std::string diagnostic;
    std::vector<double> residual_history;
};

inline constexpr double kStabilityThreshold = -1e-8;

// Mean curvature of the graph at every node of the grid.
std::vector<double> node_mean_curvature(const SphereGraph& graph, const MetricModel& model,
                                        const QuadratureGrid& grid);

// Derivative of the node mean curvatures with respect to the graph coefficients,
// projected on the harmonic basis: J(i, j) = sum_n w_n Y_i(n) dH(n)/dc_j.
Eigen::MatrixXd mean_curvature_jacobian(const SphereGraph& graph, const MetricModel& model,
                                        const QuadratureGrid& grid);

SolveReport solve_cmc(const SphereGraph& initial, const MetricModel& model, double H_target,
                      const SolveOptions& opts = {});

// k smallest eigenvalues of the volume-constrained second variation of area, ascending.
std::vector<double> jacobi_spectrum(const SphereGraph& surface, const MetricModel& model, int k,
                                    const QuadratureGrid& grid);
std::vector<double> jacobi_spectrum(const SphereGraph& surface, const MetricModel& model, int k);
// Throws PreconditionError for non-converged reports.
std::vector<double> stability_spectrum(const SolveReport& report, const MetricModel& model, int k);

// Mean curvature of the centered coordinate sphere |x| = r in a background with mass m.
double centered_sphere_mean_curvature(double mass, double r);
// Radius of the centered coordinate sphere with the given mean curvature (outer branch).
double centered_sphere_radius(double mass, double H);

struct FoliationTrace {
    std::vector<SolveReport> leaves;
    MetricModel metric;
    bool truncated = false;
    std::string diagnostic;
};

FoliationTrace trace_foliation(const MetricModel& model, double H_start, double H_end, int n_leaves, int L = 24,
                               const SolveOptions& opts = {});

}  // namespace cmcprobe
