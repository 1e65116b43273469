#pragma once

#include <vector>

#include "cmcprobe/surface_geometry.hpp"

namespace cmcprobe {

struct FunctionalReport {
    double area = 0.0;
    double willmore = 0.0;            // integral H^2 dmu
    double hawking = 0.0;
    double cy_lhs = 0.0;              // (2/3) integral (R + |h0|^2) dmu
    double cy_rhs = 0.0;              // 16 pi - willmore
    double dlm_lambda = 0.0;
    double dlm_ratio = 0.0;           // NaN on surfaces with vanishing Euclidean tracefree energy
    double minkowski_deficit = 0.0;
    double flux = 0.0;
    double r0 = 0.0;
    double H_mean = 0.0;

    double cy_margin() const { return cy_rhs - cy_lhs; }
};

FunctionalReport compute_report(const GeometryCache& cache);

double hawking_mass(const GeometryCache& cache);

struct CYDeficit {
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
};

CYDeficit cy_deficit(const GeometryCache& cache, const MetricModel& model);
CYDeficit cy_deficit(const GeometryCache& cache);

struct DLMRatio {
    double lambda = 0.0;
    double ratio = 0.0;
};

// Euclidean tracefree energy below which the ratio is undefined.
inline constexpr double kDLMRoundThreshold = 1e-14;

// Throws PreconditionError on (numerically) round input.
DLMRatio dlm_ratio(const GeometryCache& cache);

double minkowski_deficit(const GeometryCache& cache);

// (1/2pi)(int f)^2 - 2 int f^2 + int |grad f|^2 from the coefficients; requires scale 1.
double minkowski_quadratic_form(const SphereGraph& graph);
double minkowski_quadratic_form(const Eigen::VectorXd& coeffs, int L);

// Q(f) - (1/3)(int f^2 + int |grad f|^2).
double quadratic_form_gap(const Eigen::VectorXd& coeffs, int L);

// max(0, -deficit) / integral |h0_bar|^2 dmu_bar.
double sharp_minkowski_ratio(const GeometryCache& cache);

struct TaylorFit {
    double Q = 0.0;
    double alpha = 0.0;
    double remainder_order = 0.0;
    std::vector<double> epsilons;
    std::vector<double> deficits;
    std::vector<double> coefficients;  // D / eps^2 = c0 + c1 eps + ...
};

// Fits minkowski_deficit(eps * mode) on the unit sphere against alpha Q eps^2 + remainder.
TaylorFit taylor_prefactor_fit(const Eigen::VectorXd& mode, int L, const std::vector<double>& epsilons);
TaylorFit taylor_prefactor_fit(int l, int m, const std::vector<double>& epsilons);

struct BochnerCheck {
    double hessian_energy = 0.0;    // int |Hess f|^2
    double tracefree_energy = 0.0;  // int |Hess f - (Lap f / 2) g|^2
    double gradient_energy = 0.0;   // int |grad f|^2
    double residual = 0.0;          // |hessian - 2 tracefree - gradient|
};

BochnerCheck bochner_tracefree_check(const SphereGraph& graph);

// integral of (X . nu_bar)^2 / |x|^6 dmu_bar
double flux_integral(const GeometryCache& cache);
// integral of (X . nu_bar) / |x|^3 dmu_bar, zero for surfaces not enclosing the origin
double divergence_flux(const GeometryCache& cache);

struct InequalityLedger {
    double tau = 0.0;
    double delta = 0.0;
    double gamma = 1.0;
    bool gamma_measured = false;

    double coefficient = 0.0;       // (2/3)(1-delta)/(1+delta) + 2 - tau Gamma
    double tracefree_bar = 0.0;     // integral |h0_bar|^2 dmu_bar
    double tracefree_term = 0.0;
    double flux = 0.0;
    double favorable_term = 0.0;    // 4 m^2 (1 - 2/tau) flux
    double lhs = 0.0;

    double err_x5 = 0.0;            // integral |x|^-5 dmu
    double err_h2_x3 = 0.0;         // integral |h|^2 |x|^-3 dmu
    double err_Hh0_x2 = 0.0;        // integral H |h0| |x|^-2 dmu
    double err_H_x3 = 0.0;          // integral H |x|^-3 dmu
    double err_H2_x2 = 0.0;         // integral H^2 |x|^-2 dmu
    double error_sum = 0.0;

    double r0 = 0.0;
    double H_mean = 0.0;
    double r0H = 0.0;
    double divergence_residual = 0.0;
};

// Throws PreconditionError when tau, delta are out of range or the surface encloses the origin.
InequalityLedger big_inequality_audit(const GeometryCache& cache, const MetricModel& model, double tau, double delta);

}  // namespace cmcprobe
