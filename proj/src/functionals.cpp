#include "cmcprobe/functionals.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "cmcprobe/errors.hpp"

namespace cmcprobe {

namespace {

double integrate_bar(const GeometryCache& c, auto&& integrand) {
    double s = 0.0;
    for (int n = 0; n < c.size(); ++n) s += integrand(n) * c.bar.dmu[n];
    return s;
}

double integrate_g(const GeometryCache& c, auto&& integrand) {
    double s = 0.0;
    for (int n = 0; n < c.size(); ++n) s += integrand(n) * c.g.dmu[n];
    return s;
}

double willmore(const GeometryCache& c) {
    return integrate_g(c, [&](int n) { return c.g.H[n] * c.g.H[n]; });
}

const QuadratureGrid& grid_for_degree(int L) {
    static const QuadratureGrid standard = QuadratureGrid::standard();
    return L <= standard.capacity() ? standard : refined_grid(L);
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const int n = static_cast<int>(x.size());
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace

double hawking_mass(const GeometryCache& cache) {
    const double area = cache.g.area();
    return std::sqrt(area / (16.0 * M_PI)) * (1.0 - willmore(cache) / (16.0 * M_PI));
}

CYDeficit cy_deficit(const GeometryCache& cache, const MetricModel& model) {
    CYDeficit out;
    const bool flat = model.kind() == MetricKind::euclidean;
    out.lhs = (2.0 / 3.0) * integrate_g(cache, [&](int n) {
                  const double R = flat ? 0.0 : scalar_curvature(model, cache.x[n]);
                  return R + cache.g.tracefree_norm2[n];
              });
    out.rhs = 16.0 * M_PI - willmore(cache);
    out.margin = out.rhs - out.lhs;
    return out;
}

CYDeficit cy_deficit(const GeometryCache& cache) { return cy_deficit(cache, cache.model); }

DLMRatio dlm_ratio(const GeometryCache& cache) {
    const double area = cache.bar.area();
    const double total_H = cache.bar.integrate(cache.bar.H);
    const double tf = cache.bar.integrate(cache.bar.tracefree_norm2);
    if (!(tf > kDLMRoundThreshold)) {
        std::ostringstream os;
        os << "De Lellis-Mueller ratio is undefined on a round sphere (tracefree energy " << tf << ")";
        throw PreconditionError(os.str());
    }
    DLMRatio out;
    out.lambda = 2.0 * area / total_H;
    const double target = 2.0 / out.lambda;
    const double spread = integrate_bar(cache, [&](int n) {
        const double d = cache.bar.H[n] - target;
        return d * d;
    });
    out.ratio = spread / (2.0 * tf);
    return out;
}

double minkowski_deficit(const GeometryCache& cache) {
    return cache.bar.integrate(cache.bar.H) - std::sqrt(16.0 * M_PI * cache.bar.area());
}

double minkowski_quadratic_form(const Eigen::VectorXd& coeffs, int L) {
    double q = 2.0 * coeffs[0] * coeffs[0];
    for (int l = 0; l <= L; ++l)
        for (int m = -l; m <= l; ++m) {
            const double c = coeffs[mode_index(l, m)];
            q += (l * (l + 1.0) - 2.0) * c * c;
        }
    return q;
}

double minkowski_quadratic_form(const SphereGraph& graph) {
    if (std::abs(graph.scale() - 1.0) > 1e-12)
        throw PreconditionError("minkowski_quadratic_form expects a graph over the unit sphere");
    return minkowski_quadratic_form(graph.coeffs(), graph.degree());
}

double quadratic_form_gap(const Eigen::VectorXd& coeffs, int L) {
    double norms = 0.0;
    for (int l = 0; l <= L; ++l)
        for (int m = -l; m <= l; ++m) {
            const double c = coeffs[mode_index(l, m)];
            norms += (1.0 + l * (l + 1.0)) * c * c;
        }
    return minkowski_quadratic_form(coeffs, L) - norms / 3.0;
}

double sharp_minkowski_ratio(const GeometryCache& cache) {
    const double tf = cache.bar.integrate(cache.bar.tracefree_norm2);
    return std::max(0.0, -minkowski_deficit(cache)) / tf;
}

TaylorFit taylor_prefactor_fit(const Eigen::VectorXd& mode, int L, const std::vector<double>& epsilons) {
    TaylorFit fit;
    fit.Q = minkowski_quadratic_form(mode, L);
    if (std::abs(fit.Q) < 1e-14 * std::max(1.0, mode.squaredNorm()))
        throw FitError("mode has vanishing quadratic form");
    const int n = static_cast<int>(epsilons.size());
    if (n < 4) throw FitError("Taylor fit needs at least 4 epsilon values");
    for (double e : epsilons)
        if (!(e > 0.0)) throw FitError("epsilon values must be positive");

    const QuadratureGrid& grid = grid_for_degree(L);
    fit.epsilons = epsilons;
    bool any = false;
    for (double e : epsilons) {
        const SphereGraph graph(Vec3::Zero(), 1.0, L, e * mode);
        const double d = minkowski_deficit(build_geometry(graph, MetricModel::euclidean(), grid));
        fit.deficits.push_back(d);
        any = any || std::abs(d) >= 1e-13;
    }
    if (!any) throw FitError("all deficits are below the 1e-13 noise floor");

    const int p = std::min(4, n - 1);
    Eigen::MatrixXd A(n, p);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        const double e = epsilons[i];
        for (int k = 0; k < p; ++k) A(i, k) = std::pow(e, k);
        y[i] = fit.deficits[i] / (e * e);
    }
    const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
    fit.coefficients.assign(c.data(), c.data() + p);
    fit.alpha = c[0] / fit.Q;

    std::vector<double> lx, ly;
    for (int i = 0; i < n; ++i) {
        const double e = epsilons[i];
        const double rem = std::abs(fit.deficits[i] - fit.alpha * fit.Q * e * e);
        if (rem > 0.0) {
            lx.push_back(std::log(e));
            ly.push_back(std::log(rem));
        }
    }
    fit.remainder_order = lx.size() >= 2 ? slope(lx, ly) : std::numeric_limits<double>::infinity();
    return fit;
}

TaylorFit taylor_prefactor_fit(int l, int m, const std::vector<double>& epsilons) {
    if (l < 0 || std::abs(m) > l) throw FitError("invalid harmonic index");
    const int L = std::max(l, 1);
    Eigen::VectorXd mode = Eigen::VectorXd::Zero(mode_count(L));
    mode[mode_index(l, m)] = 1.0;
    return taylor_prefactor_fit(mode, L, epsilons);
}

BochnerCheck bochner_tracefree_check(const SphereGraph& graph) {
    const int L = graph.degree();
    const QuadratureGrid& grid = refined_grid(L);
    const NodeFields nf = synthesize(graph, grid);
    BochnerCheck out;
    for (int n = 0; n < grid.size(); ++n) {
        const double w = grid.weights()[n];
        const double a = nf.hess11[n], b = nf.hess12[n], d = nf.hess22[n];
        const double half = 0.5 * (a + d);
        out.hessian_energy += w * (a * a + 2.0 * b * b + d * d);
        out.tracefree_energy += w * ((a - half) * (a - half) + 2.0 * b * b + (d - half) * (d - half));
        out.gradient_energy += w * nf.grad_norm2(n);
    }
    out.residual = std::abs(out.hessian_energy - 2.0 * out.tracefree_energy - out.gradient_energy);
    return out;
}

double flux_integral(const GeometryCache& cache) {
    return integrate_bar(cache, [&](int n) {
        const double xn = cache.x[n].dot(cache.bar.nu[n]);
        const double r2 = cache.x[n].squaredNorm();
        return xn * xn / (r2 * r2 * r2);
    });
}

double divergence_flux(const GeometryCache& cache) {
    return integrate_bar(cache, [&](int n) {
        const double r = cache.radius[n];
        return cache.x[n].dot(cache.bar.nu[n]) / (r * r * r);
    });
}

FunctionalReport compute_report(const GeometryCache& cache) {
    FunctionalReport rep;
    rep.area = cache.g.area();
    rep.willmore = willmore(cache);
    rep.hawking = std::sqrt(rep.area / (16.0 * M_PI)) * (1.0 - rep.willmore / (16.0 * M_PI));
    const CYDeficit cy = cy_deficit(cache);
    rep.cy_lhs = cy.lhs;
    rep.cy_rhs = cy.rhs;
    rep.dlm_lambda = 2.0 * cache.bar.area() / cache.bar.integrate(cache.bar.H);
    try {
        rep.dlm_ratio = dlm_ratio(cache).ratio;
    } catch (const PreconditionError&) {
        rep.dlm_ratio = std::numeric_limits<double>::quiet_NaN();
    }
    rep.minkowski_deficit = minkowski_deficit(cache);
    rep.flux = flux_integral(cache);
    rep.r0 = cache.graph.inner_radius();
    rep.H_mean = cache.g.integrate(cache.g.H) / rep.area;
    return rep;
}

InequalityLedger big_inequality_audit(const GeometryCache& cache, const MetricModel& model, double tau,
                                      double delta) {
    if (!(tau > 2.0 && tau < 8.0 / 3.0)) throw PreconditionError("tau must lie in (2, 8/3)");
    if (!(delta > 0.0 && delta < 1.0)) throw PreconditionError("delta must lie in (0, 1)");
    if (cache.graph.encloses(Vec3::Zero()))
        throw PreconditionError("inequality audit requires a surface that does not enclose the origin");

    InequalityLedger led;
    led.tau = tau;
    led.delta = delta;
    led.tracefree_bar = cache.bar.integrate(cache.bar.tracefree_norm2);
    if (led.tracefree_bar > kDLMRoundThreshold) {
        led.gamma = dlm_ratio(cache).ratio;
        led.gamma_measured = true;
    }
    led.coefficient = (2.0 / 3.0) * (1.0 - delta) / (1.0 + delta) + 2.0 - tau * led.gamma;
    led.tracefree_term = led.coefficient * led.tracefree_bar;
    led.flux = flux_integral(cache);
    const double m = model.mass();
    led.favorable_term = 4.0 * m * m * (1.0 - 2.0 / tau) * led.flux;
    led.lhs = led.tracefree_term + led.favorable_term;

    led.err_x5 = integrate_g(cache, [&](int n) { return std::pow(cache.radius[n], -5.0); });
    led.err_h2_x3 = integrate_g(cache, [&](int n) { return cache.g.h_norm2[n] * std::pow(cache.radius[n], -3.0); });
    led.err_Hh0_x2 = integrate_g(cache, [&](int n) {
        const double h0 = std::sqrt(std::max(0.0, cache.g.tracefree_norm2[n]));
        return std::abs(cache.g.H[n]) * h0 / (cache.radius[n] * cache.radius[n]);
    });
    led.err_H_x3 = integrate_g(cache, [&](int n) { return std::abs(cache.g.H[n]) * std::pow(cache.radius[n], -3.0); });
    led.err_H2_x2 = integrate_g(cache, [&](int n) {
        return cache.g.H[n] * cache.g.H[n] / (cache.radius[n] * cache.radius[n]);
    });
    led.error_sum = led.err_x5 + led.err_h2_x3 + led.err_Hh0_x2 + led.err_H_x3 + led.err_H2_x2;

    led.r0 = cache.graph.inner_radius();
    led.H_mean = cache.g.integrate(cache.g.H) / cache.g.area();
    led.r0H = led.r0 * led.H_mean;
    led.divergence_residual = std::abs(divergence_flux(cache));
    return led;
}

}  // namespace cmcprobe
