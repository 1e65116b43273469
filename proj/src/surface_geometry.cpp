#include "cmcprobe/surface_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cmcprobe/detail/node_geometry.hpp"
#include "cmcprobe/errors.hpp"

namespace cmcprobe {

namespace {

void resize_forms(SurfaceForms& s, int n) {
    for (auto* v : {&s.gam11, &s.gam12, &s.gam22, &s.h11, &s.h12, &s.h22, &s.H, &s.h_norm2, &s.tracefree_norm2,
                    &s.dmu, &s.K})
        v->assign(n, 0.0);
    s.nu.assign(n, Vec3::Zero());
}

void store(SurfaceForms& s, int n, const detail::NodeGeometry<double>& ng, double weight) {
    s.gam11[n] = ng.gam11;
    s.gam12[n] = ng.gam12;
    s.gam22[n] = ng.gam22;
    s.h11[n] = ng.h11;
    s.h12[n] = ng.h12;
    s.h22[n] = ng.h22;
    s.H[n] = ng.H;
    s.h_norm2[n] = ng.h_norm2;
    s.tracefree_norm2[n] = ng.h_norm2 - 0.5 * ng.H * ng.H;
    s.dmu[n] = weight * ng.density;
    s.nu[n] = Vec3(ng.nu[0], ng.nu[1], ng.nu[2]);
}

Vec3 to_vec(const detail::Vec3T<double>& v) { return Vec3(v[0], v[1], v[2]); }

void require_asymptotic(const GeometryCache& cache, const char* what) {
    if (cache.model.kind() == MetricKind::euclidean) {
        std::ostringstream os;
        os << what << " requires a schwarzschild or perturbed metric";
        throw PreconditionError(os.str());
    }
}

}  // namespace

double SurfaceForms::area() const {
    double a = 0.0;
    for (double w : dmu) a += w;
    return a;
}

double SurfaceForms::integrate(const std::vector<double>& values) const {
    double s = 0.0;
    for (std::size_t n = 0; n < dmu.size(); ++n) s += values[n] * dmu[n];
    return s;
}

GeometryCache build_geometry(const SphereGraph& graph, const MetricModel& model, const QuadratureGrid& grid) {
    grid.require_capacity(graph.degree());
    GeometryCache c{graph, model, grid, synthesize(graph, grid)};
    const int N = grid.size();
    c.x.resize(N);
    c.F1.resize(N);
    c.F2.resize(N);
    c.radius.resize(N);
    resize_forms(c.g, N);
    resize_forms(c.bar, N);
    c.conformal.assign(N, 1.0);
    c.scalar.assign(N, 0.0);
    c.ric_nn.assign(N, 0.0);
    c.sectional.assign(N, 0.0);

    const bool flat = model.kind() == MetricKind::euclidean;
    const double s = graph.scale();
    const MetricJet identity;
    const NodeFields& nf = c.fields;
    for (int n = 0; n < N; ++n) {
        const detail::NodeFrame fr{grid.nodes()[n], grid.e_theta()[n], grid.e_phi()[n]};
        const double f0 = nf.f[n];
        const Vec3 x = graph.center() + s * (1.0 + f0) * fr.u;
        c.x[n] = x;
        c.radius[n] = x.norm();
        const MetricJet jet = flat ? identity : model.evaluate(x);
        const detail::GraphJet<double> q{f0, nf.grad1[n], nf.grad2[n], nf.hess11[n], nf.hess12[n], nf.hess22[n]};

        const auto eb = detail::node_geometry(fr, s, identity, f0, q);
        if (!(eb.det_gamma > 0.0) || !std::isfinite(eb.det_gamma)) {
            std::ostringstream os;
            os << "degenerate Euclidean induced metric at node " << n;
            throw GeometryError(os.str(), n);
        }
        store(c.bar, n, eb, grid.weights()[n]);
        c.bar.K[n] = (eb.h11 * eb.h22 - eb.h12 * eb.h12) / eb.det_gamma;
        c.F1[n] = to_vec(eb.F1);
        c.F2[n] = to_vec(eb.F2);

        if (flat) {
            store(c.g, n, eb, grid.weights()[n]);
            c.g.K[n] = c.bar.K[n];
            continue;
        }

        const auto eg = detail::node_geometry(fr, s, jet, f0, q);
        if (!(eg.det_gamma > 0.0) || !std::isfinite(eg.det_gamma)) {
            std::ostringstream os;
            os << "degenerate induced metric at node " << n;
            throw GeometryError(os.str(), n);
        }
        store(c.g, n, eg, grid.weights()[n]);
        const Curvature curv = curvature_from_jet(jet);
        const Vec3 nu = c.g.nu[n];
        c.sectional[n] = curv.rm(c.F1[n], c.F2[n]) / eg.det_gamma;
        c.g.K[n] = c.sectional[n] + (eg.h11 * eg.h22 - eg.h12 * eg.h12) / eg.det_gamma;
        c.scalar[n] = curv.scalar;
        c.ric_nn[n] = nu.dot(curv.ricci * nu);
        c.conformal[n] = model.conformal_factor(x);
    }
    return c;
}

GeometryCache build_geometry(const SphereGraph& graph, const MetricModel& model) {
    return build_geometry(graph, model, QuadratureGrid::standard());
}

std::vector<double> area_element_comparison_residual(const GeometryCache& cache) {
    require_asymptotic(cache, "area element comparison");
    const int N = cache.size();
    std::vector<double> out(N);
    for (int n = 0; n < N; ++n) {
        const Mat3 sigma = cache.model.perturbation_jet(cache.x[n]).g;
        const Vec3& A = cache.F1[n];
        const Vec3& B = cache.F2[n];
        const double det = cache.g.gam11[n] * cache.g.gam22[n] - cache.g.gam12[n] * cache.g.gam12[n];
        const double trace = (cache.g.gam22[n] * A.dot(sigma * A) - 2.0 * cache.g.gam12[n] * A.dot(sigma * B) +
                              cache.g.gam11[n] * B.dot(sigma * B)) /
                             det;
        const double predicted = cache.conformal[n] * (1.0 + 0.5 * trace) * cache.bar.dmu[n];
        out[n] = (cache.g.dmu[n] - predicted) / cache.bar.dmu[n];
    }
    return out;
}

std::vector<double> mean_curvature_comparison_residual(const GeometryCache& cache) {
    require_asymptotic(cache, "mean curvature comparison");
    const int N = cache.size();
    const double m = cache.model.mass();
    std::vector<double> out(N);
    for (int n = 0; n < N; ++n) {
        const Vec3& x = cache.x[n];
        const double r = cache.radius[n];
        const double phi = 1.0 + 0.5 * m / r;
        const MetricJet sj = cache.model.perturbation_jet(x);
        const Vec3 F[2] = {cache.F1[n], cache.F2[n]};
        const Vec3& nu = cache.g.nu[n];
        const double det = cache.g.gam11[n] * cache.g.gam22[n] - cache.g.gam12[n] * cache.g.gam12[n];
        const double inv[2][2] = {{cache.g.gam22[n] / det, -cache.g.gam12[n] / det},
                                  {-cache.g.gam12[n] / det, cache.g.gam11[n] / det}};
        const double h[2][2] = {{cache.g.h11[n], cache.g.h12[n]}, {cache.g.h12[n], cache.g.h22[n]}};

        auto dsigma = [&](const Vec3& dir) {
            Mat3 d = Mat3::Zero();
            for (int k = 0; k < 3; ++k) d += dir[k] * sj.dg[k];
            return d;
        };
        double sigma_h = 0.0, div_term = 0.0, normal_term = 0.0;
        const Mat3 dnu = dsigma(nu);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                double pull = 0.0;  // (gamma^-1 h gamma^-1)^{ab}
                for (int c = 0; c < 2; ++c)
                    for (int d = 0; d < 2; ++d) pull += inv[a][c] * h[c][d] * inv[d][b];
                sigma_h += pull * F[a].dot(sj.g * F[b]);
                div_term += inv[a][b] * nu.dot(dsigma(F[a]) * F[b]);
                normal_term += inv[a][b] * F[a].dot(dnu * F[b]);
            }
        const double H = cache.g.H[n];
        const double predicted = cache.bar.H[n] - (2.0 * m / (r * r * r * phi)) * x.dot(cache.bar.nu[n]) -
                                 sigma_h + 0.5 * H * nu.dot(sj.g * nu) - div_term + 0.5 * normal_term;
        out[n] = phi * phi * H - predicted;
    }
    return out;
}

GaussCurvatureCheck gauss_curvature_check(const GeometryCache& cache) {
    GaussCurvatureCheck out;
    out.integral = cache.g.integrate(cache.g.K);
    out.defect = out.integral - 4.0 * M_PI;
    double worst = 0.0;
    for (int n = 0; n < cache.size(); ++n) {
        const double H = cache.g.H[n];
        const double rhs = cache.scalar[n] - 2.0 * cache.ric_nn[n] - cache.g.tracefree_norm2[n] + 0.5 * H * H;
        worst = std::max(worst, std::abs(2.0 * cache.g.K[n] - rhs));
    }
    out.gauss_equation_residual = worst;
    return out;
}

GeometrySummary summarize(const GeometryCache& cache) {
    GeometrySummary s;
    s.area = cache.g.area();
    std::vector<double> H2(cache.size());
    for (int n = 0; n < cache.size(); ++n) H2[n] = cache.g.H[n] * cache.g.H[n];
    s.willmore = cache.g.integrate(H2);
    s.tracefree_energy = cache.g.integrate(cache.g.tracefree_norm2);
    s.gauss_integral = cache.g.integrate(cache.g.K);
    const auto [lo, hi] = std::minmax_element(cache.g.H.begin(), cache.g.H.end());
    s.H_min = *lo;
    s.H_max = *hi;
    return s;
}

std::string to_json(const GeometrySummary& s) {
    nlohmann::ordered_json j;
    j["area"] = s.area;
    j["willmore"] = s.willmore;
    j["tracefree_energy"] = s.tracefree_energy;
    j["gauss_integral"] = s.gauss_integral;
    j["H_min"] = s.H_min;
    j["H_max"] = s.H_max;
    return j.dump();
}

}  // namespace cmcprobe
