#include <cmath>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "cmcprobe/errors.hpp"
#include "cmcprobe/functionals.hpp"

using namespace cmcprobe;

namespace {

Eigen::VectorXd mode(int L, int l, int m, double v) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(mode_count(L));
    c[mode_index(l, m)] = v;
    return c;
}

SphereGraph unit_graph(int L, int l, int m, double eps) { return SphereGraph(Vec3::Zero(), 1.0, L, mode(L, l, m, eps)); }

// Integral over the unit sphere of F(n) in spherical coordinates by nested adaptive Gauss-Kronrod.
template <class F>
double sphere_integral(F&& fn) {
    using boost::math::quadrature::gauss_kronrod;
    auto inner = [&](double t) {
        auto ring = [&](double p) {
            const Vec3 n(std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t));
            return fn(n) * std::sin(t);
        };
        return gauss_kronrod<double, 31>::integrate(ring, 0.0, 2 * M_PI, 12, 1e-14);
    };
    return gauss_kronrod<double, 31>::integrate(inner, 0.0, M_PI, 12, 1e-14);
}

std::vector<double> log_spaced(double a, double b, int n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(a * std::pow(b / a, double(i) / (n - 1)));
    return v;
}

}  // namespace

TEST(HawkingMass, EuclideanRoundSphereIsZero) {
    EXPECT_NEAR(hawking_mass(build_geometry(SphereGraph::round(Vec3::Zero(), 4.0, 24), MetricModel::euclidean())), 0.0,
                1e-11);
}

TEST(HawkingMass, CenteredSchwarzschildSpheres) {
    EXPECT_NEAR(hawking_mass(build_geometry(SphereGraph::round(Vec3::Zero(), 4.0, 24), MetricModel::schwarzschild(2.0))),
                2.0, 1e-8);
    for (double r : {4.0, 8.0, 16.0, 32.0, 64.0})
        EXPECT_NEAR(hawking_mass(build_geometry(SphereGraph::round(Vec3::Zero(), r, 24), MetricModel::schwarzschild(1.0))),
                    1.0, 1e-8)
            << r;
}

TEST(HawkingMass, ReportSelfConsistency) {
    const SphereGraph s(Vec3(1, 0, 2), 9.0, 10, mode(10, 3, 1, 0.04));
    const FunctionalReport r = compute_report(build_geometry(s, MetricModel::schwarzschild(1.0)));
    EXPECT_NEAR(r.hawking, std::sqrt(r.area / (16 * M_PI)) * (1 - r.willmore / (16 * M_PI)), 1e-12);
    EXPECT_GT(r.dlm_lambda, 0.0);
    EXPECT_GE(r.flux, 0.0);
}

TEST(ChristodoulouYau, EuclideanRoundSphere) {
    const CYDeficit d = cy_deficit(build_geometry(SphereGraph::round(Vec3::Zero(), 2.0, 12), MetricModel::euclidean()));
    EXPECT_NEAR(d.lhs, 0.0, 1e-10);
    EXPECT_NEAR(d.rhs, 0.0, 1e-10);
    EXPECT_NEAR(d.margin, 0.0, 1e-10);
}

TEST(ChristodoulouYau, SchwarzschildCenteredSphere) {
    const MetricModel m = MetricModel::schwarzschild(2.0);
    const CYDeficit d = cy_deficit(build_geometry(SphereGraph::round(Vec3::Zero(), 4.0, 24), m), m);
    const double willmore = 0.192 * 0.192 * 4 * M_PI * 16 * std::pow(1.25, 4);
    EXPECT_NEAR(willmore, 18.0956, 1e-4);
    EXPECT_NEAR(d.rhs, 16 * M_PI - willmore, 1e-8);
    EXPECT_NEAR(d.lhs, 0.0, 1e-10);
    EXPECT_GT(d.margin, 0.0);
}

TEST(ChristodoulouYau, NonCmcGraphMayHaveNegativeMargin) {
    const CYDeficit d = cy_deficit(build_geometry(unit_graph(12, 2, 0, 0.1), MetricModel::euclidean()));
    EXPECT_LT(d.margin, 0.0);
}

TEST(DeLellisMuller, LimitRatioMatchesLinearizedSpectrum) {
    // For f = eps Y_lm: delta H = (l(l+1) - 2) f and the ratio tends to (l(l+1) - 2) / (l(l+1)).
    for (int l : {2, 3, 4}) {
        const double lam = l * (l + 1.0);
        const double eps = 1e-3;
        const DLMRatio d = dlm_ratio(build_geometry(unit_graph(12, l, 0, eps), MetricModel::euclidean()));
        EXPECT_NEAR(d.ratio, (lam - 2.0) / lam, 10 * eps) << l;
        EXPECT_NEAR(d.lambda, 1.0, 10 * eps);
    }
}

TEST(DeLellisMuller, LambdaIsOptimal) {
    const GeometryCache c = build_geometry(SphereGraph(Vec3::Zero(), 2.0, 10, mode(10, 3, 2, 0.05)), MetricModel::euclidean());
    const DLMRatio d = dlm_ratio(c);
    auto objective = [&](double lam) {
        std::vector<double> v(c.size());
        for (int n = 0; n < c.size(); ++n) v[n] = std::pow(c.bar.H[n] - 2.0 / lam, 2);
        return c.bar.integrate(v);
    };
    EXPECT_LT(objective(d.lambda), objective(d.lambda * (1 + 1e-4)));
    EXPECT_LT(objective(d.lambda), objective(d.lambda * (1 - 1e-4)));
}

TEST(DeLellisMuller, RandomCorpusStaysBelowTwo) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g;
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        Eigen::VectorXd c(mode_count(8));
        for (int k = 0; k < c.size(); ++k) c[k] = g(rng);
        c *= 0.01 / c.norm();
        SphereGraph s(Vec3::Zero(), 1.0, 8, c);
        s = s.with_coeffs(c * (0.1 / s.c1_norm()));
        worst = std::max(worst, dlm_ratio(build_geometry(s, MetricModel::euclidean())).ratio);
    }
    EXPECT_LE(worst, 2.0 + 1e-6);
}

TEST(DeLellisMuller, RoundSphereIsRejected) {
    EXPECT_THROW((void)dlm_ratio(build_geometry(SphereGraph::round(Vec3::Zero(), 3.0, 8), MetricModel::euclidean())),
                 PreconditionError);
    EXPECT_TRUE(std::isnan(compute_report(build_geometry(SphereGraph::round(Vec3::Zero(), 3.0, 8), MetricModel::euclidean())).dlm_ratio));
}

TEST(Minkowski, DeficitVanishesOnSpheres) {
    EXPECT_NEAR(minkowski_deficit(build_geometry(SphereGraph::round(Vec3(1, 2, 0), 7.0, 12), MetricModel::euclidean())),
                0.0, 1e-10);
    for (double eps : {0.01, 0.1})
        EXPECT_NEAR(minkowski_deficit(build_geometry(unit_graph(12, 0, 0, eps), MetricModel::euclidean())), 0.0, 1e-10);
}

TEST(Minkowski, TranslationModeIsCubic) {
    std::vector<double> e, d;
    for (double eps : log_spaced(1e-2, 1e-1, 5)) {
        e.push_back(eps);
        d.push_back(std::abs(minkowski_deficit(build_geometry(unit_graph(16, 1, 0, eps), MetricModel::euclidean()))));
    }
    const double order = std::log(d.back() / d.front()) / std::log(e.back() / e.front());
    EXPECT_GE(order, 3.0 - 0.05);
    for (size_t i = 0; i < e.size(); ++i) EXPECT_LE(d[i], 10.0 * std::pow(e[i], 3));
}

TEST(Minkowski, QuadraticFormSpectralValues) {
    const int L = 6;
    const double eps = 0.01;
    EXPECT_NEAR(minkowski_quadratic_form(mode(L, 0, 0, eps), L), 0.0, 1e-16);
    EXPECT_NEAR(minkowski_quadratic_form(mode(L, 1, -1, eps), L), 0.0, 1e-16);
    EXPECT_NEAR(minkowski_quadratic_form(mode(L, 2, 1, eps), L), 4 * eps * eps, 1e-16);
    EXPECT_NEAR(minkowski_quadratic_form(unit_graph(L, 3, 0, eps)), 10 * eps * eps, 1e-16);
    EXPECT_THROW((void)minkowski_quadratic_form(SphereGraph::round(Vec3::Zero(), 2.0, L)), PreconditionError);
}

TEST(Minkowski, EigenvalueGapOnNormalizedGraphs) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    for (int t = 0; t < 5; ++t) {
        Eigen::VectorXd c(mode_count(8));
        for (int k = 0; k < c.size(); ++k) c[k] = 0.001 * g(rng);
        const SphereGraph s = moment_normalize(SphereGraph(Vec3::Zero(), 1.0, 8, c)).graph;
        EXPECT_GE(quadratic_form_gap(s.coeffs(), 8), -1e-10);
    }
}

TEST(Minkowski, SharpRatioShrinksForMixedModes) {
    Eigen::VectorXd mix = mode(12, 2, 0, 1.0) + mode(12, 3, 1, 0.6) + mode(12, 4, -2, 0.3);
    std::vector<double> ratio;
    for (double eps : {1e-2, 3e-3, 1e-3}) {
        const SphereGraph s = moment_normalize(SphereGraph(Vec3::Zero(), 1.0, 12, eps * mix)).graph;
        ratio.push_back(sharp_minkowski_ratio(build_geometry(s, MetricModel::euclidean())));
    }
    EXPECT_LE(ratio[0], 0.05);
    EXPECT_LE(ratio[1], ratio[0]);
    EXPECT_LE(ratio[2], ratio[1]);
}

TEST(TaylorFit, PrefactorIsOneHalfAcrossModes) {
    const auto eps = log_spaced(1e-3, 1e-1, 9);
    const TaylorFit a = taylor_prefactor_fit(2, 0, eps), b = taylor_prefactor_fit(3, 0, eps), c = taylor_prefactor_fit(4, 2, eps);
    EXPECT_NEAR(a.Q, 4.0, 1e-14);
    EXPECT_NEAR(a.alpha, 0.5, 1e-4);
    EXPECT_NEAR(b.alpha / a.alpha, 1.0, 0.02);
    EXPECT_NEAR(c.alpha / a.alpha, 1.0, 0.02);
    for (const TaylorFit* f : {&a, &b, &c}) EXPECT_GE(f->remainder_order, 2.8);
}

TEST(TaylorFit, Guards) {
    const auto eps = log_spaced(1e-3, 1e-1, 9);
    EXPECT_THROW((void)taylor_prefactor_fit(1, 0, eps), FitError);
    EXPECT_THROW((void)taylor_prefactor_fit(2, 0, {1e-2, 2e-2, 3e-2}), FitError);
}

TEST(Bochner, LinearAndQuadraticModes) {
    const BochnerCheck y10 = bochner_tracefree_check(unit_graph(4, 1, 0, 1.0 / 32));
    EXPECT_LE(y10.residual, 1e-12);
    EXPECT_NEAR(y10.tracefree_energy, 0.0, 1e-14);
    EXPECT_LE(bochner_tracefree_check(unit_graph(6, 2, 0, 0.05)).residual, 1e-10);
}

TEST(Bochner, RandomBandLimited) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    Eigen::VectorXd c(mode_count(8));
    for (int k = 0; k < c.size(); ++k) c[k] = g(rng);
    c *= 0.01 / c.norm();
    SphereGraph s(Vec3::Zero(), 1.0, 8, c);
    s = s.with_coeffs(c * (0.2 / s.c1_norm()));
    const BochnerCheck b = bochner_tracefree_check(s);
    EXPECT_LE(b.residual, 1e-9);
    EXPECT_NEAR(b.hessian_energy, 2 * b.tracefree_energy + b.gradient_energy, 1e-9);
}

TEST(Flux, CenteredSphere) {
    for (double r : {2.0, 5.0, 11.0})
        EXPECT_NEAR(flux_integral(build_geometry(SphereGraph::round(Vec3::Zero(), r, 12), MetricModel::euclidean())),
                    4 * M_PI / (r * r), 1e-10);
}

TEST(Flux, OffCenterUnitSphereMatchesAdaptiveQuadrature) {
    const Vec3 c(2, 0, 0);
    const double oracle = sphere_integral([&](const Vec3& n) {
        const Vec3 x = c + n;
        return std::pow(x.dot(n), 2) / std::pow(x.norm(), 6);
    });
    EXPECT_NEAR(flux_integral(build_geometry(SphereGraph::round(c, 1.0, 24), MetricModel::euclidean())), oracle, 1e-8);
    const double div = divergence_flux(build_geometry(SphereGraph::round(c, 1.0, 24), MetricModel::euclidean()));
    EXPECT_NEAR(div, 0.0, 1e-9);
}

TEST(Flux, ScalingLawForOutlyingSpheres) {
    std::vector<double> scaled;
    for (double lam : {4.0, 8.0, 16.0}) {
        const GeometryCache c = build_geometry(SphereGraph::round(Vec3(2 * lam, 0, 0), lam, 24), MetricModel::schwarzschild(1.0));
        scaled.push_back(lam * lam * flux_integral(c));
    }
    const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
    EXPECT_LT((*hi - *lo) / *lo, 0.05);
    EXPECT_GT(*lo, 0.0);
}

TEST(InequalityAudit, LedgerMatchesConformalOracle) {
    // Round sphere S_8(16 e_1) in Schwarzschild m = 1: mu = phi^4 mu_bar,
    // H = phi^-2 (2/8 + 4 d_nu log phi), |h|^2 = H^2 / 2, tracefree part zero.
    const double m = 1.0, lam = 8.0, tau = 2.5, delta = 0.1;
    const Vec3 c(2 * lam, 0, 0);
    const MetricModel model = MetricModel::schwarzschild(m);
    const InequalityLedger led = big_inequality_audit(build_geometry(SphereGraph::round(c, lam, 24), model), model, tau, delta);

    auto at = [&](const Vec3& n, auto&& body) {
        const Vec3 x = c + lam * n;
        const double r = x.norm(), phi = 1.0 + m / (2 * r);
        const double dphi = -0.5 * m * x.dot(n) / (r * r * r);
        const double H = (2.0 / lam + 4.0 * dphi / phi) / (phi * phi);
        return body(r, H) * std::pow(phi, 4) * lam * lam;
    };
    const double x5 = sphere_integral([&](const Vec3& n) { return at(n, [](double r, double) { return std::pow(r, -5); }); });
    const double h2x3 = sphere_integral([&](const Vec3& n) { return at(n, [](double r, double H) { return 0.5 * H * H / (r * r * r); }); });
    const double hx3 = sphere_integral([&](const Vec3& n) { return at(n, [](double r, double H) { return H / (r * r * r); }); });
    const double h2x2 = sphere_integral([&](const Vec3& n) { return at(n, [](double r, double H) { return H * H / (r * r); }); });
    const double flux = sphere_integral([&](const Vec3& n) {
        const Vec3 x = c + lam * n;
        return std::pow(x.dot(n), 2) / std::pow(x.norm(), 6) * lam * lam;
    });

    EXPECT_LE(led.divergence_residual, 1e-9);
    EXPECT_FALSE(led.gamma_measured);
    EXPECT_NEAR(led.coefficient, (2.0 / 3.0) * 0.9 / 1.1 + 2.0 - tau, 1e-15);
    EXPECT_NEAR(led.tracefree_term, 0.0, 1e-12);
    EXPECT_NEAR(led.flux, flux, 1e-8);
    EXPECT_NEAR(led.favorable_term, 4 * m * m * (1 - 2 / tau) * flux, 1e-8);
    EXPECT_NEAR(led.err_x5, x5, 1e-8);
    EXPECT_NEAR(led.err_h2_x3, h2x3, 1e-8);
    EXPECT_NEAR(led.err_Hh0_x2, 0.0, 1e-8);
    EXPECT_NEAR(led.err_H_x3, hx3, 1e-8);
    EXPECT_NEAR(led.err_H2_x2, h2x2, 1e-8);
    EXPECT_NEAR(led.r0, lam, 1e-12);
}

TEST(InequalityAudit, FavorableTermVanishesWithoutMass) {
    const MetricModel e = MetricModel::euclidean();
    const InequalityLedger led = big_inequality_audit(build_geometry(SphereGraph::round(Vec3(16, 0, 0), 8, 12), e), e, 2.5, 0.1);
    EXPECT_EQ(led.favorable_term, 0.0);
    EXPECT_GT(led.flux, 0.0);
}

TEST(InequalityAudit, Guards) {
    const MetricModel m = MetricModel::schwarzschild(1.0);
    const GeometryCache centered = build_geometry(SphereGraph::round(Vec3::Zero(), 8, 8), m);
    EXPECT_THROW((void)big_inequality_audit(centered, m, 2.5, 0.1), PreconditionError);
    const GeometryCache outl = build_geometry(SphereGraph::round(Vec3(16, 0, 0), 8, 8), m);
    EXPECT_THROW((void)big_inequality_audit(outl, m, 3.0, 0.1), PreconditionError);
    EXPECT_THROW((void)big_inequality_audit(outl, m, 2.5, 1.5), PreconditionError);
}
