#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cmcprobe/errors.hpp"
#include "cmcprobe/surface_geometry.hpp"

using namespace cmcprobe;

namespace {

double closed_form_H(double m, double r) {
    const double phi = 1.0 + m / (2 * r);
    return (2.0 / r - 2.0 * m / (r * r * phi)) / (phi * phi);
}

double max_abs(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s = std::max(s, std::abs(x));
    return s;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const int n = static_cast<int>(x.size());
    double mx = 0, my = 0, sxy = 0, sxx = 0;
    for (int i = 0; i < n; ++i) mx += std::log(x[i]) / n, my += std::log(y[i]) / n;
    for (int i = 0; i < n; ++i) {
        sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
        sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
    }
    return sxy / sxx;
}

MetricModel perturbed_model() {
    PerturbationSpec spec;
    spec.terms.push_back({2.0, {Monomial{0.6, {1, 0, 0}}, Monomial{0.25, {0, 0, 0}}}, 0, 0});
    spec.terms.push_back({2.0, {Monomial{0.4, {0, 1, 1}}}, 1, 2});
    return MetricModel::perturbed(1.0, spec);
}

Eigen::VectorXd mode(int L, int l, int m, double v) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(mode_count(L));
    c[mode_index(l, m)] = v;
    return c;
}

}  // namespace

TEST(BuildGeometry, EuclideanRoundSphere) {
    const GeometryCache c = build_geometry(SphereGraph::round(Vec3::Zero(), 4.0, 24), MetricModel::euclidean());
    for (int n = 0; n < c.size(); ++n) {
        EXPECT_NEAR(c.g.H[n], 0.5, 1e-11);
        EXPECT_NEAR(c.g.tracefree_norm2[n], 0.0, 1e-12);
        EXPECT_GT(c.g.dmu[n], 0.0);
    }
    EXPECT_NEAR(c.g.area(), 64 * M_PI, 1e-10);
}

TEST(BuildGeometry, SchwarzschildCenteredSphere) {
    const GeometryCache c = build_geometry(SphereGraph::round(Vec3::Zero(), 4.0, 24), MetricModel::schwarzschild(2.0));
    ASSERT_NEAR(closed_form_H(2.0, 4.0), 0.192, 1e-15);
    for (int n = 0; n < c.size(); ++n) EXPECT_NEAR(c.g.H[n], 0.192, 1e-9);
    EXPECT_NEAR(c.g.area(), 4 * M_PI * 16 * std::pow(1.25, 4), 1e-9);
}

TEST(BuildGeometry, MeanCurvatureIsFirstVariationOfArea) {
    // For centered spheres the normal speed of r -> r + dr is phi^2, so H = A'(r) / (phi^2 A).
    const MetricModel m = MetricModel::schwarzschild(1.0);
    const double r = 5.0, h = 1e-4, phi = 1.0 + 0.5 / r;
    auto area = [&](double rr) { return build_geometry(SphereGraph::round(Vec3::Zero(), rr, 4), m).g.area(); };
    const double H_fd = (area(r + h) - area(r - h)) / (2 * h) / (phi * phi * area(r));
    const GeometryCache c = build_geometry(SphereGraph::round(Vec3::Zero(), r, 4), m);
    EXPECT_NEAR(c.g.H[0], H_fd, 1e-7);
}

TEST(BuildGeometry, OffCenterEuclideanSphere) {
    const GeometryCache c = build_geometry(SphereGraph::round(Vec3(3, 0, 0), 1.0, 24), MetricModel::euclidean());
    EXPECT_LT(max_abs([&] {
                  std::vector<double> d(c.size());
                  for (int n = 0; n < c.size(); ++n) d[n] = c.g.H[n] - 2.0;
                  return d;
              }()),
              1e-11);
}

TEST(BuildGeometry, BarredQuantitiesAlwaysPresent) {
    const SphereGraph s(Vec3(0, 0, 1), 6.0, 8, mode(8, 2, 0, 0.05));
    const GeometryCache c = build_geometry(s, perturbed_model());
    ASSERT_EQ(c.bar.H.size(), c.x.size());
    const GeometryCache e = build_geometry(s, MetricModel::euclidean());
    for (int n = 0; n < c.size(); ++n) {
        EXPECT_NEAR(c.bar.H[n], e.g.H[n], 1e-14);
        EXPECT_NEAR(c.bar.dmu[n], e.g.dmu[n], 1e-14);
        EXPECT_GE(c.g.tracefree_norm2[n], -1e-12);
    }
}

TEST(BuildGeometry, NormalIsUnitAndOutward) {
    const SphereGraph s(Vec3(2, -1, 0), 5.0, 8, mode(8, 3, 2, 0.06));
    const MetricModel m = perturbed_model();
    const GeometryCache c = build_geometry(s, m);
    for (int n = 0; n < c.size(); ++n) {
        const Mat3 g = m.evaluate(c.x[n]).g;
        EXPECT_NEAR(c.g.nu[n].dot(g * c.g.nu[n]), 1.0, 1e-12);
        EXPECT_GT(c.g.nu[n].dot(c.x[n] - s.center()), 0.0);
        EXPECT_NEAR(c.g.nu[n].dot(g * c.F1[n]), 0.0, 1e-12);
        EXPECT_NEAR(c.g.nu[n].dot(g * c.F2[n]), 0.0, 1e-12);
    }
}

TEST(BuildGeometry, EuclideanScaling) {
    const SphereGraph s(Vec3(0.2, 0, 0), 2.0, 10, mode(10, 4, -1, 0.04));
    const double lam = 2.5;
    const GeometryCache a = build_geometry(s, MetricModel::euclidean()), b = build_geometry(s.dilated(lam), MetricModel::euclidean());
    for (int n = 0; n < a.size(); ++n) {
        EXPECT_NEAR(b.g.H[n] * lam, a.g.H[n], 1e-11);
        EXPECT_NEAR(b.g.dmu[n] / (lam * lam), a.g.dmu[n], 1e-11);
    }
}

TEST(BuildGeometry, ConformalInvarianceOfTracefreeEnergy) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 3; ++trial) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(mode_count(8));
        for (int i = 4; i < c.size(); ++i) c[i] = gauss(rng) * 0.004;
        const SphereGraph s(Vec3(1.0, 0.5, -2.0), 10.0, 8, c);
        const GeometryCache gc = build_geometry(s, MetricModel::schwarzschild(1.5));
        EXPECT_NEAR(gc.bar.integrate(gc.bar.tracefree_norm2), gc.g.integrate(gc.g.tracefree_norm2), 1e-9);
        EXPECT_GT(gc.g.integrate(gc.g.tracefree_norm2), 1e-6);
    }
}

TEST(BuildGeometry, DegenerateGraphRaisesGeometryErrorOrEmbeddingError) {
    EXPECT_THROW(SphereGraph(Vec3::Zero(), 1.0, 6, mode(6, 6, 3, 0.4)), EmbeddingError);
}

TEST(BuildGeometry, DomainViolation) {
    EXPECT_THROW((void)build_geometry(SphereGraph::round(Vec3::Zero(), 0.8, 4), MetricModel::schwarzschild(1.0)),
                 DomainError);
}

TEST(ComparisonResiduals, ExactInSchwarzschild) {
    for (double r : {4.0, 8.0, 16.0}) {
        const GeometryCache c = build_geometry(SphereGraph::round(Vec3::Zero(), r, 12), MetricModel::schwarzschild(2.0));
        EXPECT_LE(max_abs(area_element_comparison_residual(c)), 1e-12);
        EXPECT_LE(max_abs(mean_curvature_comparison_residual(c)), 1e-10);
    }
}

TEST(ComparisonResiduals, ExactForOffCenterGraphsInSchwarzschild) {
    const SphereGraph s(Vec3(3, 1, 0), 6.0, 10, mode(10, 2, 1, 0.05));
    const GeometryCache c = build_geometry(s, MetricModel::schwarzschild(1.0));
    EXPECT_LE(max_abs(area_element_comparison_residual(c)), 1e-12);
    EXPECT_LE(max_abs(mean_curvature_comparison_residual(c)), 1e-10);
}

TEST(ComparisonResiduals, EuclideanIsRejected) {
    const GeometryCache c = build_geometry(SphereGraph::round(Vec3::Zero(), 4.0, 4), MetricModel::euclidean());
    EXPECT_THROW((void)area_element_comparison_residual(c), PreconditionError);
    EXPECT_THROW((void)mean_curvature_comparison_residual(c), PreconditionError);
}

TEST(ComparisonResiduals, PerturbedDecayOrders) {
    const MetricModel m = perturbed_model();
    std::vector<double> r0s, area_res, mc_res;
    for (double r0 : {8.0, 16.0, 32.0}) {
        const GeometryCache c = build_geometry(SphereGraph::round(Vec3::Zero(), r0, 12), m);
        r0s.push_back(r0);
        area_res.push_back(max_abs(area_element_comparison_residual(c)));
        mc_res.push_back(max_abs(mean_curvature_comparison_residual(c)));
    }
    const double sa = slope(r0s, area_res), sm = slope(r0s, mc_res);
    EXPECT_GE(sa, -4.3);
    EXPECT_LE(sa, -3.7);
    EXPECT_LE(sm, -3.5);
}

TEST(GaussCurvature, GaussBonnet) {
    EXPECT_NEAR(gauss_curvature_check(build_geometry(SphereGraph::round(Vec3::Zero(), 3.0, 24), MetricModel::euclidean())).integral,
                4 * M_PI, 1e-10);
    const GeometryCache e = build_geometry(SphereGraph(Vec3::Zero(), 1.0, 24, mode(24, 2, 0, 0.1)), MetricModel::euclidean());
    EXPECT_NEAR(gauss_curvature_check(e).defect, 0.0, 1e-9);
}

TEST(GaussCurvature, GaussEquationInSchwarzschild) {
    const MetricModel m = MetricModel::schwarzschild(2.0);
    const GeometryCache c = build_geometry(SphereGraph::round(Vec3::Zero(), 4.0, 24), m);
    EXPECT_LE(gauss_curvature_check(c).gauss_equation_residual, 1e-8);
    // Ric(nu, nu) = -2m / R^3 with the areal radius R = r phi^2.
    const double R = 4.0 * 1.25 * 1.25;
    for (int n = 0; n < c.size(); n += 37) EXPECT_NEAR(c.ric_nn[n], -2.0 * 2.0 / (R * R * R), 1e-12);
}

TEST(GaussCurvature, GaussEquationForPerturbedGraph) {
    const GeometryCache c = build_geometry(SphereGraph(Vec3(0, 1, 0), 7.0, 12, mode(12, 3, -2, 0.05)), perturbed_model());
    const GaussCurvatureCheck g = gauss_curvature_check(c);
    EXPECT_LE(g.gauss_equation_residual, 1e-8);
    EXPECT_NEAR(g.defect, 0.0, 1e-9);
}

TEST(Summary, JsonExport) {
    const GeometryCache c = build_geometry(SphereGraph::round(Vec3::Zero(), 4.0, 8), MetricModel::euclidean());
    const GeometrySummary s = summarize(c);
    EXPECT_NEAR(s.willmore, 16 * M_PI, 1e-10);
    const auto j = nlohmann::json::parse(to_json(s));
    EXPECT_DOUBLE_EQ(j.at("area").get<double>(), s.area);
    EXPECT_DOUBLE_EQ(j.at("H_max").get<double>(), s.H_max);
}
