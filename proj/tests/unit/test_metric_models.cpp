#include <cmath>

#include <gtest/gtest.h>

#include "cmcprobe/errors.hpp"
#include "cmcprobe/metric_models.hpp"
#include "oracles.hpp"

using namespace cmcprobe;

namespace {

MetricModel dipole_model() {
    return conformal_perturbed(1.0, {ConformalTerm{3.0, Monomial{0.5, {0, 0, 1}}},
                                     ConformalTerm{2.0, Monomial{-0.3, {0, 0, 0}}}});
}

// u = 1 + m/2r + 0.5 n_z r^-3 - 0.3 r^-2, so R = -8 u^-5 Lap(u) with
// Lap(r^p Y_l) = (p(p+1) - l(l+1)) r^(p-2) Y_l.
double dipole_scalar_curvature(const Vec3& x) {
    const double r = x.norm(), nz = x.z() / r;
    const double u = 1.0 + 0.5 / r + 0.5 * nz * std::pow(r, -3) - 0.3 * std::pow(r, -2);
    const double lap = 0.5 * 4.0 * nz * std::pow(r, -5) - 0.3 * 2.0 * std::pow(r, -4);
    return -8.0 * std::pow(u, -5) * lap;
}

}  // namespace

TEST(MetricModels, EuclideanIsIdentityWithZeroDerivatives) {
    const MetricJet j = MetricModel::euclidean().evaluate(Vec3(3, 0, 0));
    EXPECT_EQ(j.g, Mat3::Identity());
    for (int k = 0; k < 3; ++k) {
        EXPECT_EQ(j.dg[k], Mat3::Zero());
        for (int l = 0; l < 3; ++l) EXPECT_EQ(j.ddg[k][l], Mat3::Zero());
    }
}

TEST(MetricModels, SchwarzschildConformalFactorAtRadiusTwo) {
    const MetricJet j = MetricModel::schwarzschild(2.0).evaluate(Vec3(2, 0, 0));
    EXPECT_DOUBLE_EQ(j.g(0, 0), 5.0625);
    EXPECT_EQ(j.g(0, 1), 0.0);
    EXPECT_EQ(j.g(1, 2), 0.0);
    EXPECT_DOUBLE_EQ(j.g(2, 2), 5.0625);
}

TEST(MetricModels, SchwarzschildFirstDerivativeMatchesFiniteDifference) {
    const MetricModel m = MetricModel::schwarzschild(1.0);
    const Vec3 x(4, 0, 0);
    const double h = 1e-5;
    const double fd = (m.evaluate(x + Vec3(h, 0, 0)).g(0, 0) - m.evaluate(x - Vec3(h, 0, 0)).g(0, 0)) / (2 * h);
    EXPECT_NEAR(m.evaluate(x).dg[0](0, 0), fd, 1e-7);
}

TEST(MetricModels, SecondDerivativesMatchFiniteDifferencesOfFirst) {
    const MetricModel m = dipole_model();
    const Vec3 x(3.0, -2.0, 4.5);
    const MetricJet j = m.evaluate(x);
    const double h = 1e-5;
    for (int k = 0; k < 3; ++k) {
        Vec3 e = Vec3::Zero();
        e[k] = h;
        const MetricJet p = m.evaluate(x + e), q = m.evaluate(x - e);
        for (int l = 0; l < 3; ++l) EXPECT_LT(((p.dg[l] - q.dg[l]) / (2 * h) - j.ddg[k][l]).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(MetricModels, ConformalConsistencyAndSymmetry) {
    const MetricModel m = MetricModel::schwarzschild(1.5);
    for (const Vec3& x : {Vec3(2, 0, 0), Vec3(1, 2, 3), Vec3(-7, 0.5, 9)}) {
        const MetricJet j = m.evaluate(x);
        const double phi = 1.0 + 0.75 / x.norm();
        EXPECT_LT((j.g - std::pow(phi, 4) * Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-15 * j.g(0, 0));
        for (int k = 0; k < 3; ++k) EXPECT_EQ(j.dg[k], j.dg[k].transpose());
    }
}

TEST(MetricModels, MassZeroReproducesEuclidean) {
    const MetricJet j = MetricModel::schwarzschild(0.0).evaluate(Vec3(1.3, -2.0, 0.4));
    EXPECT_EQ(j.g, Mat3::Identity());
    for (int k = 0; k < 3; ++k) EXPECT_EQ(j.dg[k], Mat3::Zero());
}

TEST(MetricModels, DomainErrorCarriesRadius) {
    const MetricModel m = MetricModel::schwarzschild(4.0);
    try {
        (void)m.evaluate(Vec3(1.5, 0, 0));
        FAIL() << "expected DomainError";
    } catch (const DomainError& e) {
        EXPECT_DOUBLE_EQ(e.radius(), 1.5);
    }
    EXPECT_THROW((void)MetricModel::schwarzschild(1.0).evaluate(Vec3(0.5, 0, 0)), DomainError);
    EXPECT_NO_THROW((void)MetricModel::euclidean().evaluate(Vec3(0.1, 0, 0)));
}

TEST(MetricModels, PerturbationIsSymmetric) {
    PerturbationSpec spec;
    spec.terms.push_back({2.0, {Monomial{0.7, {1, 0, 0}}, Monomial{0.2, {0, 1, 1}}}, 0, 1});
    const MetricModel m = MetricModel::perturbed(1.0, spec);
    const MetricJet j = m.evaluate(Vec3(2.0, 3.0, -1.0));
    EXPECT_EQ(j.g(0, 1), j.g(1, 0));
    EXPECT_NE(j.g(0, 1), 0.0);
    for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) EXPECT_EQ(j.ddg[k][l], j.ddg[k][l].transpose());
}

TEST(MetricModels, PerturbationDecayRates) {
    PerturbationSpec spec;
    spec.cutoff_radius = 3.0;
    spec.terms.push_back({2.0, {Monomial{1.0, {1, 1, 0}}}, 0, 2});
    spec.terms.push_back({2.5, {Monomial{0.4, {0, 0, 2}}}, 2, 2});
    const MetricModel m = MetricModel::perturbed(1.0, spec);
    const Vec3 d = Vec3(1, 2, 2).normalized();
    double lo0 = 1e300, hi0 = 0, lo1 = 1e300, hi1 = 0;
    for (double r = 3.0; r <= 30.0; r *= 1.2) {
        const MetricJet s = m.perturbation_jet(r * d);
        double d1 = 0;
        for (int k = 0; k < 3; ++k) d1 = std::max(d1, s.dg[k].cwiseAbs().maxCoeff());
        const double a = r * r * s.g.cwiseAbs().maxCoeff(), b = r * r * r * d1;
        lo0 = std::min(lo0, a), hi0 = std::max(hi0, a), lo1 = std::min(lo1, b), hi1 = std::max(hi1, b);
    }
    EXPECT_LT(hi0 / lo0, 10.0);
    EXPECT_LT(hi1 / lo1, 10.0);
    EXPECT_LE(hi0, 1.5);
}

TEST(ScalarCurvature, FlatAndSchwarzschildVanish) {
    EXPECT_EQ(scalar_curvature(MetricModel::euclidean(), Vec3(1, 2, 3)), 0.0);
    EXPECT_NEAR(scalar_curvature(MetricModel::schwarzschild(2.0), Vec3(4, 0, 0)), 0.0, 1e-9);
    EXPECT_NEAR(scalar_curvature(MetricModel::schwarzschild(1.0), Vec3(-2, 5, 1)), 0.0, 1e-12);
}

TEST(ScalarCurvature, ConformalModelMatchesLaplacianFormula) {
    const MetricModel m = dipole_model();
    for (const Vec3& x : {Vec3(5, 0, 3), Vec3(-4, 6, -2), Vec3(0, -9, 1), Vec3(12, 3, 7)})
        EXPECT_NEAR(scalar_curvature(m, x), dipole_scalar_curvature(x), 1e-12) << x.transpose();
    EXPECT_NEAR(scalar_curvature(m, Vec3(5, 0, 3)), 2.011277905107908e-3, 1e-12);
}

TEST(ScalarCurvature, SingleTermMatchesFiniteDifferenceRicci) {
    PerturbationSpec spec;
    spec.terms.push_back({2.0, {Monomial{0.8, {1, 0, 1}}, Monomial{0.3, {0, 0, 0}}}, 0, 0});
    const MetricModel m = MetricModel::perturbed(1.0, spec);
    const oracle::MetricFn g = [&](const Vec3& x) { return m.evaluate(x).g; };
    for (const Vec3& x : {Vec3(3, 1, 2), Vec3(-2.5, 2, 0.5), Vec3(0.5, -4, 3)})
        EXPECT_NEAR(scalar_curvature(m, x), oracle::scalar_curvature_fd(g, x), 1e-6) << x.transpose();
}

TEST(Curvature, StereographicThreeSphereHasScalarCurvatureSix) {
    // g = w delta with w = 4/(1+|x|^2)^2 is the unit round 3-sphere.
    const Vec3 x(0.3, -0.2, 0.5);
    const double s = 1.0 + x.squaredNorm();
    const double w = 4.0 / (s * s);
    MetricJet jet;
    jet.g = w * Mat3::Identity();
    for (int k = 0; k < 3; ++k) {
        jet.dg[k] = (-16.0 * x[k] / (s * s * s)) * Mat3::Identity();
        for (int l = 0; l < 3; ++l) {
            const double dd = 96.0 * x[k] * x[l] / std::pow(s, 4) - (k == l ? 16.0 / (s * s * s) : 0.0);
            jet.ddg[k][l] = dd * Mat3::Identity();
        }
    }
    const Curvature c = curvature_from_jet(jet);
    EXPECT_NEAR(c.scalar, 6.0, 1e-12);
    EXPECT_LT((c.ricci - 2.0 * jet.g).cwiseAbs().maxCoeff(), 1e-12);
    const Vec3 u(1, 0, 0), v(0, 1, 0);
    EXPECT_NEAR(c.rm(u, v), w * w, 1e-12);
}

TEST(MetricKind, StringRoundTrip) {
    for (MetricKind k : {MetricKind::euclidean, MetricKind::schwarzschild, MetricKind::perturbed})
        EXPECT_EQ(metric_kind_from_string(to_string(k)), k);
    EXPECT_THROW((void)metric_kind_from_string("kerr"), Error);
}
