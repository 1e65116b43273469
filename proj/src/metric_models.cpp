#include "cmcprobe/metric_models.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "cmcprobe/errors.hpp"

namespace cmcprobe {

namespace {

double ipow(double x, int n) {
    double out = 1.0;
    for (int k = 0; k < n; ++k) out *= x;
    return out;
}

// Value, gradient and Hessian of a scalar field at a point.
struct ScalarJet {
    double v = 0.0;
    Vec3 d = Vec3::Zero();
    Mat3 dd = Mat3::Zero();
};

// coefficient * x^a y^b z^c * |x|^{-q}
ScalarJet monomial_power_jet(const Monomial& mono, double q, const Vec3& x) {
    const auto& p = mono.powers;
    // Polynomial part M and its derivatives.
    ScalarJet poly;
    std::array<double, 3> base{}, first{}, second{};
    for (int k = 0; k < 3; ++k) {
        base[k] = ipow(x[k], p[k]);
        first[k] = p[k] >= 1 ? p[k] * ipow(x[k], p[k] - 1) : 0.0;
        second[k] = p[k] >= 2 ? p[k] * (p[k] - 1) * ipow(x[k], p[k] - 2) : 0.0;
    }
    const double c = mono.coefficient;
    poly.v = c * base[0] * base[1] * base[2];
    for (int k = 0; k < 3; ++k) {
        double dk = c * first[k];
        for (int o = 0; o < 3; ++o)
            if (o != k) dk *= base[o];
        poly.d[k] = dk;
        for (int l = 0; l < 3; ++l) {
            double dkl = c;
            for (int o = 0; o < 3; ++o) {
                if (k == l) {
                    dkl *= (o == k) ? second[o] : base[o];
                } else {
                    dkl *= (o == k || o == l) ? first[o] : base[o];
                }
            }
            poly.dd(k, l) = dkl;
        }
    }

    const double r2 = x.squaredNorm();
    const double rq = std::pow(r2, -0.5 * q);
    ScalarJet rad;
    rad.v = rq;
    rad.d = -q * rq / r2 * x;
    rad.dd = -q * rq / r2 * Mat3::Identity() + q * (q + 2.0) * rq / (r2 * r2) * (x * x.transpose());

    ScalarJet out;
    out.v = poly.v * rad.v;
    out.d = poly.d * rad.v + poly.v * rad.d;
    out.dd = poly.dd * rad.v + poly.d * rad.d.transpose() + rad.d * poly.d.transpose() + poly.v * rad.dd;
    return out;
}

void add_component(MetricJet& jet, int i, int j, const ScalarJet& s) {
    auto put = [&](int a, int b) {
        jet.g(a, b) += s.v;
        for (int k = 0; k < 3; ++k) {
            jet.dg[k](a, b) += s.d[k];
            for (int l = 0; l < 3; ++l) jet.ddg[k][l](a, b) += s.dd(k, l);
        }
    };
    put(i, j);
    if (i != j) put(j, i);
}

MetricJet zero_jet() {
    MetricJet jet;
    jet.g.setZero();
    return jet;
}

}  // namespace

std::string to_string(MetricKind kind) {
    switch (kind) {
        case MetricKind::euclidean: return "euclidean";
        case MetricKind::schwarzschild: return "schwarzschild";
        case MetricKind::perturbed: return "perturbed";
    }
    return "unknown";
}

MetricKind metric_kind_from_string(const std::string& name) {
    if (name == "euclidean") return MetricKind::euclidean;
    if (name == "schwarzschild") return MetricKind::schwarzschild;
    if (name == "perturbed") return MetricKind::perturbed;
    throw PreconditionError("unknown metric kind '" + name + "'");
}

double Curvature::rm(const Vec3& u, const Vec3& v) const {
    double s = 0.0;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c)
                for (int d = 0; d < 3; ++d) s += rm(a, b, c, d) * u[a] * v[b] * u[c] * v[d];
    return s;
}

Curvature curvature_from_jet(const MetricJet& jet) {
    Curvature out;
    const Mat3 ginv = jet.g.inverse();
    for (int k = 0; k < 3; ++k) {
        Mat3 gk;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int l = 0; l < 3; ++l)
                    s += ginv(k, l) * (jet.dg[i](l, j) + jet.dg[j](i, l) - jet.dg[l](i, j));
                gk(i, j) = 0.5 * s;
            }
        out.christoffel[k] = gk;
    }
    const auto& G = out.christoffel;
    auto ddg = [&](int p, int q, int i, int j) { return jet.ddg[p][q](i, j); };
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c)
                for (int d = 0; d < 3; ++d) {
                    double v = 0.5 * (ddg(b, c, a, d) + ddg(a, d, b, c) - ddg(b, d, a, c) - ddg(a, c, b, d));
                    for (int e = 0; e < 3; ++e)
                        for (int f = 0; f < 3; ++f)
                            v += jet.g(e, f) * (G[e](b, c) * G[f](a, d) - G[e](b, d) * G[f](a, c));
                    out.riemann[((a * 3 + b) * 3 + c) * 3 + d] = v;
                }
    for (int b = 0; b < 3; ++b)
        for (int d = 0; d < 3; ++d) {
            double s = 0.0;
            for (int a = 0; a < 3; ++a)
                for (int c = 0; c < 3; ++c) s += ginv(a, c) * out.rm(a, b, c, d);
            out.ricci(b, d) = s;
        }
    out.scalar = (ginv.array() * out.ricci.array()).sum();
    return out;
}

MetricModel::MetricModel(MetricKind kind, double mass, std::optional<PerturbationSpec> perturbation)
    : kind_(kind), mass_(mass), perturbation_(std::move(perturbation)) {
    if (!(mass_ >= 0.0) || !std::isfinite(mass_)) {
        throw PreconditionError("metric mass must be a finite nonnegative number");
    }
    if (perturbation_) {
        if (!(perturbation_->cutoff_radius > 1.0)) {
            throw PreconditionError("perturbation cutoff radius must exceed 1");
        }
        for (const auto& t : perturbation_->terms) {
            if (!(t.decay >= 2.0)) throw PreconditionError("perturbation decay exponent must be >= 2");
            if (t.i < 0 || t.i > 2 || t.j < 0 || t.j > 2)
                throw PreconditionError("perturbation component index out of range");
            for (const auto& m : t.profile)
                for (int p : m.powers)
                    if (p < 0) throw PreconditionError("negative monomial power in perturbation profile");
        }
    }
}

MetricModel MetricModel::euclidean() { return MetricModel(MetricKind::euclidean, 0.0, std::nullopt); }

MetricModel MetricModel::schwarzschild(double mass) {
    return MetricModel(MetricKind::schwarzschild, mass, std::nullopt);
}

MetricModel MetricModel::perturbed(double mass, PerturbationSpec perturbation) {
    return MetricModel(MetricKind::perturbed, mass, std::move(perturbation));
}

bool MetricModel::in_domain(const Vec3& x) const {
    if (kind_ == MetricKind::euclidean) return true;
    const double r = x.norm();
    return r >= 1.0 && r > 0.5 * mass_;
}

void MetricModel::check_domain(const Vec3& x) const {
    if (in_domain(x)) return;
    const double r = x.norm();
    std::ostringstream os;
    os.precision(17);
    os << "point at radius " << r << " lies in the excluded region of the " << to_string(kind_)
       << " metric (requires |x| >= 1 and |x| > m/2 = " << 0.5 * mass_ << ")";
    throw DomainError(os.str(), r);
}

double MetricModel::conformal_factor(const Vec3& x) const {
    const double phi = 1.0 + 0.5 * mass() / x.norm();
    const double phi2 = phi * phi;
    return phi2 * phi2;
}

MetricJet MetricModel::perturbation_jet(const Vec3& x) const {
    MetricJet jet = zero_jet();
    if (kind_ != MetricKind::perturbed || !perturbation_) return jet;
    for (const auto& term : perturbation_->terms) {
        for (const auto& mono : term.profile) {
            // n^a |x|^{-p} = x^a |x|^{-(p + |a|)}
            const ScalarJet s = monomial_power_jet(mono, term.decay + mono.degree(), x);
            add_component(jet, term.i, term.j, s);
        }
    }
    return jet;
}

MetricJet MetricModel::evaluate(const Vec3& x) const {
    check_domain(x);
    MetricJet jet;
    if (kind_ == MetricKind::euclidean) return jet;

    const double m = mass_;
    const double r2 = x.squaredNorm();
    const double r = std::sqrt(r2);
    const double r3 = r2 * r;
    const double phi = 1.0 + 0.5 * m / r;
    const double phi2 = phi * phi;
    const double phi3 = phi2 * phi;
    const double w = phi2 * phi2;
    const Vec3 dphi = -0.5 * m / r3 * x;
    const Mat3 ddphi = -0.5 * m * (Mat3::Identity() / r3 - 3.0 / (r3 * r2) * (x * x.transpose()));
    const Vec3 dw = 4.0 * phi3 * dphi;
    const Mat3 ddw = 12.0 * phi2 * (dphi * dphi.transpose()) + 4.0 * phi3 * ddphi;

    jet.g = w * Mat3::Identity();
    for (int k = 0; k < 3; ++k) {
        jet.dg[k] = dw[k] * Mat3::Identity();
        for (int l = 0; l < 3; ++l) jet.ddg[k][l] = ddw(k, l) * Mat3::Identity();
    }

    if (kind_ == MetricKind::perturbed) {
        const MetricJet s = perturbation_jet(x);
        jet.g += s.g;
        for (int k = 0; k < 3; ++k) {
            jet.dg[k] += s.dg[k];
            for (int l = 0; l < 3; ++l) jet.ddg[k][l] += s.ddg[k][l];
        }
    }
    return jet;
}

MetricJet evaluate_metric(const MetricModel& model, const Vec3& x) { return model.evaluate(x); }

double scalar_curvature(const MetricModel& model, const Vec3& x) {
    if (model.kind() == MetricKind::euclidean) return 0.0;
    return curvature_from_jet(model.evaluate(x)).scalar;
}

namespace {

// Polynomial in (1/|x|, n_x, n_y, n_z) keyed by exponents.
using PolyKey = std::array<int, 4>;
using Poly = std::map<PolyKey, double>;

Poly poly_mul(const Poly& a, const Poly& b) {
    Poly out;
    for (const auto& [ka, va] : a)
        for (const auto& [kb, vb] : b) {
            PolyKey k{ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2], ka[3] + kb[3]};
            out[k] += va * vb;
        }
    return out;
}

Poly poly_pow4(const Poly& p) {
    const Poly p2 = poly_mul(p, p);
    return poly_mul(p2, p2);
}

}  // namespace

MetricModel conformal_perturbed(double mass, const std::vector<ConformalTerm>& terms, double cutoff_radius) {
    Poly phi;
    phi[{0, 0, 0, 0}] = 1.0;
    if (mass != 0.0) phi[{1, 0, 0, 0}] = 0.5 * mass;
    Poly u = phi;
    for (const auto& t : terms) {
        const double rounded = std::round(t.decay);
        if (std::abs(rounded - t.decay) > 0.0 || rounded < 2.0) {
            throw PreconditionError("conformal terms need integer decay exponents >= 2");
        }
        PolyKey k{static_cast<int>(rounded), t.profile.powers[0], t.profile.powers[1], t.profile.powers[2]};
        u[k] += t.profile.coefficient;
    }
    Poly diff = poly_pow4(u);
    for (const auto& [k, v] : poly_pow4(phi)) diff[k] -= v;

    std::map<int, std::vector<Monomial>> by_decay;
    for (const auto& [k, v] : diff) {
        if (v == 0.0) continue;
        // Orders below 2 cancel analytically against phi^4; drop rounding residue.
        if (k[0] < 2 && std::abs(v) < 1e-12) continue;
        by_decay[k[0]].push_back(Monomial{v, {k[1], k[2], k[3]}});
    }
    PerturbationSpec spec;
    spec.cutoff_radius = cutoff_radius;
    for (const auto& [p, monos] : by_decay) {
        if (p < 2) throw PreconditionError("conformal expansion produced a term decaying slower than |x|^-2");
        for (int i = 0; i < 3; ++i) spec.terms.push_back(PerturbationTerm{static_cast<double>(p), monos, i, i});
    }
    return MetricModel::perturbed(mass, std::move(spec));
}

}  // namespace cmcprobe
