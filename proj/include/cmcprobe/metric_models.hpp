#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cmcprobe {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// coefficient * n_x^a n_y^b n_z^c with n = x/|x|.
struct Monomial {
    double coefficient = 0.0;
    std::array<int, 3> powers{0, 0, 0};

    int degree() const { return powers[0] + powers[1] + powers[2]; }
};

// One decaying perturbation component:
//   sigma_ij(x) += |x|^{-decay} * sum_k profile_k(x/|x|),  and symmetrically sigma_ji.
struct PerturbationTerm {
    double decay = 2.0;
    std::vector<Monomial> profile;
    int i = 0;
    int j = 0;
};

struct PerturbationSpec {
    std::vector<PerturbationTerm> terms;
    // Decay bounds are asserted on [cutoff_radius, 10 * cutoff_radius].
    double cutoff_radius = 2.0;
};

enum class MetricKind { euclidean, schwarzschild, perturbed };

std::string to_string(MetricKind kind);
MetricKind metric_kind_from_string(const std::string& name);

// Metric and its first two coordinate derivatives at one point.
//   dg[k](i, j)     = d_k g_ij
//   ddg[k][l](i, j) = d_k d_l g_ij
struct MetricJet {
    Mat3 g = Mat3::Identity();
    std::array<Mat3, 3> dg{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
    std::array<std::array<Mat3, 3>, 3> ddg{
        {{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()},
         {Mat3::Zero(), Mat3::Zero(), Mat3::Zero()},
         {Mat3::Zero(), Mat3::Zero(), Mat3::Zero()}}};
};

// Levi-Civita data assembled from a MetricJet.
struct Curvature {
    std::array<Mat3, 3> christoffel;  // christoffel[k](i, j) = Gamma^k_ij
    std::array<double, 81> riemann{}; // fully lowered, R(a,b,a,b) > 0 on round spheres
    Mat3 ricci = Mat3::Zero();
    double scalar = 0.0;

    double rm(int a, int b, int c, int d) const { return riemann[((a * 3 + b) * 3 + c) * 3 + d]; }
    // Sectional-curvature numerator R(u, v, u, v).
    double rm(const Vec3& u, const Vec3& v) const;
};

Curvature curvature_from_jet(const MetricJet& jet);

// Background metric on the chart at infinity. Immutable after construction.
class MetricModel {
public:
    static MetricModel euclidean();
    static MetricModel schwarzschild(double mass);
    static MetricModel perturbed(double mass, PerturbationSpec perturbation);

    MetricKind kind() const { return kind_; }
    // Zero for the euclidean kind regardless of the stored value.
    double mass() const { return kind_ == MetricKind::euclidean ? 0.0 : mass_; }
    const PerturbationSpec* perturbation() const {
        return perturbation_ ? &*perturbation_ : nullptr;
    }

    bool in_domain(const Vec3& x) const;
    // Throws DomainError naming the radius when x lies in the excluded region.
    void check_domain(const Vec3& x) const;

    // (1 + m/2|x|)^4
    double conformal_factor(const Vec3& x) const;

    MetricJet evaluate(const Vec3& x) const;
    // Perturbation sigma_ij alone (zero outside the perturbed kind).
    MetricJet perturbation_jet(const Vec3& x) const;

private:
    MetricModel(MetricKind kind, double mass, std::optional<PerturbationSpec> perturbation);

    MetricKind kind_;
    double mass_;
    std::optional<PerturbationSpec> perturbation_;
};

MetricJet evaluate_metric(const MetricModel& model, const Vec3& x);
double scalar_curvature(const MetricModel& model, const Vec3& x);

// Additive term of a conformal factor  u = 1 + m/(2|x|) + sum_k coefficient * n^powers * |x|^{-decay}.
struct ConformalTerm {
    double decay = 2.0;
    Monomial profile;
};

// The perturbed model g = u^4 delta, expanded exactly into PerturbationTerms
// relative to the Schwarzschild factor (every generated term decays at least like |x|^{-2}).
// Harmonic u (e.g. a dipole z/|x|^3) gives R = 0; u = phi - c|x|^{-2} with c > 0 gives R > 0.
MetricModel conformal_perturbed(double mass, const std::vector<ConformalTerm>& terms,
                                double cutoff_radius = 2.0);

}  // namespace cmcprobe
