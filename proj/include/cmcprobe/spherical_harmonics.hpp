#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cmcprobe/metric_models.hpp"

namespace cmcprobe {

// Real orthonormal spherical harmonics Y_lm, -l <= m <= l, with
//   Y_l0  = Lambda_l0(t),  Y_lm = sqrt2 Lambda_l|m|(t) cos(m p)  (m > 0),
//   Y_l-m = sqrt2 Lambda_lm(t) sin(m p),
// no Condon-Shortley phase, and integral over S^2 of Y_lm Y_l'm' equal to delta.
// Coefficients are stored flat at index l*l + l + m.
inline constexpr int mode_count(int L) { return (L + 1) * (L + 1); }
inline constexpr int mode_index(int l, int m) { return l * l + l + m; }

// Gauss-Legendre colatitude rings times uniform longitudes.
class QuadratureGrid {
public:
    QuadratureGrid(int n_theta, int n_phi);

    // Default working grid 32 x 64.
    static QuadratureGrid standard() { return QuadratureGrid(32, 64); }
    // Grid with twice the minimal resolution for degree L.
    static QuadratureGrid refined_for(int L) { return QuadratureGrid(2 * (L + 1), 4 * (L + 1)); }

    int n_theta() const { return n_theta_; }
    int n_phi() const { return n_phi_; }
    int size() const { return n_theta_ * n_phi_; }

    // Largest degree L with every product of two degree-L harmonics integrated exactly.
    int capacity() const;
    // Throws CapacityError when L exceeds capacity().
    void require_capacity(int L) const;

    const std::vector<double>& colatitudes() const { return theta_; }
    const std::vector<double>& ring_weights() const { return ring_weight_; }  // Gauss-Legendre weights
    const std::vector<double>& longitudes() const { return phi_; }
    double longitude_weight() const { return 2.0 * M_PI / n_phi_; }

    const std::vector<Vec3>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }
    // Orthonormal tangent frame (e_theta, e_phi) with e_theta x e_phi = node.
    const std::vector<Vec3>& e_theta() const { return e_theta_; }
    const std::vector<Vec3>& e_phi() const { return e_phi_; }

    int ring_of(int node) const { return node / n_phi_; }

private:
    int n_theta_;
    int n_phi_;
    std::vector<double> theta_;
    std::vector<double> ring_weight_;
    std::vector<double> phi_;
    std::vector<Vec3> nodes_;
    std::vector<double> weights_;
    std::vector<Vec3> e_theta_;
    std::vector<Vec3> e_phi_;
};

// Per-node derivatives of a band-limited function. Raw coordinate derivatives
// in (t, p) plus the sphere gradient and covariant Hessian in the orthonormal frame.
struct NodeFields {
    std::vector<double> f, f_t, f_p, f_tt, f_tp, f_pp;
    std::vector<double> grad1, grad2;          // (df)(e_theta), (df)(e_phi)
    std::vector<double> hess11, hess12, hess22; // Hess f on the frame

    int size() const { return static_cast<int>(f.size()); }
    double grad_norm2(int n) const { return grad1[n] * grad1[n] + grad2[n] * grad2[n]; }
    double laplacian(int n) const { return hess11[n] + hess22[n]; }
};

NodeFields synthesize(const Eigen::VectorXd& coeffs, int L, const QuadratureGrid& grid);
Eigen::VectorXd analyze(std::span<const double> values, const QuadratureGrid& grid, int L);

// Quadrature integral of node values against the unit-sphere measure.
double integrate(std::span<const double> values, const QuadratureGrid& grid);

struct PointValue {
    double f = 0.0;
    Vec3 gradient = Vec3::Zero();  // tangent to the sphere at the evaluation direction
};

// Direct evaluation of a harmonic series at an arbitrary unit direction.
PointValue evaluate_harmonics(const Eigen::VectorXd& coeffs, int L, const Vec3& direction);

// Coordinate derivative applied to a basis function in a bilinear form.
enum class Deriv { value, dt, dp, dtt, dtp, dpp };

struct BilinearTerm {
    Deriv test = Deriv::value;
    Deriv trial = Deriv::value;
    std::vector<double> coefficient;  // per node; quadrature weights are applied by the assembler
};

// A(i, j) = sum_nodes w_n sum_terms c_n (D_test Y_i)(n) (D_trial Y_j)(n)
Eigen::MatrixXd assemble_bilinear(const QuadratureGrid& grid, int L, const std::vector<BilinearTerm>& terms);

}  // namespace cmcprobe
