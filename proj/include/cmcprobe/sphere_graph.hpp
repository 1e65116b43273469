#pragma once

#include <Eigen/Dense>

#include "cmcprobe/spherical_harmonics.hpp"

namespace cmcprobe {

// Radial graph {center + scale (1 + f(u)) u : u in S^2} with f a real harmonic series of degree <= L.
// Construction enforces the embedding guard sup|f| + sup|grad f| < 1/2, measured on
// a grid refined twice beyond the minimal one for L.
class SphereGraph {
public:
    SphereGraph(const Vec3& center, double scale, int degree, Eigen::VectorXd coeffs);

    static SphereGraph round(const Vec3& center, double radius, int degree);

    const Vec3& center() const { return center_; }
    double scale() const { return scale_; }
    int degree() const { return degree_; }
    const Eigen::VectorXd& coeffs() const { return coeffs_; }
    double coefficient(int l, int m) const { return coeffs_[mode_index(l, m)]; }

    SphereGraph with_coeffs(Eigen::VectorXd coeffs) const;
    // Homothety x -> factor * x of the whole chart (center and scale both scale).
    SphereGraph dilated(double factor) const;
    SphereGraph translated(const Vec3& shift) const;
    // Same function at a different truncation degree (zero padded or truncated).
    SphereGraph with_degree(int degree) const;

    // sup|f| + sup|grad f| on the refined grid.
    double c1_norm() const { return c1_norm_; }

    PointValue value_at(const Vec3& direction) const;
    Vec3 point(const Vec3& direction) const;

    // Distance from the chart origin to the surface.
    double inner_radius() const;
    // Ray-crossing test; a radial graph meets each ray from its center exactly once.
    bool encloses(const Vec3& p) const;
    // Coordinate (Euclidean) volume of the enclosed region.
    double enclosed_volume() const;

private:
    Vec3 center_;
    double scale_;
    int degree_;
    Eigen::VectorXd coeffs_;
    double c1_norm_ = 0.0;
};

// Embedding guard threshold sup|f| + sup|grad f| < 1/2.
inline constexpr double kEmbeddingBound = 0.5;
// Moment normalization requires a smaller proxy norm for the fixed point map to contract.
inline constexpr double kMomentNormBound = 0.2;

const QuadratureGrid& refined_grid(int L);

NodeFields synthesize(const SphereGraph& graph, const QuadratureGrid& grid);

struct MomentNormalization {
    SphereGraph graph;
    Vec3 translation = Vec3::Zero();  // new center minus old center
    double scale_factor = 1.0;        // new scale / old scale
    int iterations = 0;
    double moment_residual = 0.0;     // max |integral x^a f'| after translation
};

// Re-centers the graph so its first moments vanish, then changes the scale so the mean vanishes.
// The output describes the same surface (up to truncation at the graph degree).
MomentNormalization moment_normalize(const SphereGraph& graph, double tolerance = 1e-13, int max_iterations = 50);

// Integrals over the unit sphere of f, x^a f (a = 1, 2, 3) from the coefficients.
double mean_moment(const Eigen::VectorXd& coeffs);
Vec3 first_moments(const Eigen::VectorXd& coeffs);

}  // namespace cmcprobe
