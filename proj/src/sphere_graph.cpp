#include "cmcprobe/sphere_graph.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>

#include "cmcprobe/errors.hpp"

namespace cmcprobe {

namespace {

constexpr double kSqrt4Pi = 3.5449077018110318;         // sqrt(4 pi)
constexpr double kSqrt4PiOver3 = 2.0466534158929770;    // sqrt(4 pi / 3)

double proxy_c1_norm(const Eigen::VectorXd& coeffs, int L) {
    const QuadratureGrid& grid = refined_grid(L);
    const NodeFields nf = synthesize(coeffs, L, grid);
    double fmax = 0.0, gmax = 0.0;
    for (int n = 0; n < nf.size(); ++n) {
        fmax = std::max(fmax, std::abs(nf.f[n]));
        gmax = std::max(gmax, std::sqrt(nf.grad_norm2(n)));
    }
    return fmax + gmax;
}

// Radial graph function about center + shift describing the same surface, sampled on grid nodes.
std::vector<double> recentered_values(const SphereGraph& g, const Vec3& shift, const QuadratureGrid& grid) {
    const double s = g.scale();
    std::vector<double> out(grid.size());
    for (int n = 0; n < grid.size(); ++n) {
        const Vec3& u = grid.nodes()[n];
        double rho = s * (1.0 + g.value_at(u).f);
        for (int it = 0; it < 100; ++it) {
            const Vec3 dir = (shift + rho * u).normalized();
            const double R = s * (1.0 + g.value_at(dir).f);
            const double wu = shift.dot(u);
            const double next = -wu + std::sqrt(wu * wu - shift.squaredNorm() + R * R);
            const double delta = std::abs(next - rho);
            rho = next;
            if (delta < 1e-15 * s) break;
        }
        out[n] = rho / s - 1.0;
    }
    return out;
}

}  // namespace

const QuadratureGrid& refined_grid(int L) {
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<QuadratureGrid>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[L];
    if (!slot) slot = std::make_unique<QuadratureGrid>(QuadratureGrid::refined_for(L));
    return *slot;
}

SphereGraph::SphereGraph(const Vec3& center, double scale, int degree, Eigen::VectorXd coeffs)
    : center_(center), scale_(scale), degree_(degree), coeffs_(std::move(coeffs)) {
    if (!(scale_ > 0.0) || !std::isfinite(scale_)) throw EmbeddingError("graph scale must be positive and finite");
    if (degree_ < 0) throw EmbeddingError("graph degree must be nonnegative");
    if (coeffs_.size() != mode_count(degree_)) {
        std::ostringstream os;
        os << "graph of degree " << degree_ << " needs " << mode_count(degree_) << " coefficients, got "
           << coeffs_.size();
        throw EmbeddingError(os.str());
    }
    if (!coeffs_.allFinite()) throw EmbeddingError("graph coefficients must be finite");
    c1_norm_ = proxy_c1_norm(coeffs_, degree_);
    if (!(c1_norm_ < kEmbeddingBound)) {
        std::ostringstream os;
        os.precision(6);
        os << "graph violates the embedding guard: sup|f| + sup|grad f| = " << c1_norm_ << " >= "
           << kEmbeddingBound;
        throw EmbeddingError(os.str());
    }
}

SphereGraph SphereGraph::round(const Vec3& center, double radius, int degree) {
    return SphereGraph(center, radius, degree, Eigen::VectorXd::Zero(mode_count(degree)));
}

SphereGraph SphereGraph::with_coeffs(Eigen::VectorXd coeffs) const {
    return SphereGraph(center_, scale_, degree_, std::move(coeffs));
}

SphereGraph SphereGraph::dilated(double factor) const {
    return SphereGraph(center_ * factor, scale_ * factor, degree_, coeffs_);
}

SphereGraph SphereGraph::translated(const Vec3& shift) const {
    return SphereGraph(center_ + shift, scale_, degree_, coeffs_);
}

SphereGraph SphereGraph::with_degree(int degree) const {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(mode_count(degree));
    const int n = std::min(mode_count(degree), mode_count(degree_));
    c.head(n) = coeffs_.head(n);
    return SphereGraph(center_, scale_, degree, std::move(c));
}

PointValue SphereGraph::value_at(const Vec3& direction) const {
    return evaluate_harmonics(coeffs_, degree_, direction);
}

Vec3 SphereGraph::point(const Vec3& direction) const {
    const Vec3 u = direction.normalized();
    return center_ + scale_ * (1.0 + value_at(u).f) * u;
}

double SphereGraph::inner_radius() const {
    const QuadratureGrid& grid = refined_grid(degree_);
    const NodeFields nf = synthesize(coeffs_, degree_, grid);
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int n = 0; n < grid.size(); ++n) {
        const double d = (center_ + scale_ * (1.0 + nf.f[n]) * grid.nodes()[n]).norm();
        if (d < best_d) {
            best_d = d;
            best = n;
        }
    }
    // Pattern search on the sphere around the best node.
    Vec3 u = grid.nodes()[best];
    double step = M_PI / grid.n_theta();
    auto dist = [&](const Vec3& v) { return point(v).norm(); };
    best_d = dist(u);
    while (step > 1e-10) {
        Vec3 a = std::abs(u.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
        const Vec3 t1 = u.cross(a).normalized();
        const Vec3 t2 = u.cross(t1);
        bool moved = false;
        for (const Vec3& dir : {t1, Vec3(-t1), t2, Vec3(-t2)}) {
            const Vec3 cand = (u + step * dir).normalized();
            const double d = dist(cand);
            if (d < best_d) {
                best_d = d;
                u = cand;
                moved = true;
                break;
            }
        }
        if (!moved) step *= 0.5;
    }
    return best_d;
}

bool SphereGraph::encloses(const Vec3& p) const {
    const Vec3 v = p - center_;
    const double r = v.norm();
    if (r == 0.0) return true;
    return r < scale_ * (1.0 + value_at(v / r).f);
}

double SphereGraph::enclosed_volume() const {
    const QuadratureGrid& grid = refined_grid(degree_);
    const NodeFields nf = synthesize(coeffs_, degree_, grid);
    double v = 0.0;
    for (int n = 0; n < grid.size(); ++n) {
        const double rho = scale_ * (1.0 + nf.f[n]);
        v += grid.weights()[n] * rho * rho * rho / 3.0;
    }
    return v;
}

NodeFields synthesize(const SphereGraph& graph, const QuadratureGrid& grid) {
    return synthesize(graph.coeffs(), graph.degree(), grid);
}

double mean_moment(const Eigen::VectorXd& coeffs) { return kSqrt4Pi * coeffs[0]; }

Vec3 first_moments(const Eigen::VectorXd& coeffs) {
    if (coeffs.size() < 4) return Vec3::Zero();
    return kSqrt4PiOver3 * Vec3(coeffs[mode_index(1, 1)], coeffs[mode_index(1, -1)], coeffs[mode_index(1, 0)]);
}

MomentNormalization moment_normalize(const SphereGraph& graph, double tolerance, int max_iterations) {
    if (!(graph.c1_norm() < kMomentNormBound)) {
        std::ostringstream os;
        os << "moment normalization requires sup|f| + sup|grad f| < " << kMomentNormBound << ", got "
           << graph.c1_norm();
        throw NormalizationError(os.str(), graph.c1_norm());
    }
    const int L = graph.degree();
    if (L < 1) {
        // Degree zero graphs are already centered; only the homothety applies.
        const double mu = graph.coeffs()[0] / kSqrt4Pi;
        Eigen::VectorXd c = Eigen::VectorXd::Zero(1);
        return {SphereGraph(graph.center(), graph.scale() * (1.0 + mu), 0, c), Vec3::Zero(), 1.0 + mu, 0, 0.0};
    }
    const double s = graph.scale();
    const QuadratureGrid& grid = refined_grid(L);
    Vec3 shift = Vec3::Zero();
    Eigen::VectorXd coeffs = graph.coeffs();
    double residual = first_moments(coeffs).cwiseAbs().maxCoeff();
    int it = 0;
    while (residual > tolerance) {
        if (it >= max_iterations) {
            std::ostringstream os;
            os << "moment fixed-point iteration did not contract in " << max_iterations
               << " steps (residual " << residual << ")";
            throw NormalizationError(os.str(), residual);
        }
        shift += s * (3.0 / (4.0 * M_PI)) * first_moments(coeffs);
        const std::vector<double> values = recentered_values(graph, shift, grid);
        coeffs = analyze(values, grid, L);
        residual = first_moments(coeffs).cwiseAbs().maxCoeff();
        ++it;
    }
    const double mu = coeffs[0] / kSqrt4Pi;
    Eigen::VectorXd scaled = coeffs / (1.0 + mu);
    scaled[0] = 0.0;
    // Exact zeroes keep repeated normalization idempotent.
    for (int m = -1; m <= 1; ++m)
        if (std::abs(scaled[mode_index(1, m)]) < tolerance) scaled[mode_index(1, m)] = 0.0;
    MomentNormalization out{SphereGraph(graph.center() + shift, s * (1.0 + mu), L, scaled), shift, 1.0 + mu, it,
                            residual};
    return out;
}

}  // namespace cmcprobe
