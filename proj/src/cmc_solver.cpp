#include "cmcprobe/cmc_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "cmcprobe/detail/node_geometry.hpp"
#include "cmcprobe/errors.hpp"
#include "cmcprobe/surface_geometry.hpp"

namespace cmcprobe {

namespace {

using D6 = Dual<6>;

constexpr double kSqrt4Pi = 3.5449077018110318;
// Relative singular-value cutoff; exact translation kernels in flat space fall below it.
constexpr double kRankThreshold = 1e-6;

detail::NodeFrame frame_at(const QuadratureGrid& grid, int n) {
    return {grid.nodes()[n], grid.e_theta()[n], grid.e_phi()[n]};
}

MetricJet jet_at(const MetricModel& model, const Vec3& x) {
    if (model.kind() == MetricKind::euclidean) return MetricJet{};
    return model.evaluate(x);
}

struct Evaluation {
    Eigen::VectorXd residual;  // Galerkin projection of H - H_target
    double max_node = 0.0;
};

Evaluation evaluate(const SphereGraph& g, const MetricModel& model, const QuadratureGrid& grid, double H_target) {
    std::vector<double> H = node_mean_curvature(g, model, grid);
    Evaluation e;
    for (double& h : H) {
        h -= H_target;
        e.max_node = std::max(e.max_node, std::abs(h));
    }
    if (!std::isfinite(e.max_node)) throw GeometryError("non-finite mean curvature", -1);
    e.residual = analyze(H, grid, g.degree());
    return e;
}

Eigen::MatrixXd finite_difference_jacobian(const SphereGraph& g, const MetricModel& model, const QuadratureGrid& grid,
                                           double step) {
    const int n = static_cast<int>(g.coeffs().size());
    Eigen::MatrixXd J(n, n);
    for (int j = 0; j < n; ++j) {
        Eigen::VectorXd cp = g.coeffs(), cm = g.coeffs();
        cp[j] += step;
        cm[j] -= step;
        const Eigen::VectorXd rp = evaluate(g.with_coeffs(cp), model, grid, 0.0).residual;
        const Eigen::VectorXd rm = evaluate(g.with_coeffs(cm), model, grid, 0.0).residual;
        J.col(j) = (rp - rm) / (2.0 * step);
    }
    return J;
}

// Same surface with the mean of f moved into the scale.
SphereGraph absorb_mean(const SphereGraph& g) {
    const double mu = g.coeffs()[0] / kSqrt4Pi;
    if (mu == 0.0 || !(1.0 + mu > 0.0)) return g;
    Eigen::VectorXd c = g.coeffs() / (1.0 + mu);
    c[0] = 0.0;
    return SphereGraph(g.center(), g.scale() * (1.0 + mu), g.degree(), std::move(c));
}

}  // namespace

std::vector<double> node_mean_curvature(const SphereGraph& graph, const MetricModel& model,
                                        const QuadratureGrid& grid) {
    grid.require_capacity(graph.degree());
    const NodeFields nf = synthesize(graph, grid);
    const double s = graph.scale();
    std::vector<double> H(grid.size());
    for (int n = 0; n < grid.size(); ++n) {
        const detail::NodeFrame fr = frame_at(grid, n);
        const double f0 = nf.f[n];
        const MetricJet jet = jet_at(model, graph.center() + s * (1.0 + f0) * fr.u);
        const detail::GraphJet<double> q{f0, nf.grad1[n], nf.grad2[n], nf.hess11[n], nf.hess12[n], nf.hess22[n]};
        H[n] = detail::node_geometry(fr, s, jet, f0, q).H;
    }
    return H;
}

Eigen::MatrixXd mean_curvature_jacobian(const SphereGraph& graph, const MetricModel& model,
                                        const QuadratureGrid& grid) {
    grid.require_capacity(graph.degree());
    const NodeFields nf = synthesize(graph, grid);
    const double s = graph.scale();
    const int N = grid.size();
    std::vector<BilinearTerm> terms(6);
    const Deriv kinds[6] = {Deriv::value, Deriv::dt, Deriv::dp, Deriv::dtt, Deriv::dtp, Deriv::dpp};
    for (int k = 0; k < 6; ++k) {
        terms[k].test = Deriv::value;
        terms[k].trial = kinds[k];
        terms[k].coefficient.assign(N, 0.0);
    }
    for (int n = 0; n < N; ++n) {
        const detail::NodeFrame fr = frame_at(grid, n);
        const double f0 = nf.f[n];
        const MetricJet jet = jet_at(model, graph.center() + s * (1.0 + f0) * fr.u);
        const detail::GraphJet<D6> q{D6::variable(f0, 0),          D6::variable(nf.grad1[n], 1),
                                     D6::variable(nf.grad2[n], 2), D6::variable(nf.hess11[n], 3),
                                     D6::variable(nf.hess12[n], 4), D6::variable(nf.hess22[n], 5)};
        const auto d = detail::node_geometry(fr, s, jet, f0, q).H.d;
        const double t = grid.colatitudes()[grid.ring_of(n)];
        const double st = std::sin(t), cot = std::cos(t) / st;
        terms[0].coefficient[n] = d[0];
        terms[1].coefficient[n] = d[1] + cot * d[5];
        terms[2].coefficient[n] = (d[2] - cot * d[4]) / st;
        terms[3].coefficient[n] = d[3];
        terms[4].coefficient[n] = d[4] / st;
        terms[5].coefficient[n] = d[5] / (st * st);
    }
    return assemble_bilinear(grid, graph.degree(), terms);
}

SolveReport solve_cmc(const SphereGraph& initial, const MetricModel& model, double H_target,
                      const SolveOptions& opts) {
    if (!(H_target > 0.0)) throw PreconditionError("target mean curvature must be positive");
    const QuadratureGrid grid(opts.n_theta, opts.n_phi);
    grid.require_capacity(initial.degree());

    SolveReport rep{.surface = initial, .H_target = H_target, .diagnostic = {}, .residual_history = {}};
    SphereGraph cur = initial;
    Evaluation ev;
    try {
        ev = evaluate(cur, model, grid, H_target);
    } catch (const Error& e) {
        rep.diagnostic = std::string("initial surface rejected: ") + e.what();
        rep.final_residual = std::numeric_limits<double>::infinity();
        return rep;
    }

    int growth = 0;
    int it = 0;
    for (;; ++it) {
        rep.residual_history.push_back(ev.max_node);
        if (ev.max_node <= opts.tolerance) {
            rep.converged = true;
            break;
        }
        if (it >= opts.max_iterations) {
            std::ostringstream os;
            os << "iteration cap " << opts.max_iterations << " reached (residual " << ev.max_node << ")";
            rep.diagnostic = os.str();
            break;
        }
        Eigen::MatrixXd J;
        try {
            J = opts.finite_difference_jacobian
                    ? finite_difference_jacobian(cur, model, grid, opts.finite_difference_step)
                    : mean_curvature_jacobian(cur, model, grid);
        } catch (const Error& e) {
            rep.diagnostic = std::string("jacobian evaluation failed: ") + e.what();
            break;
        }
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
        cod.setThreshold(kRankThreshold);
        cod.compute(J);
        const Eigen::VectorXd step = cod.solve(-ev.residual);

        const double norm = ev.residual.norm();
        double t = 1.0;
        bool have = false, sufficient = false;
        SphereGraph cand = cur;
        Evaluation cev;
        std::string last_error;
        while (true) {
            try {
                SphereGraph trial = cur.with_coeffs(cur.coeffs() + t * step);
                Evaluation tev = evaluate(trial, model, grid, H_target);
                cand = std::move(trial);
                cev = std::move(tev);
                have = true;
                if (cev.residual.norm() <= (1.0 - 1e-4 * t) * norm) {
                    sufficient = true;
                    break;
                }
            } catch (const Error& e) {
                have = false;
                last_error = e.what();
            }
            if (t * opts.backtrack_factor < opts.backtrack_floor) break;
            t *= opts.backtrack_factor;
        }
        if (!have) {
            rep.diagnostic = "no admissible damped step: " + last_error;
            break;
        }
        const bool grew = !sufficient && cev.residual.norm() > norm;
        growth = grew ? growth + 1 : 0;
        cur = std::move(cand);
        ev = std::move(cev);
        if (growth >= opts.divergence_window) {
            std::ostringstream os;
            os << "diverged: residual grew over " << growth << " successive damped steps";
            rep.diagnostic = os.str();
            ++it;
            rep.residual_history.push_back(ev.max_node);
            break;
        }
    }

    rep.iterations = it;
    rep.final_residual = ev.max_node;
    try {
        cur = absorb_mean(cur);
    } catch (const Error&) {
    }
    rep.surface = cur;

    try {
        const QuadratureGrid fine = QuadratureGrid::refined_for(cur.degree());
        const std::vector<double> H = node_mean_curvature(cur, model, fine);
        double worst = 0.0;
        for (double h : H) worst = std::max(worst, std::abs(h - H_target));
        rep.certified_residual = worst;
    } catch (const Error&) {
        rep.certified_residual = std::numeric_limits<double>::infinity();
    }

    if (rep.converged && opts.compute_stability) {
        rep.stability_eigenvalue = jacobi_spectrum(cur, model, 1, grid).front();
        rep.stability_computed = true;
        rep.stable = rep.stability_eigenvalue >= kStabilityThreshold;
    }
    return rep;
}

std::vector<double> jacobi_spectrum(const SphereGraph& surface, const MetricModel& model, int k,
                                    const QuadratureGrid& grid) {
    const int L = surface.degree();
    const GeometryCache cache = build_geometry(surface, model, grid);
    const int N = grid.size();
    std::vector<double> density(N), c11(N), c12(N), c22(N), pot(N);
    for (int n = 0; n < N; ++n) {
        const double g11 = cache.g.gam11[n], g12 = cache.g.gam12[n], g22 = cache.g.gam22[n];
        const double det = g11 * g22 - g12 * g12;
        const double J = std::sqrt(det);
        const double t = grid.colatitudes()[grid.ring_of(n)];
        const double st = std::sin(t);
        density[n] = J;
        c11[n] = J * g22 / det;
        c12[n] = -J * g12 / det / st;
        c22[n] = J * g11 / det / (st * st);
        pot[n] = -J * (cache.g.h_norm2[n] + cache.ric_nn[n]);
    }
    const Eigen::MatrixXd Q = assemble_bilinear(grid, L,
                                                {{Deriv::dt, Deriv::dt, c11},
                                                 {Deriv::dt, Deriv::dp, c12},
                                                 {Deriv::dp, Deriv::dt, c12},
                                                 {Deriv::dp, Deriv::dp, c22},
                                                 {Deriv::value, Deriv::value, pot}});
    const Eigen::MatrixXd M = assemble_bilinear(grid, L, {{Deriv::value, Deriv::value, density}});
    const Eigen::VectorXd b = analyze(density, grid, L);

    const int n = static_cast<int>(b.size());
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(b);
    const Eigen::MatrixXd Z = Eigen::MatrixXd(qr.householderQ()).rightCols(n - 1);
    Eigen::MatrixXd Qr = Z.transpose() * Q * Z;
    Eigen::MatrixXd Mr = Z.transpose() * M * Z;
    Qr = 0.5 * (Qr + Qr.transpose()).eval();
    Mr = 0.5 * (Mr + Mr.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Qr, Mr, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw GeometryError("stability eigenproblem failed", -1);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const int count = std::min<int>(k, static_cast<int>(ev.size()));
    return std::vector<double>(ev.data(), ev.data() + count);
}

std::vector<double> jacobi_spectrum(const SphereGraph& surface, const MetricModel& model, int k) {
    return jacobi_spectrum(surface, model, k, QuadratureGrid::standard());
}

std::vector<double> stability_spectrum(const SolveReport& report, const MetricModel& model, int k) {
    if (!report.converged) throw PreconditionError("stability spectrum requires a converged CMC solution");
    return jacobi_spectrum(report.surface, model, k);
}

double centered_sphere_mean_curvature(double mass, double r) {
    const double phi = 1.0 + 0.5 * mass / r;
    return (2.0 / r - 2.0 * mass / (r * r * phi)) / (phi * phi);
}

double centered_sphere_radius(double mass, double H) {
    if (!(H > 0.0)) throw PreconditionError("mean curvature must be positive");
    if (mass == 0.0) return 2.0 / H;
    if (mass < 0.0) throw PreconditionError("mass must be nonnegative");
    auto neg = [&](double r) { return -centered_sphere_mean_curvature(mass, r); };
    const auto peak = boost::math::tools::brent_find_minima(neg, 0.5 * mass * (1.0 + 1e-9), 100.0 * mass, 60);
    const double r_peak = peak.first;
    const double H_peak = -peak.second;
    if (H > H_peak) {
        std::ostringstream os;
        os << "no centered sphere has mean curvature " << H << " (maximum " << H_peak << ")";
        throw PreconditionError(os.str());
    }
    double hi = std::max(2.0 * r_peak, 4.0 / H);
    while (centered_sphere_mean_curvature(mass, hi) > H) hi *= 2.0;
    auto f = [&](double r) { return centered_sphere_mean_curvature(mass, r) - H; };
    std::uintmax_t iters = 200;
    const auto bracket = boost::math::tools::toms748_solve(
        f, r_peak, hi, boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (bracket.first + bracket.second);
}

FoliationTrace trace_foliation(const MetricModel& model, double H_start, double H_end, int n_leaves, int L,
                               const SolveOptions& opts) {
    if (!(H_end > 0.0 && H_end < H_start)) throw PreconditionError("foliation requires 0 < H_end < H_start");
    if (n_leaves < 1) throw PreconditionError("foliation needs at least one leaf");
    FoliationTrace trace{.leaves = {}, .metric = model, .diagnostic = {}};
    const double r_start = centered_sphere_radius(model.mass(), H_start);
    SphereGraph seed = SphereGraph::round(Vec3::Zero(), r_start, L);
    double previous_volume = -1.0;
    for (int k = 0; k < n_leaves; ++k) {
        const double H = n_leaves == 1 ? H_start : H_start * std::pow(H_end / H_start, double(k) / (n_leaves - 1));
        SolveReport rep = solve_cmc(seed, model, H, opts);
        std::ostringstream os;
        if (!rep.converged) {
            os << "leaf " << k << " (H = " << H << ") did not converge: " << rep.diagnostic;
        } else if (opts.compute_stability && !rep.stable) {
            os << "leaf " << k << " (H = " << H << ") is unstable (eigenvalue " << rep.stability_eigenvalue << ")";
        } else {
            const double volume = rep.surface.enclosed_volume();
            if (!(volume > previous_volume))
                os << "leaf " << k << " (H = " << H << ") is not nested around the previous leaf";
            previous_volume = volume;
        }
        if (!os.str().empty()) {
            trace.truncated = true;
            trace.diagnostic = os.str();
            break;
        }
        if (k + 1 < n_leaves) {
            const double H_next = H_start * std::pow(H_end / H_start, double(k + 1) / (n_leaves - 1));
            const double factor =
                centered_sphere_radius(model.mass(), H_next) / centered_sphere_radius(model.mass(), H);
            seed = rep.surface.dilated(factor);
        }
        trace.leaves.push_back(std::move(rep));
    }
    return trace;
}

}  // namespace cmcprobe
