#include "cmcprobe/harness.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "cmcprobe/cmc_solver.hpp"
#include "cmcprobe/errors.hpp"
#include "cmcprobe/functionals.hpp"
#include "cmcprobe/serialization.hpp"
#include "cmcprobe/surface_geometry.hpp"

extern char** environ;

namespace cmcprobe {

namespace {

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

double to_number(const std::string& field, const std::string& text) {
    try {
        return parse_double(text);
    } catch (const Error&) {
        throw ConfigError(field, "expected a number, got '" + text + "'");
    }
}

int to_int(const std::string& field, const std::string& text) {
    const double v = to_number(field, text);
    if (std::floor(v) != v || std::abs(v) > 1e9) throw ConfigError(field, "expected an integer, got '" + text + "'");
    return static_cast<int>(v);
}

bool to_bool(const std::string& field, const std::string& text) {
    const std::string t = lower(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ConfigError(field, "expected a boolean, got '" + text + "'");
}

std::vector<double> to_numbers(const std::string& field, const std::string& text) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) out.push_back(to_number(field, item));
    return out;
}

int axis_of(char c) {
    switch (c) {
        case 'x': return 0;
        case 'y': return 1;
        case 'z': return 2;
        default: return -1;
    }
}

// coef*xyz  or  coef*1
Monomial parse_monomial(const std::string& field, const std::string& token) {
    const auto star = token.find('*');
    Monomial m;
    const std::string coef = star == std::string::npos ? token : token.substr(0, star);
    m.coefficient = to_number(field, coef);
    if (star == std::string::npos) return m;
    const std::string mono = lower(token.substr(star + 1));
    if (mono == "1") return m;
    for (char c : mono) {
        const int a = axis_of(c);
        if (a < 0) throw ConfigError(field, "monomial '" + mono + "' may only contain x, y, z or be 1");
        ++m.powers[a];
    }
    return m;
}

int term_index(const std::string& field, const std::string& suffix) {
    if (suffix.empty()) throw ConfigError(field, "missing term index");
    for (char c : suffix)
        if (!std::isdigit(static_cast<unsigned char>(c))) throw ConfigError(field, "term index must be an integer");
    return std::stoi(suffix);
}

PerturbationTerm parse_term(const std::string& field, const std::string& value) {
    const auto parts = split_list(value);
    if (parts.size() < 3) throw ConfigError(field, "expected '<decay> <ij> <coef*monomial> ...'");
    PerturbationTerm t;
    t.decay = to_number(field, parts[0]);
    const std::string ij = lower(parts[1]);
    if (ij.size() != 2 || axis_of(ij[0]) < 0 || axis_of(ij[1]) < 0)
        throw ConfigError(field, "component must be two letters from x, y, z");
    t.i = axis_of(ij[0]);
    t.j = axis_of(ij[1]);
    for (std::size_t k = 2; k < parts.size(); ++k) t.profile.push_back(parse_monomial(field, parts[k]));
    return t;
}

ConformalTerm parse_conformal(const std::string& field, const std::string& value) {
    const auto parts = split_list(value);
    if (parts.size() != 2) throw ConfigError(field, "expected '<decay> <coef*monomial>'");
    return {to_number(field, parts[0]), parse_monomial(field, parts[1])};
}

const QuadratureGrid& working_grid(const ExperimentConfig& c) {
    static thread_local std::unique_ptr<QuadratureGrid> grid;
    if (!grid || grid->n_theta() != c.grid.n_theta || grid->n_phi() != c.grid.n_phi)
        grid = std::make_unique<QuadratureGrid>(c.grid.n_theta, c.grid.n_phi);
    return *grid;
}

SolveOptions solve_options(const ExperimentConfig& c) {
    SolveOptions o;
    o.tolerance = c.solver.tolerance;
    o.max_iterations = c.solver.max_iterations;
    o.n_theta = c.grid.n_theta;
    o.n_phi = c.grid.n_phi;
    return o;
}

std::filesystem::path prepare_output(const ExperimentConfig& c) {
    std::filesystem::path dir(c.output_dir);
    std::filesystem::create_directories(dir);
    return dir;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error("cannot write " + p.string());
    os << text;
}

template <class Fn>
int guarded(const char* name, const ExperimentConfig& config, Fn&& body) {
    try {
        validate(config);
        return body();
    } catch (const ConfigError& e) {
        std::cerr << name << ": configuration error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << name << ": " << e.what() << '\n';
        return kExitAnomaly;
    }
}

// Graph with random harmonic content in degrees 0..L_content, rescaled to the given C1 proxy norm.
SphereGraph random_graph(std::mt19937_64& rng, int L, int L_content, double norm, const Vec3& center, double scale) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(mode_count(L));
    for (int l = 0; l <= std::min(L, L_content); ++l)
        for (int m = -l; m <= l; ++m) c[mode_index(l, m)] = gauss(rng) / (1.0 + l * l);
    c *= 0.01 / c.norm();
    const double proxy = SphereGraph(center, scale, L, c).c1_norm();
    return SphereGraph(center, scale, L, c * (norm / proxy));
}

struct Check {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct Suite {
    std::string name;
    std::vector<Check> checks;

    void add(const std::string& n, double value, double tol, bool passed, std::string detail = {}) {
        checks.push_back({n, passed, value, tol, std::move(detail)});
    }
    void at_most(const std::string& n, double value, double tol, std::string detail = {}) {
        add(n, value, tol, value <= tol, std::move(detail));
    }
    template <class Fn>
    void run(const std::string& n, Fn&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            add(n, std::numeric_limits<double>::quiet_NaN(), 0.0, false, e.what());
        }
    }
    int failures() const {
        int f = 0;
        for (const auto& c : checks) f += c.passed ? 0 : 1;
        return f;
    }
};

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

Suite verify_metric_models(const MetricModel& model, std::mt19937_64& rng) {
    Suite s{"metric_models", {}};
    std::uniform_real_distribution<double> unit(-1.0, 1.0), radius(2.0, 20.0);
    std::vector<Vec3> pts;
    for (int i = 0; i < 32; ++i) {
        Vec3 d(unit(rng), unit(rng), unit(rng));
        if (d.norm() < 1e-3) d = Vec3::UnitX();
        pts.push_back(std::max(radius(rng), 0.5 * model.mass() + 1.0) * d.normalized());
    }
    s.run("symmetry", [&] {
        double worst = 0.0;
        for (const auto& x : pts) {
            const MetricJet j = model.evaluate(x);
            worst = std::max(worst, (j.g - j.g.transpose()).cwiseAbs().maxCoeff());
            for (int k = 0; k < 3; ++k) worst = std::max(worst, (j.dg[k] - j.dg[k].transpose()).cwiseAbs().maxCoeff());
        }
        s.at_most("symmetry", worst, 1e-14);
    });
    s.run("positive_definite", [&] {
        double lowest = std::numeric_limits<double>::infinity();
        for (const auto& x : pts)
            lowest = std::min(lowest, Eigen::SelfAdjointEigenSolver<Mat3>(model.evaluate(x).g).eigenvalues()[0]);
        s.add("positive_definite", lowest, 0.0, lowest > 0.0);
    });
    s.run("conformal_consistency", [&] {
        const MetricModel sch = MetricModel::schwarzschild(model.mass());
        double worst = 0.0;
        for (const auto& x : pts) {
            const double w = sch.conformal_factor(x);
            worst = std::max(worst, (sch.evaluate(x).g - w * Mat3::Identity()).cwiseAbs().maxCoeff() / w);
        }
        s.at_most("conformal_consistency", worst, 1e-15);
    });
    s.run("mass_zero_regression", [&] {
        const MetricModel zero = MetricModel::schwarzschild(0.0);
        double worst = 0.0;
        for (const auto& x : pts) {
            const MetricJet j = zero.evaluate(x);
            worst = std::max(worst, (j.g - Mat3::Identity()).cwiseAbs().maxCoeff());
            for (int k = 0; k < 3; ++k) worst = std::max(worst, j.dg[k].cwiseAbs().maxCoeff());
        }
        s.at_most("mass_zero_regression", worst, 0.0);
    });
    s.run("first_derivative_fd", [&] {
        const double h = 1e-5;
        double worst = 0.0;
        for (const auto& x : pts) {
            const MetricJet j = model.evaluate(x);
            for (int k = 0; k < 3; ++k) {
                Vec3 e = Vec3::Zero();
                e[k] = h;
                const Mat3 fd = (model.evaluate(x + e).g - model.evaluate(x - e).g) / (2.0 * h);
                worst = std::max(worst, (fd - j.dg[k]).cwiseAbs().maxCoeff());
            }
        }
        s.at_most("first_derivative_fd", worst, 1e-7);
    });
    s.run("second_derivative_fd", [&] {
        const double h = 1e-5;
        double worst = 0.0;
        for (const auto& x : pts) {
            const MetricJet j = model.evaluate(x);
            for (int k = 0; k < 3; ++k) {
                Vec3 e = Vec3::Zero();
                e[k] = h;
                const MetricJet p = model.evaluate(x + e), m = model.evaluate(x - e);
                for (int l = 0; l < 3; ++l)
                    worst = std::max(worst, ((p.dg[l] - m.dg[l]) / (2.0 * h) - j.ddg[k][l]).cwiseAbs().maxCoeff());
            }
        }
        s.at_most("second_derivative_fd", worst, 1e-7);
    });
    if (model.kind() == MetricKind::perturbed && model.perturbation() && !model.perturbation()->terms.empty()) {
        s.run("decay_bounds", [&] {
            const double rc = model.perturbation()->cutoff_radius;
            double worst0 = -std::numeric_limits<double>::infinity(), worst1 = worst0;
            for (const auto& x : pts) {
                const Vec3 d = x.normalized();
                std::vector<double> lr, ls, ld;
                for (int i = 0; i <= 16; ++i) {
                    const double r = rc * std::pow(10.0, i / 16.0);
                    const MetricJet sj = model.perturbation_jet(r * d);
                    double dmax = 0.0;
                    for (int k = 0; k < 3; ++k) dmax = std::max(dmax, sj.dg[k].cwiseAbs().maxCoeff());
                    const double smax = sj.g.cwiseAbs().maxCoeff();
                    if (smax <= 0.0 || dmax <= 0.0) {
                        lr.clear();
                        break;
                    }
                    lr.push_back(std::log(r));
                    ls.push_back(std::log(r * r * smax));
                    ld.push_back(std::log(r * r * r * dmax));
                }
                if (lr.size() < 2) continue;
                worst0 = std::max(worst0, *std::max_element(ls.begin(), ls.end()) - ls.front());
                worst1 = std::max(worst1, *std::max_element(ld.begin(), ld.end()) - ld.front());
            }
            // r^2 |sigma| and r^3 |d sigma| may not grow beyond their value at the cutoff by more than a factor 2.
            s.at_most("decay_sigma", std::exp(std::max(worst0, 0.0)), 2.0);
            s.at_most("decay_dsigma", std::exp(std::max(worst1, 0.0)), 2.0);
        });
    }
    return s;
}

Suite verify_sphere_graph(const ExperimentConfig& c, std::mt19937_64& rng) {
    Suite s{"sphere_graph", {}};
    const QuadratureGrid& grid = working_grid(c);
    const int L = c.grid.L;
    s.run("weights", [&] {
        double sum = 0.0;
        for (double w : grid.weights()) sum += w;
        s.at_most("weights_sum_to_4pi", std::abs(sum - 4.0 * M_PI), 1e-12);
    });
    s.run("parseval", [&] {
        std::normal_distribution<double> gauss;
        Eigen::VectorXd co(mode_count(L));
        for (int i = 0; i < co.size(); ++i) co[i] = gauss(rng);
        const NodeFields nf = synthesize(co, L, grid);
        std::vector<double> f2(nf.size());
        for (int n = 0; n < nf.size(); ++n) f2[n] = nf.f[n] * nf.f[n];
        s.at_most("parseval", std::abs(integrate(f2, grid) - co.squaredNorm()) / co.squaredNorm(), 1e-12);
        const Eigen::VectorXd back = analyze(nf.f, grid, L);
        s.at_most("round_trip", (back - co).cwiseAbs().maxCoeff(), 1e-12);
    });
    s.run("gradient_eigenvalue", [&] {
        double worst = 0.0;
        std::normal_distribution<double> gauss;
        for (int l = 1; l <= std::min(L, 6); ++l) {
            Eigen::VectorXd co = Eigen::VectorXd::Zero(mode_count(L));
            for (int m = -l; m <= l; ++m) co[mode_index(l, m)] = gauss(rng);
            const NodeFields nf = synthesize(co, L, grid);
            std::vector<double> g2(nf.size()), f2(nf.size());
            for (int n = 0; n < nf.size(); ++n) {
                g2[n] = nf.grad_norm2(n);
                f2[n] = nf.f[n] * nf.f[n];
            }
            worst = std::max(worst, std::abs(integrate(g2, grid) - l * (l + 1.0) * integrate(f2, grid)));
        }
        s.at_most("gradient_eigenvalue", worst, 1e-10);
    });
    s.run("moment_normalization", [&] {
        const SphereGraph g = random_graph(rng, L, 6, 0.1, Vec3::Zero(), 1.0);
        const MomentNormalization once = moment_normalize(g);
        const MomentNormalization twice = moment_normalize(once.graph);
        const Vec3 mom = first_moments(once.graph.coeffs());
        s.at_most("moments_vanish", std::max(mom.cwiseAbs().maxCoeff(), std::abs(mean_moment(once.graph.coeffs()))),
                  1e-10);
        s.at_most("moment_idempotence", (twice.graph.coeffs() - once.graph.coeffs()).cwiseAbs().maxCoeff(), 1e-10);
    });
    return s;
}

Suite verify_surface_geometry(const ExperimentConfig& c, const MetricModel& model, std::mt19937_64& rng) {
    Suite s{"surface_geometry", {}};
    const QuadratureGrid& grid = working_grid(c);
    const int L = c.grid.L;
    const double R = std::max(10.0, 4.0 * model.mass() + 4.0);
    s.run("conformal_invariance", [&] {
        const SphereGraph g = random_graph(rng, L, 6, 0.1, Vec3(0.5, -0.3, 0.2), R);
        const GeometryCache sc = build_geometry(g, MetricModel::schwarzschild(model.mass()), grid);
        const double a = sc.bar.integrate(sc.bar.tracefree_norm2);
        const double b = sc.g.integrate(sc.g.tracefree_norm2);
        s.at_most("conformal_invariance", std::abs(a - b), 1e-9);
    });
    s.run("umbilicity", [&] {
        double worst = 0.0;
        for (const MetricModel& mm : {MetricModel::euclidean(), MetricModel::schwarzschild(model.mass())}) {
            const GeometryCache rc = build_geometry(SphereGraph::round(Vec3::Zero(), R, L), mm, grid);
            worst = std::max(worst, max_abs(rc.g.tracefree_norm2));
        }
        s.at_most("umbilic_round", worst, 1e-12);
        Eigen::VectorXd co = Eigen::VectorXd::Zero(mode_count(L));
        co[mode_index(2, 0)] = 0.05;
        const GeometryCache ec = build_geometry(SphereGraph(Vec3::Zero(), R, L, co), MetricModel::euclidean(), grid);
        const double energy = ec.g.integrate(ec.g.tracefree_norm2);
        s.add("non_round_detected", energy, 1e-12, energy > 1e-12);
    });
    s.run("normal", [&] {
        const SphereGraph g = random_graph(rng, L, 6, 0.2, Vec3(1.0, 0.0, -0.5), R);
        const GeometryCache gc = build_geometry(g, model, grid);
        double unit = 0.0, outward = std::numeric_limits<double>::infinity();
        for (int n = 0; n < gc.size(); ++n) {
            const Vec3& nu = gc.g.nu[n];
            const Mat3 gm = model.evaluate(gc.x[n]).g;
            unit = std::max(unit, std::abs(nu.dot(gm * nu) - 1.0));
            outward = std::min(outward, nu.dot(gc.x[n] - g.center()));
        }
        s.at_most("normal_unit", unit, 1e-12);
        s.add("normal_outward", outward, 0.0, outward > 0.0);
    });
    s.run("scaling", [&] {
        const SphereGraph g = random_graph(rng, L, 6, 0.2, Vec3::Zero(), 2.0);
        const double lam = 3.0;
        const GeometryCache a = build_geometry(g, MetricModel::euclidean(), grid);
        const GeometryCache b = build_geometry(g.dilated(lam), MetricModel::euclidean(), grid);
        double wH = 0.0, wA = 0.0;
        for (int n = 0; n < a.size(); ++n) {
            wH = std::max(wH, std::abs(b.g.H[n] * lam - a.g.H[n]));
            wA = std::max(wA, std::abs(b.g.dmu[n] / (lam * lam) - a.g.dmu[n]));
        }
        s.at_most("scaling", std::max(wH, wA), 1e-11);
    });
    s.run("gauss_bonnet", [&] {
        const SphereGraph g = random_graph(rng, L, 6, 0.2, Vec3(0.0, 0.7, 0.0), R);
        const GaussCurvatureCheck e = gauss_curvature_check(build_geometry(g, MetricModel::euclidean(), grid));
        const GaussCurvatureCheck m = gauss_curvature_check(build_geometry(g, model, grid));
        s.at_most("gauss_bonnet", std::max(std::abs(e.defect), std::abs(m.defect)), 1e-9);
        s.at_most("gauss_equation", m.gauss_equation_residual, 1e-8);
    });
    return s;
}

Suite verify_functionals(const ExperimentConfig& c, const MetricModel& model, std::mt19937_64& rng) {
    Suite s{"functionals", {}};
    const QuadratureGrid& grid = working_grid(c);
    const int L = c.grid.L;
    const double R = std::max(10.0, 4.0 * model.mass() + 4.0);
    s.run("hawking_consistency", [&] {
        const SphereGraph g = random_graph(rng, L, 6, 0.1, Vec3::Zero(), R);
        const FunctionalReport r = compute_report(build_geometry(g, model, grid));
        const double expect = std::sqrt(r.area / (16.0 * M_PI)) * (1.0 - r.willmore / (16.0 * M_PI));
        s.at_most("hawking_consistency", std::abs(r.hawking - expect), 1e-12);
        s.add("dlm_lambda_positive", r.dlm_lambda, 0.0, r.dlm_lambda > 0.0);
        s.add("flux_nonnegative", r.flux, 0.0, r.flux >= 0.0);
    });
    s.run("dilation_covariance", [&] {
        const SphereGraph g = random_graph(rng, L, 6, 0.1, Vec3::Zero(), 1.0);
        const double lam = 2.5;
        const GeometryCache a = build_geometry(g, MetricModel::euclidean(), grid);
        const GeometryCache b = build_geometry(g.dilated(lam), MetricModel::euclidean(), grid);
        const double area_err = std::abs(b.g.area() - lam * lam * a.g.area()) / b.g.area();
        const double def_err = std::abs(minkowski_deficit(b) - lam * minkowski_deficit(a));
        const double dlm_err = std::abs(dlm_ratio(b).ratio - dlm_ratio(a).ratio);
        s.at_most("dilation_covariance", std::max({area_err, def_err, dlm_err}), 1e-9);
    });
    s.run("sharp_minkowski", [&] {
        Eigen::VectorXd mix = Eigen::VectorXd::Zero(mode_count(L));
        mix[mode_index(2, 0)] = 1.0;
        mix[mode_index(3, 1)] = 0.6;
        mix[mode_index(4, -2)] = 0.3;
        std::vector<double> ratios;
        for (double e : {1e-2, 3e-3, 1e-3}) {
            const SphereGraph g = moment_normalize(SphereGraph(Vec3::Zero(), 1.0, L, e * mix)).graph;
            ratios.push_back(sharp_minkowski_ratio(build_geometry(g, MetricModel::euclidean(), grid)));
        }
        s.at_most("sharp_minkowski_ratio", ratios[0], 0.05);
        s.add("sharp_minkowski_monotone", ratios[2] - ratios[0], 0.0, ratios[1] <= ratios[0] && ratios[2] <= ratios[1]);
    });
    s.run("eigenvalue_gap", [&] {
        double lowest = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 8; ++i) {
            const SphereGraph g = moment_normalize(random_graph(rng, L, 6, 0.1, Vec3::Zero(), 1.0)).graph;
            lowest = std::min(lowest, quadratic_form_gap(g.coeffs(), L));
        }
        s.add("eigenvalue_gap", lowest, -1e-10, lowest >= -1e-10);
    });
    s.run("dlm_corpus", [&] {
        std::uniform_real_distribution<double> norm(0.005, c.verify.max_norm);
        double worst = 0.0;
        for (int i = 0; i < c.verify.corpus_size; ++i) {
            const SphereGraph g = random_graph(rng, L, 8, norm(rng), Vec3::Zero(), 1.0);
            worst = std::max(worst, dlm_ratio(build_geometry(g, MetricModel::euclidean(), grid)).ratio);
        }
        s.at_most("dlm_corpus_max_ratio", worst, 2.0 + 1e-6);
    });
    s.run("bochner", [&] {
        const SphereGraph g = random_graph(rng, std::min(L, 8), 8, 0.1, Vec3::Zero(), 1.0);
        s.at_most("bochner", bochner_tracefree_check(g).residual, 1e-9);
    });
    return s;
}

Suite verify_solver(const ExperimentConfig& c, const MetricModel& model, std::mt19937_64& rng) {
    Suite s{"cmc_solver", {}};
    const int L = c.grid.L;
    const SolveOptions opts = solve_options(c);
    s.run("euclidean_uniqueness", [&] {
        Eigen::VectorXd co = random_graph(rng, L, 4, 0.08, Vec3::Zero(), 4.0).coeffs();
        co.head(4).setZero();
        const SolveReport r = solve_cmc(SphereGraph(Vec3::Zero(), 4.0, L, co), MetricModel::euclidean(), 0.5, opts);
        const auto& nodes = working_grid(c).nodes();
        const int n = static_cast<int>(nodes.size());
        Eigen::MatrixXd A(n, 4);
        Eigen::VectorXd b(n);
        std::vector<Vec3> pts(n);
        for (int i = 0; i < n; ++i) {
            pts[i] = r.surface.point(nodes[i]);
            A.row(i) << 2.0 * pts[i].x(), 2.0 * pts[i].y(), 2.0 * pts[i].z(), 1.0;
            b[i] = pts[i].squaredNorm();
        }
        const Eigen::Vector4d sol = A.colPivHouseholderQr().solve(b);
        const Vec3 center = sol.head<3>();
        double err = 0.0;
        for (const auto& p : pts) err = std::max(err, std::abs((p - center).norm() - 4.0));
        s.add("euclidean_converged", r.final_residual, opts.tolerance, r.converged);
        s.at_most("euclidean_round", err, 1e-9);
    });
    if (model.mass() > 0.0) {
        s.run("leaves", [&] {
            FoliateConfig f = c.foliate;
            const FoliationTrace t = trace_foliation(model, f.H_start, f.H_start * 0.5, 3, L, opts);
            s.add("trace_complete", double(t.leaves.size()), 3.0, !t.truncated, t.diagnostic);
            double cert = 0.0, lh = 0.0, cy = std::numeric_limits<double>::infinity();
            bool nonnegative_R = true;
            for (const auto& leaf : t.leaves) {
                cert = std::max(cert, leaf.certified_residual);
                const GeometryCache gc = build_geometry(leaf.surface, model, working_grid(c));
                const FunctionalReport rep = compute_report(gc);
                lh = std::max(lh, std::abs(rep.dlm_lambda * leaf.H_target - 2.0) * rep.r0 / 10.0);
                for (double Rn : gc.scalar) nonnegative_R = nonnegative_R && Rn >= -1e-12;
                if (leaf.stable) cy = std::min(cy, rep.cy_margin());
            }
            s.at_most("residual_certificate", cert, opts.tolerance);
            s.at_most("lambda_H_normalization", lh, 1.0);
            if (nonnegative_R && std::isfinite(cy)) s.add("cy_on_stable_leaves", cy, -1e-8, cy >= -1e-8);
            if (!t.leaves.empty()) {
                const SphereGraph& leaf = t.leaves.front().surface;
                const int lo = std::max(4, L / 2);
                const auto a = jacobi_spectrum(leaf.with_degree(lo), model, 4, refined_grid(lo));
                const auto b = jacobi_spectrum(leaf, model, 4, working_grid(c));
                double d = 0.0;
                for (int i = 0; i < 4; ++i) d = std::max(d, std::abs(a[i] - b[i]));
                s.at_most("spectrum_consistency", d, 1e-6);
            }
        });
    }
    return s;
}

Json suite_json(const Suite& s) {
    Json checks = Json::array();
    for (const auto& ch : s.checks) {
        Json j;
        j["name"] = ch.name;
        j["passed"] = ch.passed;
        j["value"] = ch.value;
        j["tolerance"] = ch.tolerance;
        if (!ch.detail.empty()) j["detail"] = ch.detail;
        checks.push_back(std::move(j));
    }
    Json j;
    j["suite"] = s.name;
    j["checks"] = std::move(checks);
    j["failures"] = s.failures();
    return j;
}

}  // namespace

void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value) {
    const std::string key = lower(trim(raw_key));
    const std::string value = trim(raw_value);
    if (key == "metric.kind") {
        c.metric.kind = lower(value);
    } else if (key == "metric.mass") {
        c.metric.mass = to_number(key, value);
    } else if (key == "metric.cutoff") {
        c.metric.cutoff = to_number(key, value);
    } else if (key.rfind("metric.term.", 0) == 0) {
        c.metric.terms[term_index(key, key.substr(12))] = parse_term(key, value);
    } else if (key.rfind("metric.conformal.", 0) == 0) {
        c.metric.conformal_terms[term_index(key, key.substr(17))] = parse_conformal(key, value);
    } else if (key == "grid.l") {
        c.grid.L = to_int(key, value);
    } else if (key == "grid.n_theta") {
        c.grid.n_theta = to_int(key, value);
    } else if (key == "grid.n_phi") {
        c.grid.n_phi = to_int(key, value);
    } else if (key == "solver.tolerance") {
        c.solver.tolerance = to_number(key, value);
    } else if (key == "solver.max_iterations") {
        c.solver.max_iterations = to_int(key, value);
    } else if (key == "verify.corpus_size") {
        c.verify.corpus_size = to_int(key, value);
    } else if (key == "verify.max_norm") {
        c.verify.max_norm = to_number(key, value);
    } else if (key == "foliate.h_start") {
        c.foliate.H_start = to_number(key, value);
    } else if (key == "foliate.h_end") {
        c.foliate.H_end = to_number(key, value);
    } else if (key == "foliate.leaves") {
        c.foliate.leaves = to_int(key, value);
    } else if (key == "scan.lambdas") {
        c.scan.lambdas = to_numbers(key, value);
    } else if (key == "scan.xi_norms") {
        c.scan.xi_norms = to_numbers(key, value);
    } else if (key == "scan.xi_direction") {
        const auto v = to_numbers(key, value);
        if (v.size() != 3) throw ConfigError(key, "expected three components");
        c.scan.xi_direction = Vec3(v[0], v[1], v[2]);
    } else if (key == "scan.solve") {
        c.scan.solve = to_bool(key, value);
    } else if (key == "scan.tau") {
        c.scan.tau = to_number(key, value);
    } else if (key == "scan.delta") {
        c.scan.delta = to_number(key, value);
    } else if (key == "expand.modes") {
        c.expand.modes.clear();
        for (const auto& item : split_list(value)) {
            const auto colon = item.find(':');
            if (colon == std::string::npos) throw ConfigError(key, "modes are written l:m");
            c.expand.modes.emplace_back(to_int(key, item.substr(0, colon)), to_int(key, item.substr(colon + 1)));
        }
    } else if (key == "expand.epsilons") {
        c.expand.epsilons = to_numbers(key, value);
    } else if (key == "run.workers") {
        c.workers = to_int(key, value);
    } else if (key == "run.seed") {
        const double v = to_number(key, value);
        if (v < 0 || std::floor(v) != v) throw ConfigError(key, "seed must be a nonnegative integer");
        c.seed = static_cast<std::uint64_t>(v);
    } else if (key == "output.dir") {
        c.output_dir = value;
    } else {
        throw ConfigError(key, "unknown configuration key");
    }
}

void parse_config_text(ExperimentConfig& c, const std::string& text) {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
        apply_setting(c, line.substr(0, eq), line.substr(eq + 1));
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("--config", "cannot read '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    ExperimentConfig c;
    parse_config_text(c, ss.str());
    return c;
}

void apply_environment(ExperimentConfig& c, const std::map<std::string, std::string>& env) {
    const std::string prefix = "CMCPROBE_";
    for (const auto& [name, value] : env) {
        if (name.rfind(prefix, 0) != 0) continue;
        std::string rest = name.substr(prefix.size());
        std::string key;
        for (std::size_t i = 0; i < rest.size(); ++i) {
            if (rest.compare(i, 2, "__") == 0) {
                key += '.';
                ++i;
            } else {
                key += rest[i];
            }
        }
        apply_setting(c, key, value);
    }
}

std::map<std::string, std::string> process_environment() {
    std::map<std::string, std::string> env;
    for (char** e = environ; e && *e; ++e) {
        const std::string kv(*e);
        const auto eq = kv.find('=');
        if (eq != std::string::npos) env[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return env;
}

void validate(const ExperimentConfig& c) {
    try {
        (void)metric_kind_from_string(c.metric.kind);
    } catch (const Error& e) {
        throw ConfigError("metric.kind", e.what());
    }
    if (!(c.metric.mass >= 0.0) || !std::isfinite(c.metric.mass))
        throw ConfigError("metric.mass", "mass must be a nonnegative finite number");
    if (!(c.metric.cutoff > 1.0)) throw ConfigError("metric.cutoff", "cutoff radius must exceed 1");
    if (c.grid.L < 1) throw ConfigError("grid.l", "degree must be at least 1");
    if (c.grid.n_theta < 1) throw ConfigError("grid.n_theta", "must be positive");
    if (c.grid.n_phi < 1) throw ConfigError("grid.n_phi", "must be positive");
    try {
        QuadratureGrid(c.grid.n_theta, c.grid.n_phi).require_capacity(c.grid.L);
    } catch (const CapacityError& e) {
        const std::string field = c.grid.n_theta < c.grid.L + 1 ? "grid.n_theta" : "grid.n_phi";
        throw ConfigError(field, std::string("capacity error: ") + e.what());
    }
    if (!(c.solver.tolerance > 0.0)) throw ConfigError("solver.tolerance", "must be positive");
    if (c.solver.max_iterations < 1) throw ConfigError("solver.max_iterations", "must be at least 1");
    if (c.verify.corpus_size < 1) throw ConfigError("verify.corpus_size", "must be at least 1");
    if (!(c.verify.max_norm > 0.0 && c.verify.max_norm < kEmbeddingBound))
        throw ConfigError("verify.max_norm", "must lie in (0, 0.5)");
    if (!(c.foliate.H_end > 0.0 && c.foliate.H_end < c.foliate.H_start))
        throw ConfigError("foliate.h_end", "requires 0 < h_end < h_start");
    if (c.foliate.leaves < 1) throw ConfigError("foliate.leaves", "must be at least 1");
    if (c.scan.lambdas.empty()) throw ConfigError("scan.lambdas", "list is empty");
    for (double v : c.scan.lambdas)
        if (!(v > 0.0)) throw ConfigError("scan.lambdas", "entries must be positive");
    if (c.scan.xi_norms.empty()) throw ConfigError("scan.xi_norms", "list is empty");
    for (double v : c.scan.xi_norms)
        if (!(v > 0.0)) throw ConfigError("scan.xi_norms", "entries must be positive");
    if (!(c.scan.xi_direction.norm() > 0.0)) throw ConfigError("scan.xi_direction", "must be nonzero");
    if (!(c.scan.tau > 2.0 && c.scan.tau < 8.0 / 3.0)) throw ConfigError("scan.tau", "must lie in (2, 8/3)");
    if (!(c.scan.delta > 0.0 && c.scan.delta < 1.0)) throw ConfigError("scan.delta", "must lie in (0, 1)");
    if (c.expand.epsilons.size() < 4) throw ConfigError("expand.epsilons", "the Taylor fit needs at least 4 points");
    for (double v : c.expand.epsilons)
        if (!(v > 0.0 && v < 0.2)) throw ConfigError("expand.epsilons", "entries must lie in (0, 0.2)");
    if (c.expand.modes.empty()) throw ConfigError("expand.modes", "list is empty");
    for (const auto& [l, m] : c.expand.modes)
        if (l < 0 || std::abs(m) > l || l > 31) throw ConfigError("expand.modes", "invalid mode");
    if (c.workers < 1) throw ConfigError("run.workers", "must be at least 1");
    try {
        (void)build_model(c);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError("metric", e.what());
    }
}

MetricModel build_model(const ExperimentConfig& c) {
    const MetricKind kind = metric_kind_from_string(c.metric.kind);
    if (kind == MetricKind::euclidean) return MetricModel::euclidean();
    if (kind == MetricKind::schwarzschild) return MetricModel::schwarzschild(c.metric.mass);
    PerturbationSpec spec;
    spec.cutoff_radius = c.metric.cutoff;
    if (!c.metric.conformal_terms.empty()) {
        std::vector<ConformalTerm> cts;
        for (const auto& [i, t] : c.metric.conformal_terms) cts.push_back(t);
        spec = *conformal_perturbed(c.metric.mass, cts, c.metric.cutoff).perturbation();
    }
    for (const auto& [i, t] : c.metric.terms) spec.terms.push_back(t);
    return MetricModel::perturbed(c.metric.mass, std::move(spec));
}

int cmd_verify(const ExperimentConfig& config) {
    return guarded("verify", config, [&] {
        const MetricModel model = build_model(config);
        std::mt19937_64 rng(config.seed);
        std::vector<Suite> suites;
        suites.push_back(verify_metric_models(model, rng));
        suites.push_back(verify_sphere_graph(config, rng));
        suites.push_back(verify_surface_geometry(config, model, rng));
        suites.push_back(verify_functionals(config, model, rng));
        suites.push_back(verify_solver(config, model, rng));
        Json arr = Json::array();
        int failures = 0;
        for (const auto& s : suites) {
            arr.push_back(suite_json(s));
            failures += s.failures();
            std::cout << s.name << ": " << s.checks.size() - s.failures() << "/" << s.checks.size() << " checks passed\n";
            for (const auto& ch : s.checks)
                if (!ch.passed)
                    std::cout << "  FAIL " << ch.name << " value=" << format_double(ch.value)
                              << " tolerance=" << format_double(ch.tolerance)
                              << (ch.detail.empty() ? "" : " (" + ch.detail + ")") << '\n';
        }
        Json summary;
        summary["metric"] = {{"kind", to_string(model.kind())}, {"mass", model.mass()}};
        summary["seed"] = config.seed;
        summary["suites"] = std::move(arr);
        summary["failures"] = failures;
        const auto dir = prepare_output(config);
        write_file(dir / "verify_summary.json", summary.dump(2) + "\n");
        return failures == 0 ? kExitOk : kExitAnomaly;
    });
}

int cmd_foliate(const ExperimentConfig& config) {
    return guarded("foliate", config, [&] {
        const MetricModel model = build_model(config);
        if (model.kind() == MetricKind::euclidean || !(model.mass() > 0.0))
            throw ConfigError("metric.kind", "foliation requires a schwarzschild or perturbed metric with positive mass");
        const auto& f = config.foliate;
        FoliationTrace trace = trace_foliation(model, f.H_start, f.H_end, f.leaves, config.grid.L, solve_options(config));

        const std::vector<std::string> nominal = {
            "leaf", "H", "r", "area", "area_H2", "area_H2_defect", "hawking", "cy_lhs", "cy_rhs", "cy_margin",
            "dlm_lambda", "dlm_ratio", "lambda_H", "r0", "stability", "stable", "iterations", "residual"};
        const int n = static_cast<int>(trace.leaves.size());
        const auto reports = run_indexed<FunctionalReport>(n, config.workers, [&](int i) {
            return compute_report(build_geometry(trace.leaves[i].surface, model, working_grid(config)));
        });
        CsvTable csv{nominal, {}};
        Json reports_json = Json::array();
        std::vector<double> defects;
        for (int i = 0; i < n; ++i) {
            const auto& leaf = trace.leaves[i];
            const auto& r = reports[i];
            const double ah2 = r.area * leaf.H_target * leaf.H_target;
            defects.push_back(std::abs(ah2 - 16.0 * M_PI));
            csv.add_row({csv_cell(i), csv_cell(leaf.H_target), csv_cell(std::sqrt(r.area / (4.0 * M_PI))),
                         csv_cell(r.area), csv_cell(ah2), csv_cell(defects.back()), csv_cell(r.hawking),
                         csv_cell(r.cy_lhs), csv_cell(r.cy_rhs), csv_cell(r.cy_margin()), csv_cell(r.dlm_lambda),
                         csv_cell(r.dlm_ratio), csv_cell(r.dlm_lambda * leaf.H_target), csv_cell(r.r0),
                         csv_cell(leaf.stability_eigenvalue), csv_cell(leaf.stable), csv_cell(leaf.iterations),
                         csv_cell(leaf.final_residual)});
            reports_json.push_back(to_json(r));
        }
        const auto dir = prepare_output(config);
        write_file(dir / "foliate.csv", csv.str());
        write_file(dir / "foliate_trace.json", to_json(trace).dump(2) + "\n");
        write_file(dir / "foliate_reports.json", reports_json.dump(2) + "\n");
        std::cout << "foliate: " << n << " leaves written to " << (dir / "foliate.csv").string() << '\n';
        int status = kExitOk;
        if (trace.truncated) {
            std::cerr << "foliate: trace truncated: " << trace.diagnostic << '\n';
            status = kExitAnomaly;
        }
        if (model.kind() == MetricKind::perturbed) {
            for (int i = 1; i < n; ++i)
                if (!(defects[i] < defects[i - 1])) {
                    std::cerr << "foliate: |area H^2 - 16 pi| does not decrease between leaves " << i - 1 << " and "
                              << i << '\n';
                    status = kExitAnomaly;
                    break;
                }
        }
        return status;
    });
}

int cmd_scan(const ExperimentConfig& config) {
    return guarded("scan", config, [&] {
        const MetricModel model = build_model(config);
        const auto& sc = config.scan;
        struct Point {
            double lambda, xi;
        };
        std::vector<Point> points;
        for (double xi : sc.xi_norms)
            for (double lam : sc.lambdas) points.push_back({lam, xi});
        const Vec3 dir = sc.xi_direction.normalized();
        const SolveOptions opts = solve_options(config);

        const std::vector<std::string> header = {
            "index", "lambda", "xi_norm", "r0", "H_mean", "r0H", "flux", "lambda2_flux", "divergence_residual",
            "gamma", "gamma_measured", "coefficient", "tracefree_bar", "tracefree_term", "favorable_term", "lhs",
            "err_x5", "err_h2_x3", "err_Hh0_x2", "err_H_x3", "err_H2_x2", "error_sum", "hawking", "solve_converged",
            "solve_iterations", "solve_residual", "center_drift", "flag"};
        const auto rows = run_indexed<std::vector<std::string>>(
            static_cast<int>(points.size()), config.workers, [&](int i) {
                const Point& p = points[i];
                const std::string nan = "nan";
                std::vector<std::string> row(header.size(), nan);
                row[0] = csv_cell(i);
                row[1] = csv_cell(p.lambda);
                row[2] = csv_cell(p.xi);
                row[23] = "false";
                row[24] = "0";
                row[27] = "ok";
                const SphereGraph sphere = SphereGraph::round(p.lambda * p.xi * dir, p.lambda, config.grid.L);
                if (sphere.encloses(Vec3::Zero())) {
                    row[3] = csv_cell(sphere.inner_radius());
                    row[27] = "encloses_origin";
                    return row;
                }
                try {
                    const GeometryCache gc = build_geometry(sphere, model, working_grid(config));
                    const InequalityLedger led = big_inequality_audit(gc, model, sc.tau, sc.delta);
                    const std::vector<double> vals = {led.r0, led.H_mean, led.r0H, led.flux,
                                                      p.lambda * p.lambda * led.flux, led.divergence_residual,
                                                      led.gamma};
                    for (std::size_t k = 0; k < vals.size(); ++k) row[3 + k] = csv_cell(vals[k]);
                    row[10] = csv_cell(led.gamma_measured);
                    const std::vector<double> rest = {led.coefficient, led.tracefree_bar, led.tracefree_term,
                                                      led.favorable_term, led.lhs, led.err_x5, led.err_h2_x3,
                                                      led.err_Hh0_x2, led.err_H_x3, led.err_H2_x2, led.error_sum,
                                                      hawking_mass(gc)};
                    for (std::size_t k = 0; k < rest.size(); ++k) row[11 + k] = csv_cell(rest[k]);
                    if (sc.solve) {
                        SolveOptions o = opts;
                        o.compute_stability = false;
                        const SolveReport r = solve_cmc(sphere, model, led.H_mean, o);
                        row[23] = csv_cell(r.converged);
                        row[24] = csv_cell(r.iterations);
                        row[25] = csv_cell(r.final_residual);
                        const Vec3 c0 = sphere.center();
                        Vec3 c1 = r.surface.center();
                        try {
                            c1 = moment_normalize(r.surface).graph.center();
                        } catch (const Error&) {
                        }
                        row[26] = csv_cell((c1 - c0).norm());
                    }
                } catch (const DomainError&) {
                    row[3] = csv_cell(sphere.inner_radius());
                    row[27] = "domain_error";
                } catch (const PreconditionError&) {
                    row[27] = "encloses_origin";
                }
                return row;
            });
        CsvTable csv{header, {}};
        for (const auto& r : rows) csv.add_row(r);
        const auto out = prepare_output(config);
        write_file(out / "scan.csv", csv.str());
        int flagged = 0;
        for (const auto& r : rows) flagged += r.back() == "ok" ? 0 : 1;
        std::cout << "scan: " << rows.size() << " rows (" << flagged << " flagged) written to "
                  << (out / "scan.csv").string() << '\n';
        return kExitOk;
    });
}

int cmd_expand(const ExperimentConfig& config) {
    return guarded("expand", config, [&] {
        const auto& ex = config.expand;
        struct Row {
            bool skipped = false;
            std::string reason;
            TaylorFit fit;
            std::vector<double> sharp;
        };
        const auto rows = run_indexed<Row>(static_cast<int>(ex.modes.size()), config.workers, [&](int i) {
            Row row;
            const auto [l, m] = ex.modes[i];
            try {
                row.fit = taylor_prefactor_fit(l, m, ex.epsilons);
            } catch (const FitError& e) {
                row.skipped = true;
                row.reason = e.what();
                return row;
            }
            for (double e : ex.epsilons) {
                const int L = std::max(l, 1);
                Eigen::VectorXd c = Eigen::VectorXd::Zero(mode_count(L));
                c[mode_index(l, m)] = e;
                try {
                    const SphereGraph g = moment_normalize(SphereGraph(Vec3::Zero(), 1.0, L, c)).graph;
                    row.sharp.push_back(sharp_minkowski_ratio(build_geometry(g, MetricModel::euclidean())));
                } catch (const NormalizationError&) {
                    row.sharp.push_back(std::numeric_limits<double>::quiet_NaN());
                }
            }
            return row;
        });
        CsvTable modes{{"l", "m", "Q", "alpha", "remainder_order", "sharp_ratio_max", "status"}, {}};
        CsvTable pts{{"l", "m", "epsilon", "deficit", "alpha_Q_eps2", "sharp_ratio"}, {}};
        double amin = std::numeric_limits<double>::infinity(), amax = -amin;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto [l, m] = ex.modes[i];
            const Row& r = rows[i];
            if (r.skipped) {
                modes.add_row({csv_cell(l), csv_cell(m), csv_cell(minkowski_quadratic_form(
                                   [&] {
                                       Eigen::VectorXd c = Eigen::VectorXd::Zero(mode_count(std::max(l, 1)));
                                       c[mode_index(l, m)] = 1.0;
                                       return c;
                                   }(),
                                   std::max(l, 1))),
                               "nan", "nan", "nan", "skipped"});
                continue;
            }
            amin = std::min(amin, r.fit.alpha);
            amax = std::max(amax, r.fit.alpha);
            double smax = 0.0;
            for (std::size_t k = 0; k < r.fit.epsilons.size(); ++k) {
                const double e = r.fit.epsilons[k];
                if (std::isfinite(r.sharp[k])) smax = std::max(smax, r.sharp[k]);
                pts.add_row({csv_cell(l), csv_cell(m), csv_cell(e), csv_cell(r.fit.deficits[k]),
                             csv_cell(r.fit.alpha * r.fit.Q * e * e), csv_cell(r.sharp[k])});
            }
            modes.add_row({csv_cell(l), csv_cell(m), csv_cell(r.fit.Q), csv_cell(r.fit.alpha),
                           csv_cell(r.fit.remainder_order), csv_cell(smax), "ok"});
        }
        const auto out = prepare_output(config);
        write_file(out / "expand.csv", modes.str());
        write_file(out / "expand_points.csv", pts.str());
        std::cout << "expand: " << rows.size() << " modes written to " << (out / "expand.csv").string() << '\n';
        if (amax > amin && (amax - amin) > 0.02 * std::abs(amin)) {
            std::cerr << "expand: fitted alpha varies across modes by more than 2%\n";
            return kExitAnomaly;
        }
        return kExitOk;
    });
}

}  // namespace cmcprobe
