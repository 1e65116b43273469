#include "cmcprobe/spherical_harmonics.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

#include "cmcprobe/errors.hpp"

namespace cmcprobe {

namespace {

// Gauss-Legendre nodes (descending in x = cos t, so ascending in t) and weights.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) {
                p1 = z;
                p0 = 1.0;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // Recompute the derivative at the converged node for the weight.
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        if (n == 1) p0 = 1.0;
        dp = n * (z * p1 - p0) / (z * z - 1.0);
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
}

inline int tri(int l, int m) { return l * (l + 1) / 2 + m; }

// Legendre and trigonometric tables for one (grid, L) pair.
struct Basis {
    int L = 0;
    int n_theta = 0;
    int n_phi = 0;
    int n_tri = 0;
    std::array<std::vector<double>, 3> lam;  // [order][ring * n_tri + tri(l, m)]
    Eigen::MatrixXd trig;                     // row a + L, column k: T_a(p_k)

    double lambda(int order, int ring, int l, int m) const { return lam[order][ring * n_tri + tri(l, m)]; }
};

void legendre_column(int L, double t, double* v0, double* v1, double* v2) {
    const double x = std::cos(t);
    const double s = std::sin(t);
    std::vector<double> lam(tri(L, L) + 1, 0.0);
    double pmm = 1.0 / std::sqrt(4.0 * M_PI);
    for (int m = 0; m <= L; ++m) {
        if (m > 0) pmm *= std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
        lam[tri(m, m)] = pmm;
        if (m + 1 <= L) lam[tri(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * x * pmm;
        for (int l = m + 2; l <= L; ++l) {
            const double a = std::sqrt((4.0 * l * l - 1.0) / (double(l) * l - double(m) * m));
            const double b = std::sqrt((double(l - 1) * (l - 1) - double(m) * m) / (4.0 * (l - 1) * (l - 1) - 1.0));
            lam[tri(l, m)] = a * (x * lam[tri(l - 1, m)] - b * lam[tri(l - 2, m)]);
        }
    }
    for (int l = 0; l <= L; ++l)
        for (int m = 0; m <= l; ++m) {
            const double p = lam[tri(l, m)];
            const double prev = l > m ? lam[tri(l - 1, m)] : 0.0;
            const double c = l > m ? std::sqrt((2.0 * l + 1.0) * (double(l) * l - double(m) * m) / (2.0 * l - 1.0)) : 0.0;
            const double dp = (l * x * p - c * prev) / s;
            const double ddp = -(x / s) * dp - (l * (l + 1.0) - double(m) * m / (s * s)) * p;
            v0[tri(l, m)] = p;
            v1[tri(l, m)] = dp;
            v2[tri(l, m)] = ddp;
        }
}

std::shared_ptr<const Basis> make_basis(const QuadratureGrid& grid, int L) {
    auto b = std::make_shared<Basis>();
    b->L = L;
    b->n_theta = grid.n_theta();
    b->n_phi = grid.n_phi();
    b->n_tri = tri(L, L) + 1;
    for (auto& v : b->lam) v.assign(static_cast<size_t>(b->n_theta) * b->n_tri, 0.0);
    for (int r = 0; r < b->n_theta; ++r) {
        const size_t off = static_cast<size_t>(r) * b->n_tri;
        legendre_column(L, grid.colatitudes()[r], &b->lam[0][off], &b->lam[1][off], &b->lam[2][off]);
    }
    b->trig.resize(2 * L + 1, b->n_phi);
    for (int a = -L; a <= L; ++a)
        for (int k = 0; k < b->n_phi; ++k) {
            const double p = grid.longitudes()[k];
            double v = 1.0;
            if (a > 0) v = std::sqrt(2.0) * std::cos(a * p);
            if (a < 0) v = std::sqrt(2.0) * std::sin(-a * p);
            b->trig(a + L, k) = v;
        }
    return b;
}

std::shared_ptr<const Basis> basis_for(const QuadratureGrid& grid, int L) {
    static std::mutex mutex;
    static std::map<std::tuple<int, int, int>, std::shared_ptr<const Basis>> cache;
    const auto key = std::make_tuple(grid.n_theta(), grid.n_phi(), L);
    {
        std::lock_guard<std::mutex> lock(mutex);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    auto b = make_basis(grid, L);
    std::lock_guard<std::mutex> lock(mutex);
    return cache.emplace(key, std::move(b)).first->second;
}

// d^j/dp^j T_m = s_j(m) T_{sigma_j(m)}
inline double trig_scale(int j, int m) {
    if (j == 0) return 1.0;
    if (j == 1) return -double(m);
    return -double(m) * m;
}
inline int trig_target(int j, int m) { return j == 1 ? -m : m; }

inline int t_order(Deriv d) {
    switch (d) {
        case Deriv::value: case Deriv::dp: case Deriv::dpp: return 0;
        case Deriv::dt: case Deriv::dtp: return 1;
        case Deriv::dtt: return 2;
    }
    return 0;
}
inline int p_order(Deriv d) {
    switch (d) {
        case Deriv::value: case Deriv::dt: case Deriv::dtt: return 0;
        case Deriv::dp: case Deriv::dtp: return 1;
        case Deriv::dpp: return 2;
    }
    return 0;
}

}  // namespace

QuadratureGrid::QuadratureGrid(int n_theta, int n_phi) : n_theta_(n_theta), n_phi_(n_phi) {
    if (n_theta < 1 || n_phi < 1) throw CapacityError("quadrature grid needs at least one node per direction");
    std::vector<double> x;
    gauss_legendre(n_theta, x, ring_weight_);
    theta_.resize(n_theta);
    for (int i = 0; i < n_theta; ++i) theta_[i] = std::acos(x[i]);
    phi_.resize(n_phi);
    for (int k = 0; k < n_phi; ++k) phi_[k] = 2.0 * M_PI * k / n_phi;
    nodes_.reserve(size());
    weights_.reserve(size());
    e_theta_.reserve(size());
    e_phi_.reserve(size());
    for (int i = 0; i < n_theta; ++i) {
        const double ct = x[i];
        const double st = std::sin(theta_[i]);
        for (int k = 0; k < n_phi; ++k) {
            const double cp = std::cos(phi_[k]);
            const double sp = std::sin(phi_[k]);
            nodes_.emplace_back(st * cp, st * sp, ct);
            e_theta_.emplace_back(ct * cp, ct * sp, -st);
            e_phi_.emplace_back(-sp, cp, 0.0);
            weights_.push_back(ring_weight_[i] * longitude_weight());
        }
    }
}

int QuadratureGrid::capacity() const { return std::min(n_theta_ - 1, (n_phi_ - 1) / 2); }

void QuadratureGrid::require_capacity(int L) const {
    if (L < 0) throw CapacityError("harmonic degree must be nonnegative");
    if (L > capacity()) {
        std::ostringstream os;
        os << "grid " << n_theta_ << " x " << n_phi_ << " resolves degree <= " << capacity()
           << " but degree " << L << " was requested (need n_theta >= L+1 and n_phi >= 2L+1)";
        throw CapacityError(os.str());
    }
}

NodeFields synthesize(const Eigen::VectorXd& coeffs, int L, const QuadratureGrid& grid) {
    grid.require_capacity(L);
    if (coeffs.size() != mode_count(L)) throw PreconditionError("coefficient vector does not match degree");
    const auto basis = basis_for(grid, L);
    const int nt = grid.n_theta();
    const int np = grid.n_phi();
    NodeFields out;
    for (auto* v : {&out.f, &out.f_t, &out.f_p, &out.f_tt, &out.f_tp, &out.f_pp, &out.grad1, &out.grad2,
                    &out.hess11, &out.hess12, &out.hess22})
        v->assign(grid.size(), 0.0);

    std::array<std::vector<double>, 3> F;
    for (auto& v : F) v.assign(2 * L + 1, 0.0);
    for (int r = 0; r < nt; ++r) {
        for (int m = -L; m <= L; ++m) {
            const int am = std::abs(m);
            double s0 = 0.0, s1 = 0.0, s2 = 0.0;
            for (int l = am; l <= L; ++l) {
                const double c = coeffs[mode_index(l, m)];
                if (c == 0.0) continue;
                s0 += c * basis->lambda(0, r, l, am);
                s1 += c * basis->lambda(1, r, l, am);
                s2 += c * basis->lambda(2, r, l, am);
            }
            F[0][m + L] = s0;
            F[1][m + L] = s1;
            F[2][m + L] = s2;
        }
        const double t = grid.colatitudes()[r];
        const double st = std::sin(t);
        const double cot = std::cos(t) / st;
        for (int k = 0; k < np; ++k) {
            double v = 0, vt = 0, vp = 0, vtt = 0, vtp = 0, vpp = 0;
            for (int m = -L; m <= L; ++m) {
                const double T0 = basis->trig(m + L, k);
                const double T1 = trig_scale(1, m) * basis->trig(trig_target(1, m) + L, k);
                const double T2 = trig_scale(2, m) * T0;
                v += F[0][m + L] * T0;
                vt += F[1][m + L] * T0;
                vtt += F[2][m + L] * T0;
                vp += F[0][m + L] * T1;
                vtp += F[1][m + L] * T1;
                vpp += F[0][m + L] * T2;
            }
            const int n = r * np + k;
            out.f[n] = v;
            out.f_t[n] = vt;
            out.f_p[n] = vp;
            out.f_tt[n] = vtt;
            out.f_tp[n] = vtp;
            out.f_pp[n] = vpp;
            out.grad1[n] = vt;
            out.grad2[n] = vp / st;
            out.hess11[n] = vtt;
            out.hess12[n] = (vtp - cot * vp) / st;
            out.hess22[n] = vpp / (st * st) + cot * vt;
        }
    }
    return out;
}

Eigen::VectorXd analyze(std::span<const double> values, const QuadratureGrid& grid, int L) {
    grid.require_capacity(L);
    if (static_cast<int>(values.size()) != grid.size()) throw PreconditionError("node values do not match grid");
    const auto basis = basis_for(grid, L);
    const int np = grid.n_phi();
    Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(mode_count(L));
    Eigen::VectorXd ring(np);
    for (int r = 0; r < grid.n_theta(); ++r) {
        for (int k = 0; k < np; ++k) ring[k] = values[r * np + k];
        const Eigen::VectorXd fourier = basis->trig * ring * grid.longitude_weight();
        const double wt = grid.ring_weights()[r];
        for (int m = -L; m <= L; ++m) {
            const double a = wt * fourier[m + L];
            const int am = std::abs(m);
            for (int l = am; l <= L; ++l) coeffs[mode_index(l, m)] += a * basis->lambda(0, r, l, am);
        }
    }
    return coeffs;
}

double integrate(std::span<const double> values, const QuadratureGrid& grid) {
    double s = 0.0;
    const auto& w = grid.weights();
    for (size_t n = 0; n < values.size(); ++n) s += w[n] * values[n];
    return s;
}

PointValue evaluate_harmonics(const Eigen::VectorXd& coeffs, int L, const Vec3& direction) {
    const Vec3 u = direction.normalized();
    // Guard the coordinate singularity at the poles by nudging the colatitude.
    double t = std::acos(std::clamp(u.z(), -1.0, 1.0));
    t = std::clamp(t, 1e-9, M_PI - 1e-9);
    const double p = std::atan2(u.y(), u.x());
    const int n_tri = tri(L, L) + 1;
    std::vector<double> v0(n_tri), v1(n_tri), v2(n_tri);
    legendre_column(L, t, v0.data(), v1.data(), v2.data());
    double f = 0.0, ft = 0.0, fp = 0.0;
    for (int l = 0; l <= L; ++l)
        for (int m = -l; m <= l; ++m) {
            const double c = coeffs[mode_index(l, m)];
            if (c == 0.0) continue;
            const int am = std::abs(m);
            double T = 1.0, dT = 0.0;
            if (m > 0) {
                T = std::sqrt(2.0) * std::cos(m * p);
                dT = -std::sqrt(2.0) * m * std::sin(m * p);
            } else if (m < 0) {
                T = std::sqrt(2.0) * std::sin(am * p);
                dT = std::sqrt(2.0) * am * std::cos(am * p);
            }
            f += c * v0[tri(l, am)] * T;
            ft += c * v1[tri(l, am)] * T;
            fp += c * v0[tri(l, am)] * dT;
        }
    const double st = std::sin(t), ct = std::cos(t);
    const Vec3 et(ct * std::cos(p), ct * std::sin(p), -st);
    const Vec3 ep(-std::sin(p), std::cos(p), 0.0);
    PointValue out;
    out.f = f;
    out.gradient = ft * et + (fp / st) * ep;
    return out;
}

Eigen::MatrixXd assemble_bilinear(const QuadratureGrid& grid, int L, const std::vector<BilinearTerm>& terms) {
    grid.require_capacity(L);
    const auto basis = basis_for(grid, L);
    const int n = mode_count(L);
    const int nt = grid.n_theta();
    const int np = grid.n_phi();
    const int nm = 2 * L + 1;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (const auto& term : terms)
        if (static_cast<int>(term.coefficient.size()) != grid.size())
            throw PreconditionError("bilinear coefficient does not match grid");

    Eigen::MatrixXd weighted(nm, np);
    std::vector<double> la, lb;
    for (int r = 0; r < nt; ++r) {
        const double wt = grid.ring_weights()[r];
        for (const auto& term : terms) {
            const double* c = term.coefficient.data() + r * np;
            for (int k = 0; k < np; ++k) weighted.col(k) = basis->trig.col(k) * (c[k] * grid.longitude_weight());
            const Eigen::MatrixXd I = weighted * basis->trig.transpose();
            const int ti = t_order(term.test), pi = p_order(term.test);
            const int tj = t_order(term.trial), pj = p_order(term.trial);
            for (int m = -L; m <= L; ++m) {
                const double sm = trig_scale(pi, m);
                if (sm == 0.0) continue;
                const int am = std::abs(m);
                la.resize(L + 1);
                for (int l = am; l <= L; ++l) la[l] = basis->lambda(ti, r, l, am);
                for (int mp = -L; mp <= L; ++mp) {
                    const double smp = trig_scale(pj, mp);
                    if (smp == 0.0) continue;
                    const double kappa = wt * sm * smp * I(trig_target(pi, m) + L, trig_target(pj, mp) + L);
                    if (kappa == 0.0) continue;
                    const int amp = std::abs(mp);
                    lb.resize(L + 1);
                    for (int l = amp; l <= L; ++l) lb[l] = kappa * basis->lambda(tj, r, l, amp);
                    for (int lp = amp; lp <= L; ++lp) {
                        const double b = lb[lp];
                        double* col = A.col(mode_index(lp, mp)).data();
                        for (int l = am; l <= L; ++l) col[mode_index(l, m)] += la[l] * b;
                    }
                }
            }
        }
    }
    return A;
}

}  // namespace cmcprobe
