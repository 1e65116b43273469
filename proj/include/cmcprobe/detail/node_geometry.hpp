#pragma once

#include <array>
#include <cmath>

#include "cmcprobe/dual.hpp"
#include "cmcprobe/metric_models.hpp"

namespace cmcprobe::detail {

template <class T>
using Vec3T = std::array<T, 3>;

// Graph function data at one node, on the orthonormal frame (e_theta, e_phi).
template <class T>
struct GraphJet {
    T f, g1, g2, h11, h12, h22;
};

struct NodeFrame {
    Vec3 u, e1, e2;
};

template <class T>
struct NodeGeometry {
    Vec3T<T> F1, F2;     // tangent vectors d/de_a of the embedding
    Vec3T<T> conormal;   // F1 x F2 as a covector
    Vec3T<T> nu;         // unit normal vector for the ambient metric
    T gam11, gam12, gam22, det_gamma;
    T inv11, inv12, inv22;
    T h11, h12, h22;
    T H, h_norm2, density;
};

template <class T>
NodeGeometry<T> node_geometry(const NodeFrame& fr, double scale, const MetricJet& jet, double f0,
                              const GraphJet<T>& q) {
    using std::sqrt;
    NodeGeometry<T> out;
    const T df = q.f - f0;
    const T rad = 1.0 + q.f;

    T g[3][3];
    T dg[3][3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            T gij = jet.g(i, j);
            for (int k = 0; k < 3; ++k) gij += jet.dg[k](i, j) * (scale * fr.u[k]) * df;
            g[i][j] = gij;
            for (int k = 0; k < 3; ++k) {
                T d = jet.dg[k](i, j);
                for (int l = 0; l < 3; ++l) d += jet.ddg[k][l](i, j) * (scale * fr.u[l]) * df;
                dg[k][i][j] = d;
            }
        }

    T c[3][3];
    c[0][0] = g[1][1] * g[2][2] - g[1][2] * g[2][1];
    c[0][1] = g[0][2] * g[2][1] - g[0][1] * g[2][2];
    c[0][2] = g[0][1] * g[1][2] - g[0][2] * g[1][1];
    c[1][1] = g[0][0] * g[2][2] - g[0][2] * g[2][0];
    c[1][2] = g[0][2] * g[1][0] - g[0][0] * g[1][2];
    c[2][2] = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    c[1][0] = c[0][1];
    c[2][0] = c[0][2];
    c[2][1] = c[1][2];
    const T det = g[0][0] * c[0][0] + g[0][1] * c[1][0] + g[0][2] * c[2][0];
    T ginv[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) ginv[i][j] = c[i][j] / det;

    // Gamma^k_ij
    T gamma[3][3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) {
            T lower[3];
            for (int l = 0; l < 3; ++l) lower[l] = 0.5 * (dg[i][l][j] + dg[j][l][i] - dg[l][i][j]);
            for (int k = 0; k < 3; ++k) {
                T s = ginv[k][0] * lower[0] + ginv[k][1] * lower[1] + ginv[k][2] * lower[2];
                gamma[k][i][j] = s;
                gamma[k][j][i] = s;
            }
        }

    const T* grad[2] = {&q.g1, &q.g2};
    const Vec3* e[2] = {&fr.e1, &fr.e2};
    Vec3T<T>* F[2] = {&out.F1, &out.F2};
    for (int a = 0; a < 2; ++a)
        for (int i = 0; i < 3; ++i) (*F[a])[i] = scale * ((*grad[a]) * fr.u[i] + rad * (*e[a])[i]);

    const Vec3T<T>& A = out.F1;
    const Vec3T<T>& B = out.F2;
    out.conormal = {A[1] * B[2] - A[2] * B[1], A[2] * B[0] - A[0] * B[2], A[0] * B[1] - A[1] * B[0]};
    Vec3T<T> w;
    for (int i = 0; i < 3; ++i)
        w[i] = ginv[i][0] * out.conormal[0] + ginv[i][1] * out.conormal[1] + ginv[i][2] * out.conormal[2];
    const T nn = w[0] * out.conormal[0] + w[1] * out.conormal[1] + w[2] * out.conormal[2];
    const T norm = sqrt(nn);
    for (int i = 0; i < 3; ++i) out.nu[i] = w[i] / norm;

    auto metric = [&](const Vec3T<T>& x, const Vec3T<T>& y) {
        T s = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) s += g[i][j] * x[i] * y[j];
        return s;
    };
    out.gam11 = metric(A, A);
    out.gam12 = metric(A, B);
    out.gam22 = metric(B, B);
    out.det_gamma = out.gam11 * out.gam22 - out.gam12 * out.gam12;
    out.inv11 = out.gam22 / out.det_gamma;
    out.inv12 = -out.gam12 / out.det_gamma;
    out.inv22 = out.gam11 / out.det_gamma;

    const T hess[2][2] = {{q.h11, q.h12}, {q.h12, q.h22}};
    T h[2][2];
    for (int a = 0; a < 2; ++a)
        for (int b = a; b < 2; ++b) {
            T s = 0.0;
            for (int k = 0; k < 3; ++k) {
                T dd = scale * (hess[a][b] * fr.u[k] + (*grad[a]) * (*e[b])[k] + (*grad[b]) * (*e[a])[k]);
                if (a == b) dd -= scale * rad * fr.u[k];
                T chr = 0.0;
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) chr += gamma[k][i][j] * (*F[a])[i] * (*F[b])[j];
                s += (dd + chr) * out.conormal[k];
            }
            h[a][b] = -s / norm;
        }
    out.h11 = h[0][0];
    out.h12 = h[0][1];
    out.h22 = h[1][1];

    out.H = out.inv11 * out.h11 + 2.0 * out.inv12 * out.h12 + out.inv22 * out.h22;
    const T m11 = out.inv11 * out.h11 + out.inv12 * out.h12;
    const T m12 = out.inv11 * out.h12 + out.inv12 * out.h22;
    const T m21 = out.inv12 * out.h11 + out.inv22 * out.h12;
    const T m22 = out.inv12 * out.h12 + out.inv22 * out.h22;
    out.h_norm2 = m11 * m11 + 2.0 * m12 * m21 + m22 * m22;
    out.density = sqrt(out.det_gamma);
    return out;
}

}  // namespace cmcprobe::detail
