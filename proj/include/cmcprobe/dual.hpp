#pragma once

#include <array>
#include <cmath>

namespace cmcprobe {

// Forward-mode jet: value plus N directional derivatives.
template <int N>
struct Dual {
    double v = 0.0;
    std::array<double, N> d{};

    constexpr Dual() = default;
    constexpr Dual(double value) : v(value) {}  // NOLINT(implicit)

    static Dual variable(double value, int slot) {
        Dual out(value);
        out.d[slot] = 1.0;
        return out;
    }

    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (int i = 0; i < N; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (int i = 0; i < N; ++i) d[i] -= o.d[i];
        return *this;
    }
    Dual& operator*=(const Dual& o) {
        for (int i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
        v *= o.v;
        return *this;
    }
    Dual& operator/=(const Dual& o) {
        const double inv = 1.0 / o.v;
        for (int i = 0; i < N; ++i) d[i] = (d[i] - v * inv * o.d[i]) * inv;
        v *= inv;
        return *this;
    }
};

template <int N> Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <int N> Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <int N> Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <int N> Dual<N> operator/(Dual<N> a, const Dual<N>& b) { return a /= b; }
template <int N> Dual<N> operator+(Dual<N> a, double b) { a.v += b; return a; }
template <int N> Dual<N> operator+(double b, Dual<N> a) { a.v += b; return a; }
template <int N> Dual<N> operator-(Dual<N> a, double b) { a.v -= b; return a; }
template <int N> Dual<N> operator-(double b, const Dual<N>& a) { return Dual<N>(b) - a; }
template <int N> Dual<N> operator*(Dual<N> a, double b) {
    a.v *= b;
    for (auto& x : a.d) x *= b;
    return a;
}
template <int N> Dual<N> operator*(double b, Dual<N> a) { return a * b; }
template <int N> Dual<N> operator/(Dual<N> a, double b) { return a * (1.0 / b); }
template <int N> Dual<N> operator/(double b, const Dual<N>& a) { return Dual<N>(b) / a; }
template <int N> Dual<N> operator-(Dual<N> a) {
    a.v = -a.v;
    for (auto& x : a.d) x = -x;
    return a;
}

template <int N>
Dual<N> sqrt(const Dual<N>& a) {
    Dual<N> out(std::sqrt(a.v));
    const double s = 0.5 / out.v;
    for (int i = 0; i < N; ++i) out.d[i] = a.d[i] * s;
    return out;
}

inline double value_of(double x) { return x; }
template <int N> double value_of(const Dual<N>& x) { return x.v; }

}  // namespace cmcprobe
