// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <optional>

#include "ceir/math.hpp"

namespace ceir {

/// v(u) = c0 + c1 u + c2 u^2 + c3 u^3 over the normalized cell segment u in [0,1].
struct CubicPoly {
    double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;

    double operator()(double u) const { return c0 + u * (c1 + u * (c2 + u * c3)); }
    double derivative(double u) const { return c1 + u * (2.0 * c2 + u * 3.0 * c3); }
};

/// Interpolating cubic through (0,v0), (1/3,v1), (2/3,v2), (1,v3).
constexpr CubicPoly cubic_from_samples(double v0, double v1, double v2, double v3) {
    return {v0, 0.5 * (-11.0 * v0 + 18.0 * v1 - 9.0 * v2 + 2.0 * v3),
            4.5 * (2.0 * v0 - 5.0 * v1 + 4.0 * v2 - v3), 4.5 * (-v0 + 3.0 * v1 - 3.0 * v2 + v3)};
}

/// Up to three roots in ascending order.
struct RootList {
    std::array<double, 3> u{};
    int count = 0;

    void push(double r) {
        if (count > 0 && r <= u[count - 1]) return;
        if (count < 3) u[count++] = r;
    }
    const double* begin() const { return u.data(); }
    const double* end() const { return u.data() + count; }
};

namespace detail {

constexpr double kRootTolerance = 1e-7;

// Illinois regula falsi on a bracket with f(a)*f(b) < 0, falling back to bisection every
// fourth step so the bracket always shrinks.
template <class F>
double refine_root(F&& f, double a, double b, double fa, double fb) {
    int side = 0;
    for (int it = 0; it < 200; ++it) {
        double m = (it % 4 == 3) ? 0.5 * (a + b) : (a * fb - b * fa) / (fb - fa);
        if (!(m > a && m < b)) m = 0.5 * (a + b);
        const double fm = f(m);
        if (fm == 0.0) return m;
        if ((fm < 0.0) == (fa < 0.0)) {
            a = m;
            fa = fm;
            if (side == -1) fb *= 0.5;
            side = -1;
        } else {
            b = m;
            fb = fm;
            if (side == 1) fa *= 0.5;
            side = 1;
        }
        if (b - a <= 1e-12 || (b - a <= 1e-9 && std::abs(fm) <= kRootTolerance)) break;
    }
    const double m = 0.5 * (a + b);
    return m;
}

}  // namespace detail

/// All sign-change roots of poly(u) = iso in [u_lo, u_hi], ascending. The interval is split at
/// the real roots of the derivative so that each span is monotone, then each bracketing span is
/// refined. A polynomial identical to `iso` yields a single root at u_lo.
inline RootList all_roots(const CubicPoly& poly, double iso, double u_lo, double u_hi) {
    RootList roots;
    auto f = [&](double u) { return poly(u) - iso; };

    const double scale = std::abs(poly.c0) + std::abs(poly.c1) + std::abs(poly.c2) + std::abs(poly.c3) + 1.0;
    if (std::abs(poly.c1) + std::abs(poly.c2) + std::abs(poly.c3) <= 1e-15 * scale) {
        if (std::abs(poly.c0 - iso) <= 1e-15 * scale) roots.push(u_lo);
        return roots;
    }

    std::array<double, 4> cuts{};
    int ncuts = 0;
    cuts[ncuts++] = u_lo;
    // Derivative 3c3 u^2 + 2c2 u + c1 = 0.
    const double qa = 3.0 * poly.c3, qb = 2.0 * poly.c2, qc = poly.c1;
    std::array<double, 2> crit{};
    int ncrit = 0;
    if (std::abs(qa) <= 1e-14 * (std::abs(qb) + std::abs(qc))) {
        if (qb != 0.0) crit[ncrit++] = -qc / qb;
    } else {
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc >= 0.0) {
            const double sq = std::sqrt(disc);
            const double q = -0.5 * (qb + (qb >= 0.0 ? sq : -sq));
            if (q != 0.0) crit[ncrit++] = qc / q;
            crit[ncrit++] = q / qa;
            if (ncrit == 2 && crit[0] > crit[1]) std::swap(crit[0], crit[1]);
        }
    }
    for (int i = 0; i < ncrit; ++i)
        if (crit[i] > u_lo && crit[i] < u_hi && crit[i] > cuts[ncuts - 1]) cuts[ncuts++] = crit[i];
    cuts[ncuts++] = u_hi;

    double a = cuts[0], fa = f(a);
    if (fa == 0.0) roots.push(a);
    for (int i = 1; i < ncuts; ++i) {
        const double b = cuts[i], fb = f(b);
        if (fb == 0.0) {
            roots.push(b);
        } else if (fa != 0.0 && (fa < 0.0) != (fb < 0.0)) {
            roots.push(detail::refine_root(f, a, b, fa, fb));
        }
        a = b;
        fa = fb;
    }
    return roots;
}

/// Smallest root of poly(u) = iso in [u_lo, u_hi], or nothing when no span changes sign.
inline std::optional<double> first_root(const CubicPoly& poly, double iso, double u_lo, double u_hi) {
    if (!(u_lo >= 0.0 && u_lo < u_hi && u_hi <= 1.0)) throw ContractViolation("first_root requires 0 <= lo < hi <= 1");
    const RootList r = all_roots(poly, iso, u_lo, u_hi);
    if (r.count == 0) return std::nullopt;
    return r.u[0];
}

}  // namespace ceir
