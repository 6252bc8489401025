#pragma once
// Indicatrix volumes by angular quadrature.
//
// The indicatrix {y : F(x, y) < 1} is star-shaped about the origin and
// 1-homogeneity gives its radial extent in direction w directly as
// r(w) = 1/F(x, w).  Hence
//
//     Vol{F < 1}(x) = (1/n) * integral over S^{n-1} of r(w)^n dw
//
// and no root finding is involved.  Dimensions 1..3 use Gauss-Legendre rules
// in angular coordinates; dimension 4 averages over a scrambled
// low-discrepancy point set on S^3.  Every estimate carries a self-reported
// error (coarse-vs-fine or half-vs-full comparison) and refuses to return a
// value that fails its convergence threshold.

#include <cmath>
#include <cstdint>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/expr.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

enum class QuadratureMethod { PolarGaussLegendre, QuasiRandom };

struct GaussLegendreRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;  // sum to 2
};

// Nodes are roots of the Legendre polynomial P_m, found by Newton iteration
// from the Chebyshev-based initial guess.  Deterministic to the last bit.
inline GaussLegendreRule gauss_legendre(int m) {
    if (m < 2 || m > 4096) throw ConfigError("Gauss-Legendre order out of range");
    GaussLegendreRule rule;
    rule.nodes.resize(m);
    rule.weights.resize(m);
    for (int i = 0; i < m; ++i) {
        double t = std::cos(M_PI * (i + 0.75) / (m + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            // Recurrence for P_m(t) and P'_m(t).
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= m; ++k) {
                double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = m * (t * p1 - p0) / (t * t - 1.0);
            double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) break;
        }
        rule.nodes[i] = t;
        rule.weights[i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    return rule;
}

// Lebesgue measure of the Euclidean unit ball, the normaliser in the
// distortion.  Closed form per dimension keeps this exact.
inline double unit_ball_volume(int n) {
    switch (n) {
        case 1: return 2.0;
        case 2: return M_PI;
        case 3: return 4.0 * M_PI / 3.0;
        case 4: return M_PI * M_PI / 2.0;
        default: throw ConfigError("dimension must be between 1 and 4");
    }
}

struct IndicatrixVolume {
    double volume = 0.0;
    double error_estimate = 0.0;  // relative, from the embedded coarse pass
    QuadratureMethod method = QuadratureMethod::PolarGaussLegendre;
    int nodes = 0;
};

namespace detail {

// One radial sample of the integrand r(w)^n = F(x, w)^{-n}.
inline double radial_power(const MetricField& m, const double* x, const double* w) {
    double F = eval(m.F, x, w);
    if (!(F > 0.0)) throw DomainError("metric not positive on the unit sphere");
    double r = 1.0 / F;
    double p = r;
    for (int k = 1; k < m.dim; ++k) p *= r;
    return p;
}

inline double volume_n1(const MetricField& m, const Vec& x) {
    double wp[1] = {1.0}, wm[1] = {-1.0};
    return detail::radial_power(m, x.data(), wp) + detail::radial_power(m, x.data(), wm);
}

// n = 2: (1/2) * integral over [0, 2pi] of r(theta)^2 dtheta.
inline double volume_n2(const MetricField& m, const Vec& x, int order) {
    GaussLegendreRule rule = gauss_legendre(order);
    double acc = 0.0;
    for (int i = 0; i < order; ++i) {
        double theta = M_PI * (rule.nodes[i] + 1.0);
        double w[2] = {std::cos(theta), std::sin(theta)};
        acc += rule.weights[i] * radial_power(m, x.data(), w);
    }
    return 0.5 * acc * M_PI;  // d(theta) = pi * d(node)
}

// n = 3: (1/3) * integral of r^3 sin(theta) dtheta dphi over the product grid.
inline double volume_n3(const MetricField& m, const Vec& x, int order_theta, int order_phi) {
    GaussLegendreRule rt = gauss_legendre(order_theta);
    GaussLegendreRule rp = gauss_legendre(order_phi);
    double acc = 0.0;
    for (int i = 0; i < order_theta; ++i) {
        double theta = 0.5 * M_PI * (rt.nodes[i] + 1.0);
        double st = std::sin(theta), ct = std::cos(theta);
        double row = 0.0;
        for (int j = 0; j < order_phi; ++j) {
            double phi = M_PI * (rp.nodes[j] + 1.0);
            double w[3] = {st * std::cos(phi), st * std::sin(phi), ct};
            row += rp.weights[j] * radial_power(m, x.data(), w);
        }
        acc += rt.weights[i] * st * row;
    }
    // d(theta) = (pi/2) d(node), d(phi) = pi d(node)
    return acc * (0.5 * M_PI) * M_PI / 3.0;
}

// Additive low-discrepancy sequence on [0,1)^3 with a fixed Cranley-Patterson
// rotation.  The generator alphas come from the plastic-constant family; the
// offsets are arbitrary fixed fractions.  Fully deterministic.
inline void korobov_point(std::uint64_t k, double out[3]) {
    static const double alpha[3] = {0.8191725133961645, 0.6710436067037893, 0.5497004779019703};
    static const double offset[3] = {0.5773502691896258, 0.3247179572447460, 0.7548776662466927};
    for (int j = 0; j < 3; ++j) {
        double v = offset[j] + static_cast<double>(k) * alpha[j];
        out[j] = v - std::floor(v);
    }
}

// Inverse CDF of the colatitude density sin^2(theta) on [0, pi] by Newton with
// bisection fallback.  CDF(theta) = (theta - sin(theta)cos(theta)) / pi.
inline double invert_sin2_cdf(double u) {
    double lo = 0.0, hi = M_PI;
    double t = M_PI * u;  // initial guess: uniform
    for (int iter = 0; iter < 60; ++iter) {
        double f = (t - std::sin(t) * std::cos(t)) / M_PI - u;
        if (f > 0.0) hi = t; else lo = t;
        double d = 2.0 * std::sin(t) * std::sin(t) / M_PI;
        double step = (d > 1e-14) ? f / d : 0.0;
        double next = t - step;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - t) < 1e-15) { t = next; break; }
        t = next;
    }
    return t;
}

// n = 4: equal-weight average of r^4 over S^3 times |S^3| = 2 pi^2, then /4.
// Points come from the low-discrepancy sequence mapped through the exact
// area-preserving spherical parameterisation.
inline double volume_n4(const MetricField& m, const Vec& x, std::uint64_t first, std::uint64_t count) {
    double acc = 0.0;
    for (std::uint64_t k = first; k < first + count; ++k) {
        double u[3];
        korobov_point(k, u);
        double t1 = invert_sin2_cdf(u[0]);
        double c2 = 1.0 - 2.0 * u[1];
        double s2 = std::sqrt(std::max(0.0, 1.0 - c2 * c2));
        double phi = 2.0 * M_PI * u[2];
        double s1 = std::sin(t1);
        double w[4] = {std::cos(t1), s1 * c2, s1 * s2 * std::cos(phi), s1 * s2 * std::sin(phi)};
        acc += radial_power(m, x.data(), w);
    }
    return 2.0 * M_PI * M_PI * acc / static_cast<double>(count) / 4.0;
}

}  // namespace detail

// Indicatrix volume at x.  `refine` scales every node count (2 = doubled
// resolution, used for cross-checks); the self-estimate compares against an
// embedded coarser pass and convergence failure is an error, never a silent
// bad value.
inline IndicatrixVolume indicatrix_volume(const MetricField& m, const Vec& x, int refine = 1) {
    if (refine < 1 || refine > 64) throw ConfigError("refine factor out of range");
    m.check_guard(x.data());

    IndicatrixVolume out;
    double coarse = 0.0;
    double threshold = 0.0;
    switch (m.dim) {
        case 1:
            out.volume = detail::volume_n1(m, x);
            out.nodes = 2;
            out.error_estimate = 0.0;
            return out;  // exact up to evaluation roundoff
        case 2: {
            int order = 256 * refine;
            out.volume = detail::volume_n2(m, x, order);
            coarse = detail::volume_n2(m, x, order / 2);
            out.nodes = order;
            threshold = 1e-7;
            break;
        }
        case 3: {
            int ot = 64 * refine, op = 128 * refine;
            out.volume = detail::volume_n3(m, x, ot, op);
            coarse = detail::volume_n3(m, x, ot / 2, op / 2);
            out.nodes = ot * op;
            threshold = 1e-5;
            break;
        }
        case 4: {
            std::uint64_t count = static_cast<std::uint64_t>(65536) * refine;
            double half = detail::volume_n4(m, x, 0, count / 2);
            double rest = detail::volume_n4(m, x, count / 2, count - count / 2);
            out.volume = (half * (count / 2) + rest * (count - count / 2)) / static_cast<double>(count);
            coarse = half;
            out.nodes = static_cast<int>(count);
            out.method = QuadratureMethod::QuasiRandom;
            threshold = 1e-3;
            break;
        }
        default:
            throw ConfigError("dimension must be between 1 and 4");
    }
    double scale = std::max(std::abs(out.volume), 1e-300);
    out.error_estimate = std::abs(out.volume - coarse) / scale;
    if (!(out.volume > 0.0) || !std::isfinite(out.volume) || out.error_estimate > threshold)
        throw QuadratureNotConverged(out.error_estimate);
    return out;
}

}  // namespace finsler
