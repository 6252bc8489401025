#pragma once

// Built-in metrics and vector fields used by the verification suites.  Each
// entry records the structural flags the suites key off (Riemannian, Berwald,
// Landsberg, projectively flat) and the sampling rules that keep draws inside
// the strong-convexity domain.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "finsler/expr.hpp"
#include "finsler/rng.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

struct CatalogEntry {
    std::string name;
    std::string summary;
    bool riemannian = false;
    bool berwald = false;
    bool landsberg = false;
    bool projectively_flat = false;
    double box_radius = 0.8;   // sampling half-width in each x coordinate
    double axis_margin = 0.0;  // required min |y_i| / |y| (quartic entry)
    MetricField metric;
};

struct RandersParams {
    Vec b{{0.3, 0.0, 0.0, 0.0}};
    bool polynomial = false;  // x-dependent, non-closed beta
};

namespace detail {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string sum_of_squares(char var, int n) {
    std::string s;
    for (int i = 1; i <= n; ++i) {
        if (i > 1) s += " + ";
        s += var + std::to_string(i) + "^2";
    }
    return s;
}

inline std::string inner_xy(int n) {
    std::string s;
    for (int i = 1; i <= n; ++i) {
        if (i > 1) s += " + ";
        s += "x" + std::to_string(i) + "*y" + std::to_string(i);
    }
    return s;
}

}  // namespace detail

inline CatalogEntry catalog_euclidean(int n) {
    CatalogEntry e;
    e.name = "euclidean";
    e.summary = "flat Euclidean norm";
    e.riemannian = e.berwald = e.landsberg = e.projectively_flat = true;
    e.metric = MetricField::parse("sqrt(" + detail::sum_of_squares('y', n) + ")",
                                  n, {}, e.name);
    return e;
}

// Stereographic chart of the unit sphere: g_ij = 4 delta_ij / (1 + |x|^2)^2.
inline CatalogEntry catalog_sphere_chart(int n) {
    CatalogEntry e;
    e.name = "sphere_chart";
    e.summary = "round sphere, stereographic chart, sectional curvature 1";
    e.riemannian = e.berwald = e.landsberg = true;
    e.metric = MetricField::parse(
        "2*sqrt(" + detail::sum_of_squares('y', n) + ")/(1 + " +
            detail::sum_of_squares('x', n) + ")",
        n, {}, e.name);
    return e;
}

inline CatalogEntry catalog_randers(int n, const RandersParams& p = {}) {
    double b2 = 0.0;
    for (int i = 0; i < n; ++i) b2 += p.b[i] * p.b[i];
    // polynomial mode perturbs beta by at most 0.15|x|; stay convex on the box
    if (std::sqrt(b2) + (p.polynomial ? 0.15 * 0.8 * 2 : 0.0) >= 1.0)
        throw InvalidParameter("randers drift form must satisfy |b| < 1");
    CatalogEntry e;
    e.name = p.polynomial ? "randers_poly" : "randers";
    e.summary = p.polynomial
                    ? "Randers metric with non-closed polynomial drift form"
                    : "Randers metric with constant drift form";
    e.berwald = e.landsberg = !p.polynomial;
    std::string beta;
    for (int i = 1; i <= n; ++i) {
        std::string bi = detail::num(p.b[i - 1]);
        if (p.polynomial && n >= 2) {
            // beta_1 += 0.15 x2, beta_2 -= 0.1 x1: d(beta) != 0
            if (i == 1) bi = "(" + bi + " + 0.15*x2)";
            if (i == 2) bi = "(" + bi + " - 0.1*x1)";
        }
        if (!beta.empty()) beta += " + ";
        beta += bi + "*y" + std::to_string(i);
    }
    e.metric = MetricField::parse(
        "sqrt(" + detail::sum_of_squares('y', n) + ") + " + beta, n, {}, e.name);
    return e;
}

// Funk metric of the unit ball; projectively flat, constant flag curvature
// -1/4, spray G^i = F y^i / 2.
inline CatalogEntry catalog_funk(int n) {
    CatalogEntry e;
    e.name = "funk";
    e.summary = "Funk metric on the unit ball";
    e.projectively_flat = true;
    e.box_radius = 0.45;  // keeps |x| <= 0.45 sqrt(n) < 1 with healthy margin
    std::string x2 = detail::sum_of_squares('x', n);
    std::string y2 = detail::sum_of_squares('y', n);
    std::string xy = detail::inner_xy(n);
    e.metric = MetricField::parse(
        "(sqrt((1 - (" + x2 + "))*(" + y2 + ") + (" + xy + ")^2) + (" + xy +
            "))/(1 - (" + x2 + "))",
        n, "1 - (" + x2 + ")", e.name);
    return e;
}

inline CatalogEntry catalog_quartic_minkowski(int n) {
    CatalogEntry e;
    e.name = "quartic_minkowski";
    e.summary = "locally Minkowski quartic-mean norm";
    e.berwald = e.landsberg = true;
    e.axis_margin = 0.05;
    std::string s;
    for (int i = 1; i <= n; ++i) {
        if (i > 1) s += " + ";
        s += "y" + std::to_string(i) + "^4";
    }
    e.metric = MetricField::parse("pow(" + s + ", 1/4)", n, {}, e.name);
    return e;
}

inline std::vector<std::string> catalog_names() {
    return {"euclidean", "sphere_chart", "randers", "randers_poly", "funk",
            "quartic_minkowski"};
}

inline CatalogEntry catalog_build(const std::string& name, int n,
                                  const RandersParams& rp = {}) {
    if (name == "euclidean") return catalog_euclidean(n);
    if (name == "sphere_chart") return catalog_sphere_chart(n);
    if (name == "randers") return catalog_randers(n, rp);
    if (name == "randers_poly") {
        RandersParams p = rp;
        p.polynomial = true;
        return catalog_randers(n, p);
    }
    if (name == "funk") return catalog_funk(n);
    if (name == "quartic_minkowski") return catalog_quartic_minkowski(n);
    throw InvalidParameter("unknown catalog metric '" + name + "'");
}

// ---------------------------------------------------------------------------
// Vector fields

inline VectorFieldExpr field_rotation(int n, int i = 0, int j = 1) {
    std::vector<std::string> comps(n, "0");
    comps[i] = "-x" + std::to_string(j + 1);
    comps[j] = "x" + std::to_string(i + 1);
    return VectorFieldExpr::parse(comps, n, "rotation");
}

inline VectorFieldExpr field_translation(int n, int i = 0) {
    std::vector<std::string> comps(n, "0");
    comps[i] = "1";
    return VectorFieldExpr::parse(comps, n, "translation");
}

inline VectorFieldExpr field_dilation(int n) {
    std::vector<std::string> comps;
    for (int i = 1; i <= n; ++i) comps.push_back("x" + std::to_string(i));
    return VectorFieldExpr::parse(comps, n, "dilation");
}

// X^i = a^i + b^i_j x^j + x^i (c_j x^j): the projective family of flat space.
struct ProjectiveFamilyParams {
    Vec a{};
    Mat b{};
    Vec c{{1.0, 0.0, 0.0, 0.0}};
};

inline VectorFieldExpr field_projective_family(
    int n, const ProjectiveFamilyParams& p = {}) {
    std::string cx;
    for (int j = 1; j <= n; ++j) {
        if (!cx.empty()) cx += " + ";
        cx += detail::num(p.c[j - 1]) + "*x" + std::to_string(j);
    }
    std::vector<std::string> comps;
    for (int i = 1; i <= n; ++i) {
        std::string s = detail::num(p.a[i - 1]);
        for (int j = 1; j <= n; ++j)
            s += " + " + detail::num(p.b[i - 1][j - 1]) + "*x" + std::to_string(j);
        s += " + x" + std::to_string(i) + "*(" + cx + ")";
        comps.push_back(s);
    }
    return VectorFieldExpr::parse(comps, n, "c-projective");
}

// Dense random cubic polynomial field: the classifier's negative control.
inline VectorFieldExpr field_random_cubic(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::string> comps;
    for (int i = 0; i < n; ++i) {
        std::string s = detail::num(rng.uniform(-0.5, 0.5));
        for (int a = 1; a <= n; ++a) {
            s += " + " + detail::num(rng.uniform(-0.5, 0.5)) + "*x" + std::to_string(a);
            for (int b = a; b <= n; ++b) {
                s += " + " + detail::num(rng.uniform(-0.3, 0.3)) + "*x" +
                     std::to_string(a) + "*x" + std::to_string(b);
                for (int c = b; c <= n; ++c)
                    s += " + " + detail::num(rng.uniform(-0.2, 0.2)) + "*x" +
                         std::to_string(a) + "*x" + std::to_string(b) + "*x" +
                         std::to_string(c);
            }
        }
        comps.push_back(s);
    }
    return VectorFieldExpr::parse(comps, n, "random-cubic");
}

inline VectorFieldExpr catalog_field(const std::string& name, int n,
                                     std::uint64_t seed = 7) {
    if (name == "rotation") return field_rotation(n);
    if (name == "translation") return field_translation(n);
    if (name == "dilation") return field_dilation(n);
    if (name == "c-projective") return field_projective_family(n);
    if (name == "random-cubic") return field_random_cubic(n, seed);
    throw InvalidParameter("unknown catalog vector field '" + name + "'");
}

inline std::vector<std::string> catalog_field_names() {
    return {"rotation", "translation", "dilation", "c-projective", "random-cubic"};
}

// ---------------------------------------------------------------------------
// Sampling

// Margin to the guard zero set.  Exact for the ball-shaped Funk chart; for
// other guarded charts a conservative clamp of the guard value is used.
inline double domain_margin(const MetricField& m, const Vec& x) {
    if (!m.guard) return 1.0;
    double g = m.guard_value(x.data());
    if (!(g > 0.0)) return 0.0;
    double r2 = 0.0;
    for (int i = 0; i < m.dim; ++i) r2 += x[i] * x[i];
    // guard of the form 1 - |x|^2: distance to the sphere is 1 - |x|
    double ball = 1.0 - std::sqrt(r2);
    double est = std::min(1.0, g);
    return std::max(1e-12, std::min(ball > 0 ? ball : est, est));
}

inline std::vector<TangentSample> draw_samples(const CatalogEntry& entry,
                                               int count, std::uint64_t seed) {
    const MetricField& m = entry.metric;
    const int n = m.dim;
    Rng rng(seed ^ 0x5eedULL);
    std::vector<TangentSample> out;
    out.reserve(count);
    int guardrail = 0;
    while (static_cast<int>(out.size()) < count) {
        if (++guardrail > 100000)
            throw InsufficientSamples("sampling rejection rate too high");
        TangentSample s;
        s.n = n;
        for (int i = 0; i < n; ++i)
            s.x[i] = rng.uniform(-entry.box_radius, entry.box_radius);
        double r = rng.uniform(0.5, 1.5);
        double len2 = 0.0;
        for (int i = 0; i < n; ++i) {
            s.y[i] = rng.uniform(-1.0, 1.0);
            len2 += s.y[i] * s.y[i];
        }
        double len = std::sqrt(len2);
        if (len < 0.1) continue;
        for (int i = 0; i < n; ++i) s.y[i] *= r / len;
        if (entry.axis_margin > 0.0) {
            double min_c = 1e300;
            for (int i = 0; i < n; ++i)
                min_c = std::min(min_c, std::abs(s.y[i]));
            if (min_c < entry.axis_margin * r) continue;
        }
        s.margin = domain_margin(m, s.x);
        if (s.margin < 1e-3) continue;
        out.push_back(s);
    }
    return out;
}

}  // namespace finsler
