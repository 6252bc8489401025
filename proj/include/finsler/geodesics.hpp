#pragma once
// Fixed-step RK4 integration of geodesics and base-manifold flows, plus
// curve-wise constancy probes (flag curvature, Ricci, S/F, distortion).
//
// The integrator is deliberately fixed-step: probe statistics must be
// bit-reproducible given a seed, and adaptive stepping would couple them to
// floating-point tie-breaks.  Domain exits are detected through the metric
// guard's sign change and bisected to the crossing before reporting.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "finsler/catalog.hpp"
#include "finsler/curvature.hpp"
#include "finsler/nonriem.hpp"

namespace finsler {

struct TrajectoryPoint {
    double t = 0.0;
    Vec x{};
    Vec y{};
    double F = 0.0;  // conserved along geodesics; zero for plain flows
};

struct Trajectory {
    int n = 0;
    double step = 0.0;
    int order = 4;  // classic Runge-Kutta
    std::vector<TrajectoryPoint> samples;

    const TrajectoryPoint& front() const { return samples.front(); }
    const TrajectoryPoint& back() const { return samples.back(); }

    // max |F(t) - F(0)| / F(0) over the logged samples
    double f_drift() const {
        double f0 = samples.front().F;
        double worst = 0.0;
        for (const auto& p : samples)
            worst = std::max(worst, std::abs(p.F - f0));
        return worst / std::abs(f0);
    }
};

namespace detail {

// Spray values G^i(x, y).  A minimal jet spec (one x-slot, two y-slots) is
// enough for the spray formula and keeps the per-stage cost small.
inline Vec spray_values(const MetricField& m, const Vec& x, const Vec& y) {
    TangentSample s;
    s.n = m.dim;
    s.x = x;
    s.y = y;
    s.margin = domain_margin(m, x);
    PointEval pe(m, s, JetSpec{m.dim, 1, 2, 3});
    const auto& G = pe.spray_jets();
    Vec out{};
    for (int i = 0; i < m.dim; ++i) out[i] = G[i].value();
    return out;
}

// Bisect the guard zero along the segment from a (inside) to b (outside);
// returns the crossing fraction in [0, 1].
inline double bisect_guard(const MetricField& m, const Vec& a, const Vec& b) {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (lo + hi);
        Vec p{};
        for (int i = 0; i < m.dim; ++i) p[i] = a[i] + mid * (b[i] - a[i]);
        if (m.guard_value(p.data()) > 0.0) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

// Geodesic through (x0, y0): second-order system xdot = y, ydot = -2G(x, y),
// integrated with classic RK4 over [0, T] in `steps` fixed steps.
inline Trajectory integrate_geodesic(const MetricField& m, const Vec& x0,
                                     const Vec& y0, double T, int steps) {
    if (steps < 1) throw ConfigError("step count must be positive");
    double h = T / steps;
    if (!(std::abs(h) > 1e-14 * std::max(1.0, std::abs(T))))
        throw StepUnderflow("geodesic step size underflows");
    const int n = m.dim;

    Trajectory traj;
    traj.n = n;
    traj.step = h;
    traj.samples.reserve(steps + 1);

    Vec x = x0, y = y0;
    traj.samples.push_back({0.0, x, y, m(x.data(), y.data())});

    for (int k = 0; k < steps; ++k) {
        double t = k * h;
        Vec xs[4], ys[4], kx[4], ky[4];
        static const double c[4] = {0.0, 0.5, 0.5, 1.0};
        try {
            for (int st = 0; st < 4; ++st) {
                for (int i = 0; i < n; ++i) {
                    xs[st][i] = x[i] + (st ? c[st] * h * kx[st - 1][i] : 0.0);
                    ys[st][i] = y[i] + (st ? c[st] * h * ky[st - 1][i] : 0.0);
                }
                kx[st] = ys[st];
                Vec G = detail::spray_values(m, xs[st], ys[st]);
                for (int i = 0; i < n; ++i) ky[st][i] = -2.0 * G[i];
            }
        } catch (const GuardViolation&) {
            // a stage point crossed the chart boundary: locate the exit along
            // the outgoing ray and report it
            Vec probe{};
            for (int i = 0; i < n; ++i) probe[i] = x[i] + h * y[i];
            double lam = detail::bisect_guard(m, x, probe);
            throw LeftDomain(t + lam * h);
        }
        Vec xn{}, yn{};
        for (int i = 0; i < n; ++i) {
            xn[i] = x[i] + h / 6.0 *
                               (kx[0][i] + 2.0 * kx[1][i] + 2.0 * kx[2][i] + kx[3][i]);
            yn[i] = y[i] + h / 6.0 *
                               (ky[0][i] + 2.0 * ky[1][i] + 2.0 * ky[2][i] + ky[3][i]);
        }
        if (!(m.guard_value(xn.data()) > 0.0)) {
            double lam = detail::bisect_guard(m, x, xn);
            throw LeftDomain(t + lam * h);
        }
        x = xn;
        y = yn;
        traj.samples.push_back({(k + 1) * h, x, y, m(x.data(), y.data())});
    }
    return traj;
}

// Integral curve of a base vector field: xdot = X(x).  The y slot of each
// sample records the velocity X(x(t)); the F log stays zero.
inline Trajectory integrate_flow(const VectorFieldExpr& X, const Vec& x0,
                                 double T, int steps) {
    if (steps < 1) throw ConfigError("step count must be positive");
    double h = T / steps;
    if (!(std::abs(h) > 1e-14 * std::max(1.0, std::abs(T))))
        throw StepUnderflow("flow step size underflows");
    const int n = X.dim;
    auto rhs = [&](const Vec& p) {
        Vec v{};
        for (int i = 0; i < n; ++i) v[i] = eval(X.comps[i], p.data(), nullptr);
        return v;
    };

    Trajectory traj;
    traj.n = n;
    traj.step = h;
    traj.samples.reserve(steps + 1);
    Vec x = x0;
    traj.samples.push_back({0.0, x, rhs(x), 0.0});
    for (int k = 0; k < steps; ++k) {
        Vec k1 = rhs(x);
        Vec p{};
        for (int i = 0; i < n; ++i) p[i] = x[i] + 0.5 * h * k1[i];
        Vec k2 = rhs(p);
        for (int i = 0; i < n; ++i) p[i] = x[i] + 0.5 * h * k2[i];
        Vec k3 = rhs(p);
        for (int i = 0; i < n; ++i) p[i] = x[i] + h * k3[i];
        Vec k4 = rhs(p);
        for (int i = 0; i < n; ++i)
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        traj.samples.push_back({(k + 1) * h, x, rhs(x), 0.0});
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Constancy probes

enum class ProbeQuantity { FlagCurvature, RicciOverF2, SOverF, Distortion };

struct ProbeStats {
    double mean = 0.0;
    double max_deviation = 0.0;  // max |value - mean|
    int points = 0;              // curve points visited
    int values = 0;              // scalars collected (> points for flag probes)
};

// Evaluate the chosen scalar at up to `max_points` samples spread evenly
// along the curve.  For flag curvature, `flags_per_point` random flags are
// drawn at every visited point and the deviation is taken over all of them.
inline ProbeStats probe_constancy(const MetricField& m, const Trajectory& curve,
                                  ProbeQuantity q, std::uint64_t seed = 1,
                                  int max_points = 20, int flags_per_point = 5) {
    if (curve.samples.empty()) throw ConfigError("probe needs a nonempty trajectory");
    int count = static_cast<int>(curve.samples.size());
    int stride = std::max(1, count / max_points);
    Rng rng(seed ^ 0xf1a6ULL);

    std::vector<double> vals;
    int visited = 0;
    for (int idx = 0; idx < count; idx += stride) {
        const TrajectoryPoint& p = curve.samples[idx];
        TangentSample s;
        s.n = curve.n;
        s.x = p.x;
        s.y = p.y;
        s.margin = domain_margin(m, p.x);
        ++visited;
        switch (q) {
            case ProbeQuantity::FlagCurvature: {
                PointEval pe(m, s, PointEval::Depth::Riemann);
                CurvatureEval cv(pe);
                for (int f = 0; f < flags_per_point; ++f) {
                    Vec v = draw_flag_vector(pe, rng);
                    vals.push_back(cv.flag_curvature(v));
                }
                break;
            }
            case ProbeQuantity::RicciOverF2: {
                PointEval pe(m, s, PointEval::Depth::Riemann);
                CurvatureEval cv(pe);
                double F = pe.F_jet().value();
                vals.push_back(cv.ric_scalar() / (F * F));
                break;
            }
            case ProbeQuantity::SOverF: {
                PointEval pe(m, s, PointEval::Depth::Spray);
                NonRiemEval nr(pe);
                vals.push_back(nr.s_curvature() / pe.F_jet().value());
                break;
            }
            case ProbeQuantity::Distortion: {
                PointEval pe(m, s, PointEval::Depth::Spray);
                NonRiemEval nr(pe);
                vals.push_back(nr.distortion());
                break;
            }
        }
    }
    ProbeStats st;
    st.points = visited;
    st.values = static_cast<int>(vals.size());
    for (double v : vals) st.mean += v;
    st.mean /= vals.size();
    for (double v : vals)
        st.max_deviation = std::max(st.max_deviation, std::abs(v - st.mean));
    return st;
}

// CSV export: t, x..., y..., F and optionally one probed column.  Numbers are
// printed with %.17g so a re-read reproduces them exactly.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                                 const std::vector<double>* probed = nullptr,
                                 const std::string& probed_name = "probe") {
    os << "t";
    for (int i = 1; i <= traj.n; ++i) os << ",x" << i;
    for (int i = 1; i <= traj.n; ++i) os << ",y" << i;
    os << ",F";
    if (probed) os << "," << probed_name;
    os << "\n";
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << buf;
    };
    for (std::size_t k = 0; k < traj.samples.size(); ++k) {
        const auto& p = traj.samples[k];
        put(p.t);
        for (int i = 0; i < traj.n; ++i) {
            os << ",";
            put(p.x[i]);
        }
        for (int i = 0; i < traj.n; ++i) {
            os << ",";
            put(p.y[i]);
        }
        os << ",";
        put(p.F);
        if (probed) {
            os << ",";
            put(k < probed->size() ? (*probed)[k] : 0.0);
        }
        os << "\n";
    }
}

}  // namespace finsler
