#pragma once
// Non-Riemannian quantities: distortion, S-curvature, mean Berwald curvature E
// and its horizontal derivative H, the Landsberg family, and a least-squares
// fit testing whether the mean Landsberg form is a metric multiple of the mean
// Cartan form.
//
// The distortion splits as
//
//     tau(x, y) = (1/2) ln det g(x, y)  +  ln Vol{F<1}(x) - ln Vol(B^n)
//
// where only the x-only volume term needs quadrature.  Its contribution to the
// S-curvature is linear in y, so E (half the y-Hessian of S) and H carry no
// quadrature error at all: the jet route for E and H is exact, and the
// difference-quotient route for E recomputes the full S, volume term included,
// as a cross-check of the whole assembly.

#include <cmath>
#include <optional>
#include <vector>

#include "finsler/core.hpp"
#include "finsler/quadrature.hpp"

namespace finsler {

namespace detail {

inline Jet jet_det_rec(int n, const std::vector<Jet>& a, int row,
                       std::vector<int>& cols) {
    if (cols.size() == 1) return a[row * n + cols[0]];
    std::optional<Jet> acc;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        int col = cols[j];
        std::vector<int> rest;
        rest.reserve(cols.size() - 1);
        for (std::size_t k = 0; k < cols.size(); ++k)
            if (k != j) rest.push_back(cols[k]);
        Jet term = a[row * n + col] * jet_det_rec(n, a, row + 1, rest);
        if (j % 2 == 1) term = term * -1.0;
        acc = acc ? *acc + term : term;
    }
    return *acc;
}

}  // namespace detail

// Determinant over the jet ring by cofactor expansion (n <= 4 keeps it tiny).
inline Jet jet_det(int n, const std::vector<Jet>& a) {
    std::vector<int> cols(n);
    for (int j = 0; j < n; ++j) cols[j] = j;
    return detail::jet_det_rec(n, a, 0, cols);
}

// d/dx_i of ln Vol{F<1} at x by five-point central differences with one
// Richardson step.  The step scales with the domain margin so the stencil
// stays inside a guarded chart.
inline Vec log_volume_gradient(const MetricField& m, const Vec& x, double margin,
                               int refine = 1) {
    if (!(margin > 0.0)) throw ConfigError("volume gradient needs a positive margin");
    int n = m.dim;
    double h = 1e-3 * std::min(margin, 1.0);
    auto lv = [&](const Vec& p) { return std::log(indicatrix_volume(m, p, refine).volume); };
    Vec grad{};
    for (int i = 0; i < n; ++i) {
        auto five = [&](double step) {
            Vec p = x;
            p[i] = x[i] - 2 * step;
            double f1 = lv(p);
            p[i] = x[i] - step;
            double f2 = lv(p);
            p[i] = x[i] + step;
            double f3 = lv(p);
            p[i] = x[i] + 2 * step;
            double f4 = lv(p);
            return (f1 - 8.0 * f2 + 8.0 * f3 - f4) / (12.0 * step);
        };
        double d1 = five(h), d2 = five(0.5 * h);
        grad[i] = (16.0 * d2 - d1) / 15.0;
    }
    return grad;
}

class NonRiemEval {
  public:
    // refine > 1 doubles (quadruples, ...) the quadrature resolution behind
    // the volume term; used to demonstrate the results are converged.
    explicit NonRiemEval(PointEval& pe, int refine = 1) : pe_(pe), refine_(refine) {}

    PointEval& point() { return pe_; }

    // ln Vol{F<1}(x) - ln Vol(B^n(1))
    double log_volume_ratio() {
        if (!logvol_) {
            IndicatrixVolume v = indicatrix_volume(pe_.field(), pe_.sample().x, refine_);
            logvol_ = std::log(v.volume) - std::log(unit_ball_volume(pe_.n()));
        }
        return *logvol_;
    }

    const Vec& log_volume_grad() {
        if (!logvol_grad_)
            logvol_grad_ = log_volume_gradient(pe_.field(), pe_.sample().x,
                                               pe_.sample().margin, refine_);
        return *logvol_grad_;
    }

    // Jet of the determinant half of the distortion, (1/2) ln det g.
    const Jet& distortion_det_jet() {
        if (!tau_det_) tau_det_ = ln(jet_det(pe_.n(), pe_.g_jets())) * 0.5;
        return *tau_det_;
    }

    double distortion() { return distortion_det_jet().value() + log_volume_ratio(); }

    // S = y^i d_{x^i} tau - 2 G^i dot-d_i tau.  The volume term contributes
    // y^i times its x-gradient; its vertical derivative is zero.
    double s_curvature() {
        if (!s_) s_ = s_det_part(pe_) + s_volume_part(pe_.sample().y);
        return *s_;
    }

    // S(x, y') for the same x, reusing the cached volume data.  Feeds the
    // difference-quotient y-Hessian below.
    double s_curvature_at(const Vec& yshift) {
        TangentSample s2{pe_.n(), pe_.sample().x, yshift, pe_.sample().margin};
        PointEval q(pe_.field(), s2, PointEval::Depth::Spray);
        return s_det_part(q) + s_volume_part(yshift);
    }

    // E_jl = (1/2) B^i_{jil}: the canonical jet route.
    const std::vector<Jet>& E_jets() {
        if (!E_) {
            const auto& B = pe_.B_jets();
            int n = pe_.n();
            std::vector<Jet> out;
            out.reserve(pe_.i2(n, 0));
            for (int j = 0; j < n; ++j)
                for (int l = 0; l < n; ++l) {
                    Jet acc = pe_.zero();
                    for (int i = 0; i < n; ++i)
                        acc = acc + B[pe_.i4(i, j, i, l)];
                    out.push_back(acc * 0.5);
                }
            E_ = std::move(out);
        }
        return *E_;
    }

    TensorValue mean_berwald() {
        return JetTensor{pe_.n(), {Slot::Lower, Slot::Lower}, E_jets()}.values();
    }

    // E by second central differences of the full S in y, with one Richardson
    // step.  Independent of the jet route above everywhere past the shared
    // metric parser.
    TensorValue mean_berwald_fd() {
        int n = pe_.n();
        const Vec& y0 = pe_.sample().y;
        double scale = 1.0;
        for (double v : y0) scale = std::max(scale, std::abs(v));
        double h = 1e-3 * scale;
        double s0 = s_curvature();
        auto at = [&](double a, int i, double b, int j) {
            Vec y = y0;
            y[i] += a;
            y[j] += b;
            return s_curvature_at(y);
        };
        TensorValue out(n, {Slot::Lower, Slot::Lower});
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                auto second = [&](double step) {
                    if (i == j)
                        return (at(step, i, 0.0, j) - 2.0 * s0 + at(-step, i, 0.0, j)) /
                               (step * step);
                    return (at(step, i, step, j) - at(step, i, -step, j) -
                            at(-step, i, step, j) + at(-step, i, -step, j)) /
                           (4.0 * step * step);
                };
                double d1 = second(h), d2 = second(0.5 * h);
                double val = 0.5 * (4.0 * d2 - d1) / 3.0;
                out(i, j) = val;
                out(j, i) = val;
            }
        return out;
    }

    // H_ij = nabla_0 E_ij.  Requires the Full depth tier.
    TensorValue h_curvature() {
        JetTensor E{pe_.n(), {Slot::Lower, Slot::Lower}, E_jets()};
        return pe_.nabla0(E).values();
    }

    // L_ijk = nabla_0 C_ijk; with berwald_connection the same contraction is
    // taken through the Berwald connection, which must agree.
    JetTensor landsberg_jets(bool berwald_connection = false) {
        return pe_.nabla0(pe_.cartan_jt(), !berwald_connection);
    }

    TensorValue landsberg() { return landsberg_jets().values(); }

    // J_i = g^{jk} L_ijk
    TensorValue mean_landsberg() {
        int n = pe_.n();
        TensorValue L = landsberg();
        TensorValue gi = pe_.inverse_metric();
        TensorValue out(n, {Slot::Lower});
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) acc += gi(j, k) * L(i, j, k);
            out.data()[i] = acc;
        }
        return out;
    }

    // Least-squares multiple lambda in J + lambda I = 0, inner products taken
    // with g.  The residual is relative to |J|; a metric with J = 0 fits any
    // multiple, so the residual is reported as zero there.
    struct ImlFit {
        double lambda_hat = 0.0;
        double residual = 0.0;
    };

    ImlFit iml_fit() {
        int n = pe_.n();
        TensorValue J = mean_landsberg();
        TensorValue I = pe_.cartan().I;
        TensorValue gi = pe_.inverse_metric();
        double ii = 0.0, ji = 0.0, jj = 0.0;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                ii += gi(a, b) * I.data()[a] * I.data()[b];
                ji += gi(a, b) * J.data()[a] * I.data()[b];
                jj += gi(a, b) * J.data()[a] * J.data()[b];
            }
        if (!(std::sqrt(ii) > 1e-8))
            throw MeanCartanVanishes("mean Cartan form vanishes; multiple is undetermined");
        ImlFit fit;
        fit.lambda_hat = -ji / ii;
        double norm_j = std::sqrt(jj);
        if (norm_j > 1e-10 * std::max(1.0, std::sqrt(ii))) {
            double rr = 0.0;
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b)
                    rr += gi(a, b) * (J.data()[a] + fit.lambda_hat * I.data()[a]) *
                          (J.data()[b] + fit.lambda_hat * I.data()[b]);
            fit.residual = std::sqrt(std::max(0.0, rr)) / norm_j;
        }
        return fit;
    }

  private:
    PointEval& pe_;
    int refine_;
    std::optional<double> logvol_;
    std::optional<Vec> logvol_grad_;
    std::optional<Jet> tau_det_;
    std::optional<double> s_;
    std::optional<std::vector<Jet>> E_;

    double s_volume_part(const Vec& y) {
        const Vec& grad = log_volume_grad();
        double acc = 0.0;
        for (int i = 0; i < pe_.n(); ++i) acc += y[i] * grad[i];
        return acc;
    }

    // Determinant half of S at the sample held by q (jet-exact).
    double s_det_part(PointEval& q) {
        Jet tau = ln(jet_det(q.n(), q.g_jets())) * 0.5;
        const auto& G = q.spray_jets();
        double acc = 0.0;
        for (int i = 0; i < q.n(); ++i) {
            acc += q.sample().y[i] * tau.partial(MultiIndex::dx(i));
            acc -= 2.0 * G[i].value() * tau.partial(MultiIndex::dy(i));
        }
        return acc;
    }
};

}  // namespace finsler
