#pragma once

// Pointwise geometry pipeline.  Every object downstream of F lives as a jet at
// one tangent sample, so horizontal derivatives delta_k = d_k - G^s_k dy_s are
// exact jet compositions; finite differences never enter an identity check.
//
// Capacity bookkeeping is implicit: jet arithmetic lands on the intersection
// layout of its operands, and requesting a derivative the layout cannot hold
// throws OrderOutOfSpec instead of returning a silently truncated value.

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "finsler/expr.hpp"
#include "finsler/jet.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

// Tensor with jet components at a fixed sample, dense row-major.
struct JetTensor {
    int n = 0;
    std::vector<Slot> variance;
    std::vector<Jet> comp;

    int rank() const { return static_cast<int>(variance.size()); }

    static std::size_t count(int n, int rank) {
        std::size_t c = 1;
        for (int r = 0; r < rank; ++r) c *= static_cast<std::size_t>(n);
        return c;
    }

    const Jet& at(std::initializer_list<int> idx) const {
        std::size_t flat = 0;
        for (int i : idx) flat = flat * n + i;
        return comp[flat];
    }

    TensorValue values() const {
        TensorValue out(n, variance);
        for (std::size_t r = 0; r < comp.size(); ++r)
            out.data()[r] = comp[r].value();
        return out;
    }
};

class PointEval {
  public:
    // Jet depth tiers.  Deeper tiers cost more per sample; pick the shallowest
    // one that holds the derivatives a consumer actually extracts.
    //   Metric    g, Cartan family, canonical section
    //   Spray     + G, G^i_j, G^i_jk, Gamma, covariant derivatives
    //   SprayDeep + Berwald curvature B, mean Berwald E (pointwise)
    //   Riemann   + R^i_k and flag curvature
    //   Full      + hh-curvatures, Ricci tensors, Landsberg, H (everything)
    enum class Depth { Metric, Spray, SprayDeep, Riemann, Full };

    static JetSpec depth_spec(int n, Depth d) {
        switch (d) {
            case Depth::Metric: return {n, 0, 4, 4};
            case Depth::Spray: return {n, 1, 4, 5};
            case Depth::SprayDeep: return {n, 1, 5, 6};
            case Depth::Riemann: return {n, 2, 4, 6};
            case Depth::Full: return {n, 2, 6, 8};
        }
        throw EngineError("unhandled depth tier");
    }

    PointEval(const MetricField& field, const TangentSample& s, JetSpec spec)
        : field_(field), s_(s), spec_(spec) {
        spec_.validate();
        if (field.dim != s.n || spec_.n != s.n)
            throw ConfigError("metric, sample, and jet spec dimensions differ");
        jF_ = jet_of(field_, spec_, s_.x.data(), s_.y.data());
        if (!(jF_->value() > 0.0))
            throw DomainError("F not positive at sample");
        jF2_ = *jF_ * *jF_;
    }

    PointEval(const MetricField& field, const TangentSample& s,
              Depth d = Depth::Spray)
        : PointEval(field, s, depth_spec(s.n, d)) {}

    int n() const { return s_.n; }
    const TangentSample& sample() const { return s_; }
    const MetricField& field() const { return field_; }
    const Jet& F_jet() const { return *jF_; }
    const Jet& F2_jet() const { return *jF2_; }

    Jet ycoord(int k) const {
        return Jet::coordinate(spec_, true, k, s_.y[k]);
    }

    // ---- fundamental tensor -------------------------------------------------

    // g_ij = half the y-Hessian of F^2; positive definiteness is checked once
    // and guards the whole pipeline.
    const std::vector<Jet>& g_jets() {
        if (!g_) {
            std::vector<Jet> g;
            g.reserve(i2(n(), 0));
            std::vector<Jet> dF2(yderivs(*jF2_));
            for (int i = 0; i < n(); ++i)
                for (int j = 0; j < n(); ++j)
                    g.push_back(dF2[i].derivative(true, j) * 0.5);
            Mat v{};
            for (int i = 0; i < n(); ++i)
                for (int j = 0; j < n(); ++j)
                    v[i][j] = g[i2(i, j)].value();
            double ev = symmetric_min_eigenvalue(n(), v);
            if (!(ev > 0.0)) throw NotPositiveDefinite(ev);
            g_ = std::move(g);
        }
        return *g_;
    }

    const std::vector<Jet>& ginv_jets() {
        if (!ginv_) ginv_ = invert_matrix_jets(g_jets());
        return *ginv_;
    }

    TensorValue fundamental_tensor() {
        return pack(g_jets(), {Slot::Lower, Slot::Lower});
    }
    TensorValue inverse_metric() {
        return pack(ginv_jets(), {Slot::Upper, Slot::Upper});
    }

    // ---- Cartan torsion family ---------------------------------------------

    // C_ijk = quarter of the third y-derivative of F^2; A = F C.
    const std::vector<Jet>& C_low_jets() {
        if (!Clow_) {
            std::vector<Jet> c;
            c.reserve(i3(n(), 0, 0));
            std::vector<Jet> d1(yderivs(*jF2_));
            for (int i = 0; i < n(); ++i) {
                std::vector<Jet> d2(yderivs(d1[i]));
                for (int j = 0; j < n(); ++j)
                    for (int k = 0; k < n(); ++k)
                        c.push_back(d2[j].derivative(true, k) * 0.25);
            }
            Clow_ = std::move(c);
        }
        return *Clow_;
    }

    // C^i_jk = g^il C_ljk
    const std::vector<Jet>& C_up_jets() {
        if (!Cup_) Cup_ = raise_first(C_low_jets(), 3);
        return *Cup_;
    }

    // I_i = g^jk C_ijk
    const std::vector<Jet>& I_jets() {
        if (!I_) {
            const auto& c = C_low_jets();
            const auto& gi = ginv_jets();
            std::vector<Jet> out;
            out.reserve(n());
            for (int i = 0; i < n(); ++i) {
                Jet acc = zero();
                for (int j = 0; j < n(); ++j)
                    for (int k = 0; k < n(); ++k)
                        acc = acc + gi[i2(j, k)] * c[i3(i, j, k)];
                out.push_back(acc);
            }
            I_ = std::move(out);
        }
        return *I_;
    }

    struct CartanFamily {
        TensorValue A, C, C_up, C_mean_up, I;
    };

    CartanFamily cartan() {
        CartanFamily out;
        out.C = pack(C_low_jets(), {Slot::Lower, Slot::Lower, Slot::Lower});
        out.C_up = pack(C_up_jets(), {Slot::Upper, Slot::Lower, Slot::Lower});
        out.I = pack(I_jets(), {Slot::Lower});
        out.A = TensorValue(n(), {Slot::Lower, Slot::Lower, Slot::Lower});
        double F = jF_->value();
        for (std::size_t r = 0; r < out.C.data().size(); ++r)
            out.A.data()[r] = F * out.C.data()[r];
        // C^k = g^kl I_l: raising the mean torsion index
        out.C_mean_up = TensorValue(n(), {Slot::Upper});
        const auto& gi = ginv_jets();
        for (int k = 0; k < n(); ++k) {
            double acc = 0.0;
            for (int l = 0; l < n(); ++l)
                acc += gi[i2(k, l)].value() * out.I.data()[l];
            out.C_mean_up.data()[k] = acc;
        }
        return out;
    }

    struct CanonicalSection {
        TensorValue ell_up, ell_low;
    };

    // ell^i = y^i / F, ell_i = dF/dy^i; g(ell, ell) = 1 and A(.,.,ell) = 0.
    CanonicalSection canonical_section() {
        CanonicalSection out{TensorValue(n(), {Slot::Upper}),
                             TensorValue(n(), {Slot::Lower})};
        double F = jF_->value();
        for (int i = 0; i < n(); ++i) {
            out.ell_up.data()[i] = s_.y[i] / F;
            MultiIndex m;
            m.y[i] = 1;
            out.ell_low.data()[i] = jF_->partial(m);
        }
        return out;
    }

    // ---- spray and Berwald family ------------------------------------------

    // G^i = 1/4 g^il ( [F^2]_{x^k y^l} y^k - [F^2]_{x^l} )
    const std::vector<Jet>& spray_jets() {
        if (!G_) {
            const auto& gi = ginv_jets();
            std::vector<Jet> rhs;  // lower-index bracket
            rhs.reserve(n());
            for (int l = 0; l < n(); ++l) {
                Jet dyl = jF2_->derivative(true, l);
                Jet acc = zero();
                for (int k = 0; k < n(); ++k)
                    acc = acc + dyl.derivative(false, k) * ycoord(k);
                rhs.push_back(acc - jF2_->derivative(false, l));
            }
            std::vector<Jet> g;
            g.reserve(n());
            for (int i = 0; i < n(); ++i) {
                Jet acc = zero();
                for (int l = 0; l < n(); ++l)
                    acc = acc + gi[i2(i, l)] * rhs[l];
                g.push_back(acc * 0.25);
            }
            G_ = std::move(g);
        }
        return *G_;
    }

    // G^i_j, G^i_jk, B^i_jkl: successive vertical derivatives of the spray.
    const std::vector<Jet>& Gd_jets() {
        if (!Gd_) {
            std::vector<Jet> out;
            out.reserve(i2(n(), 0));
            for (int i = 0; i < n(); ++i) {
                std::vector<Jet> d(yderivs(spray_jets()[i]));
                for (int j = 0; j < n(); ++j) out.push_back(std::move(d[j]));
            }
            Gd_ = std::move(out);
        }
        return *Gd_;
    }

    const std::vector<Jet>& Gdd_jets() {
        if (!Gdd_) {
            std::vector<Jet> out;
            out.reserve(i3(n(), 0, 0));
            const auto& gd = Gd_jets();
            for (int i = 0; i < n(); ++i)
                for (int j = 0; j < n(); ++j) {
                    std::vector<Jet> d(yderivs(gd[i2(i, j)]));
                    for (int k = 0; k < n(); ++k) out.push_back(std::move(d[k]));
                }
            Gdd_ = std::move(out);
        }
        return *Gdd_;
    }

    const std::vector<Jet>& B_jets() {
        if (!B_) {
            std::vector<Jet> out;
            out.reserve(i4(n(), 0, 0, 0));
            const auto& gdd = Gdd_jets();
            for (int i = 0; i < n(); ++i)
                for (int j = 0; j < n(); ++j)
                    for (int k = 0; k < n(); ++k) {
                        std::vector<Jet> d(yderivs(gdd[i3(i, j, k)]));
                        for (int l = 0; l < n(); ++l)
                            out.push_back(std::move(d[l]));
                    }
            B_ = std::move(out);
        }
        return *B_;
    }

    TensorValue spray() { return pack(spray_jets(), {Slot::Upper}); }
    TensorValue nonlinear_connection() {
        return pack(Gd_jets(), {Slot::Upper, Slot::Lower});
    }
    TensorValue berwald_coeffs() {
        return pack(Gdd_jets(), {Slot::Upper, Slot::Lower, Slot::Lower});
    }
    TensorValue berwald_curvature() {
        return pack(B_jets(),
                    {Slot::Upper, Slot::Lower, Slot::Lower, Slot::Lower});
    }

    // ---- horizontal derivative and Cartan connection ------------------------

    // delta_k f = d_k f - G^s_k dy_s f
    Jet delta(const Jet& f, int k) {
        const auto& gd = Gd_jets();
        Jet acc = f.derivative(false, k);
        for (int ss = 0; ss < n(); ++ss)
            acc = acc - gd[i2(ss, k)] * f.derivative(true, ss);
        return acc;
    }

    // Gamma^i_jk = 1/2 g^il (delta_j g_lk + delta_k g_jl - delta_l g_jk)
    const std::vector<Jet>& gamma_jets() {
        if (!gamma_) {
            const auto& g = g_jets();
            const auto& gi = ginv_jets();
            // dg[j][l][k] = delta_j g_lk
            std::vector<Jet> dg;
            dg.reserve(i3(n(), 0, 0));
            for (int j = 0; j < n(); ++j)
                for (int l = 0; l < n(); ++l)
                    for (int k = 0; k < n(); ++k)
                        dg.push_back(delta(g[i2(l, k)], j));
            std::vector<Jet> out;
            out.reserve(i3(n(), 0, 0));
            for (int i = 0; i < n(); ++i)
                for (int j = 0; j < n(); ++j)
                    for (int k = 0; k < n(); ++k) {
                        Jet acc = zero();
                        for (int l = 0; l < n(); ++l)
                            acc = acc + gi[i2(i, l)] *
                                            (dg[i3(j, l, k)] + dg[i3(k, j, l)] -
                                             dg[i3(l, j, k)]);
                        out.push_back(acc * 0.5);
                    }
            gamma_ = std::move(out);
        }
        return *gamma_;
    }

    TensorValue cartan_coeffs() {
        return pack(gamma_jets(), {Slot::Upper, Slot::Lower, Slot::Lower});
    }

    // ---- covariant derivatives ---------------------------------------------

    // Horizontal covariant derivative, one extra lower slot appended.
    // cartan = true uses Gamma^i_jk, false uses the Berwald coefficients.
    JetTensor h_cov(const JetTensor& T, bool cartan_connection) {
        const auto& conn =
            cartan_connection ? gamma_jets() : Gdd_jets();
        return cov_impl(T, conn, /*vertical=*/false);
    }
    JetTensor cartan_h_cov(const JetTensor& T) { return h_cov(T, true); }
    JetTensor berwald_h_cov(const JetTensor& T) { return h_cov(T, false); }

    // Vertical Cartan derivative: dy_k plus C-corrections.
    JetTensor cartan_v_cov(const JetTensor& T) {
        return cov_impl(T, C_up_jets(), /*vertical=*/true);
    }

    // Contraction of the appended direction slot with y^k.  Because y^k enters
    // as a coordinate jet, later vertical derivatives still see it.
    JetTensor contract_last_with_y(const JetTensor& T) {
        JetTensor out{T.n, {T.variance.begin(), T.variance.end() - 1}, {}};
        std::size_t outer = T.comp.size() / n();
        out.comp.reserve(outer);
        for (std::size_t r = 0; r < outer; ++r) {
            Jet acc = zero();
            for (int k = 0; k < n(); ++k)
                acc = acc + T.comp[r * n() + k] * ycoord(k);
            out.comp.push_back(std::move(acc));
        }
        return out;
    }

    // nabla_0 = D_0 along the canonical section (the two coincide).
    JetTensor nabla0(const JetTensor& T, bool cartan_connection = true) {
        return contract_last_with_y(h_cov(T, cartan_connection));
    }

    JetTensor metric_jt() {
        return JetTensor{n(), {Slot::Lower, Slot::Lower}, g_jets()};
    }
    JetTensor cartan_jt() {
        return JetTensor{n(), {Slot::Lower, Slot::Lower, Slot::Lower},
                         C_low_jets()};
    }
    JetTensor mean_cartan_jt() { return JetTensor{n(), {Slot::Lower}, I_jets()}; }
    JetTensor scalar_jt(Jet j) { return JetTensor{n(), {}, {std::move(j)}}; }

    // ---- indexing helpers (public: shared with the curvature layer) --------

    int i2(int i, int j) const { return i * s_.n + j; }
    int i3(int i, int j, int k) const { return (i * s_.n + j) * s_.n + k; }
    int i4(int i, int j, int k, int l) const {
        return ((i * s_.n + j) * s_.n + k) * s_.n + l;
    }

    Jet zero() const { return Jet::constant(spec_, 0.0); }

    TensorValue pack(const std::vector<Jet>& comp,
                     std::vector<Slot> variance) const {
        TensorValue out(s_.n, std::move(variance));
        for (std::size_t r = 0; r < comp.size(); ++r)
            out.data()[r] = comp[r].value();
        return out;
    }

  private:
    std::vector<Jet> yderivs(const Jet& f) const {
        std::vector<Jet> out;
        out.reserve(s_.n);
        for (int i = 0; i < s_.n; ++i) out.push_back(f.derivative(true, i));
        return out;
    }

    // Gauss-Jordan over the jet ring; pivots on the constant part.
    std::vector<Jet> invert_matrix_jets(const std::vector<Jet>& a_in) {
        const int m = s_.n;
        std::vector<Jet> a = a_in;
        std::vector<Jet> inv;
        inv.reserve(i2(m, 0));
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                inv.push_back(Jet::constant(spec_, i == j ? 1.0 : 0.0));
        for (int col = 0; col < m; ++col) {
            int piv = col;
            for (int r = col + 1; r < m; ++r)
                if (std::abs(a[i2(r, col)].value()) >
                    std::abs(a[i2(piv, col)].value()))
                    piv = r;
            if (std::abs(a[i2(piv, col)].value()) < 1e-14)
                throw DomainError("fundamental tensor numerically singular");
            if (piv != col)
                for (int c = 0; c < m; ++c) {
                    std::swap(a[i2(piv, c)], a[i2(col, c)]);
                    std::swap(inv[i2(piv, c)], inv[i2(col, c)]);
                }
            Jet p = a[i2(col, col)];
            for (int c = 0; c < m; ++c) {
                a[i2(col, c)] = a[i2(col, c)] / p;
                inv[i2(col, c)] = inv[i2(col, c)] / p;
            }
            for (int r = 0; r < m; ++r) {
                if (r == col) continue;
                Jet f = a[i2(r, col)];
                if (f.max_abs_coefficient() == 0.0) continue;
                for (int c = 0; c < m; ++c) {
                    a[i2(r, c)] = a[i2(r, c)] - f * a[i2(col, c)];
                    inv[i2(r, c)] = inv[i2(r, c)] - f * inv[i2(col, c)];
                }
            }
        }
        return inv;
    }

    // Contract g^il into the first slot of a rank-r all-lower tensor.
    std::vector<Jet> raise_first(const std::vector<Jet>& t, int rank) {
        const auto& gi = ginv_jets();
        std::size_t inner = t.size() / s_.n;
        std::vector<Jet> out;
        out.reserve(t.size());
        for (int i = 0; i < s_.n; ++i)
            for (std::size_t r = 0; r < inner; ++r) {
                Jet acc = zero();
                for (int l = 0; l < s_.n; ++l)
                    acc = acc + gi[i2(i, l)] * t[l * inner + r];
                out.push_back(std::move(acc));
            }
        (void)rank;
        return out;
    }

    // Shared h/v covariant derivative.  conn is Gamma, G^i_jk, or C^i_jk; the
    // appended slot is the direction k.
    JetTensor cov_impl(const JetTensor& T, const std::vector<Jet>& conn,
                       bool vertical) {
        const int m = s_.n;
        JetTensor out{m, T.variance, {}};
        out.variance.push_back(Slot::Lower);
        out.comp.reserve(T.comp.size() * m);
        const int rank = T.rank();
        std::vector<int> idx(rank, 0);
        std::vector<std::size_t> stride(rank, 1);
        for (int a = rank - 2; a >= 0; --a) stride[a] = stride[a + 1] * m;
        for (std::size_t flat = 0; flat < T.comp.size(); ++flat) {
            {
                std::size_t rem = flat;
                for (int a = 0; a < rank; ++a) {
                    idx[a] = static_cast<int>(rem / stride[a]);
                    rem %= stride[a];
                }
            }
            for (int k = 0; k < m; ++k) {
                Jet acc = vertical ? T.comp[flat].derivative(true, k)
                                   : delta(T.comp[flat], k);
                for (int a = 0; a < rank; ++a) {
                    for (int r = 0; r < m; ++r) {
                        std::size_t nb = flat + (r - idx[a]) * stride[a];
                        const Jet& Tn = T.comp[nb];
                        if (T.variance[a] == Slot::Upper)
                            acc = acc + Tn * conn[i3(idx[a], r, k)];
                        else
                            acc = acc - Tn * conn[i3(r, idx[a], k)];
                    }
                }
                out.comp.push_back(std::move(acc));
            }
        }
        return out;
    }

    MetricField field_;
    TangentSample s_;
    JetSpec spec_;
    std::optional<Jet> jF_, jF2_;
    std::optional<std::vector<Jet>> g_, ginv_, Clow_, Cup_, I_;
    std::optional<std::vector<Jet>> G_, Gd_, Gdd_, B_, gamma_;
};

}  // namespace finsler
