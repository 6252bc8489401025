#pragma once

// Curvature layer.  The primary path for R^i_k is the spray-only formula; the
// Berwald and Cartan hh-curvatures are built from the connection jets and
// cross-checked against it through their y-contractions.  All horizontal
// derivatives are jet compositions inherited from PointEval::delta.

#include <optional>
#include <utility>
#include <vector>

#include "finsler/core.hpp"
#include "finsler/rng.hpp"

namespace finsler {

struct Flag {
    TangentSample base;
    Vec v{};
};

class CurvatureEval {
  public:
    explicit CurvatureEval(PointEval& pe) : pe_(pe) {}

    PointEval& point() { return pe_; }
    int n() const { return pe_.n(); }

    // R^i_k = 2 d_k G^i - y^j d_j dy_k G^i + 2 G^j dy_j dy_k G^i
    //         - dy_j G^i dy_k G^j
    const std::vector<Jet>& Rik_jets() {
        if (!Rik_) {
            const auto& G = pe_.spray_jets();
            const auto& Gd = pe_.Gd_jets();
            const auto& Gdd = pe_.Gdd_jets();
            std::vector<Jet> out;
            out.reserve(nn());
            for (int i = 0; i < n(); ++i)
                for (int k = 0; k < n(); ++k) {
                    Jet acc = G[i].derivative(false, k) * 2.0;
                    for (int j = 0; j < n(); ++j) {
                        acc = acc - Gd[pe_.i2(i, k)].derivative(false, j) *
                                        pe_.ycoord(j);
                        acc = acc + G[j] * Gdd[pe_.i3(i, k, j)] * 2.0;
                        acc = acc - Gd[pe_.i2(i, j)] * Gd[pe_.i2(j, k)];
                    }
                    out.push_back(std::move(acc));
                }
            Rik_ = std::move(out);
        }
        return *Rik_;
    }

    const Jet& ric_scalar_jet() {
        if (!ric_) {
            const auto& R = Rik_jets();
            Jet acc = pe_.zero();
            for (int i = 0; i < n(); ++i) acc = acc + R[pe_.i2(i, i)];
            ric_ = std::move(acc);
        }
        return *ric_;
    }

    TensorValue riemann_trace() {
        return pe_.pack(Rik_jets(), {Slot::Upper, Slot::Lower});
    }
    double ric_scalar() { return ric_scalar_jet().value(); }

    // Ric_ij = half the y-Hessian of the 2-homogeneous trace R^m_m.
    TensorValue ricci_lower() {
        const Jet& r = ric_scalar_jet();
        TensorValue out(n(), {Slot::Lower, Slot::Lower});
        for (int i = 0; i < n(); ++i)
            for (int j = 0; j < n(); ++j) {
                MultiIndex m;
                m.y[i] += 1;
                m.y[j] += 1;
                out(i, j) = 0.5 * r.partial(m);
            }
        return out;
    }

    // Berwald hh-curvature
    // K^i_jkl = delta_k G^i_jl - delta_l G^i_jk + G^r_jl G^i_rk - G^r_jk G^i_rl
    const std::vector<Jet>& K_jets() {
        if (!K_) {
            const auto& Gdd = pe_.Gdd_jets();
            std::vector<Jet> out;
            out.reserve(nn() * nn());
            for (int i = 0; i < n(); ++i)
                for (int j = 0; j < n(); ++j)
                    for (int k = 0; k < n(); ++k)
                        for (int l = 0; l < n(); ++l) {
                            Jet acc = pe_.delta(Gdd[pe_.i3(i, j, l)], k) -
                                      pe_.delta(Gdd[pe_.i3(i, j, k)], l);
                            for (int r = 0; r < n(); ++r)
                                acc = acc +
                                      Gdd[pe_.i3(r, j, l)] * Gdd[pe_.i3(i, r, k)] -
                                      Gdd[pe_.i3(r, j, k)] * Gdd[pe_.i3(i, r, l)];
                            out.push_back(std::move(acc));
                        }
            K_ = std::move(out);
        }
        return *K_;
    }

    TensorValue berwald_hh() {
        return pe_.pack(K_jets(),
                        {Slot::Upper, Slot::Lower, Slot::Lower, Slot::Lower});
    }

    // K_jl = K^i_jil
    const std::vector<Jet>& K_trace_jets() {
        if (!Ktr_) {
            const auto& K = K_jets();
            std::vector<Jet> out;
            out.reserve(nn());
            for (int j = 0; j < n(); ++j)
                for (int l = 0; l < n(); ++l) {
                    Jet acc = pe_.zero();
                    for (int i = 0; i < n(); ++i)
                        acc = acc + K[pe_.i4(i, j, i, l)];
                    out.push_back(std::move(acc));
                }
            Ktr_ = std::move(out);
        }
        return *Ktr_;
    }

    TensorValue berwald_trace() {
        return pe_.pack(K_trace_jets(), {Slot::Lower, Slot::Lower});
    }

    // R~_ij = (K_ij + K_ji)/2
    TensorValue ricci_symmetrized() {
        TensorValue K = berwald_trace();
        TensorValue out(n(), {Slot::Lower, Slot::Lower});
        for (int i = 0; i < n(); ++i)
            for (int j = 0; j < n(); ++j)
                out(i, j) = 0.5 * (K(i, j) + K(j, i));
        return out;
    }

    // Cartan hh-curvature.  The delta-Gamma + Gamma-Gamma part T is computed
    // first; its y-contraction gives R^s_km without self-reference (the C-term
    // drops under y^j by Euler), then the C-term is added back.
    const std::vector<Jet>& cartan_T_jets() {
        if (!T_) {
            const auto& ga = pe_.gamma_jets();
            std::vector<Jet> out;
            out.reserve(nn() * nn());
            for (int i = 0; i < n(); ++i)
                for (int j = 0; j < n(); ++j)
                    for (int k = 0; k < n(); ++k)
                        for (int m = 0; m < n(); ++m) {
                            Jet acc = pe_.delta(ga[pe_.i3(i, j, m)], k) -
                                      pe_.delta(ga[pe_.i3(i, j, k)], m);
                            for (int r = 0; r < n(); ++r)
                                acc = acc +
                                      ga[pe_.i3(r, j, m)] * ga[pe_.i3(i, r, k)] -
                                      ga[pe_.i3(r, j, k)] * ga[pe_.i3(i, r, m)];
                            out.push_back(std::move(acc));
                        }
            T_ = std::move(out);
        }
        return *T_;
    }

    // R^s_km = y^j T^s_jkm
    const std::vector<Jet>& cartan_R_jets() {
        if (!Rkm_) {
            const auto& T = cartan_T_jets();
            std::vector<Jet> out;
            out.reserve(n() * nn());
            for (int s = 0; s < n(); ++s)
                for (int k = 0; k < n(); ++k)
                    for (int m = 0; m < n(); ++m) {
                        Jet acc = pe_.zero();
                        for (int j = 0; j < n(); ++j)
                            acc = acc + pe_.ycoord(j) * T[pe_.i4(s, j, k, m)];
                        out.push_back(std::move(acc));
                    }
            Rkm_ = std::move(out);
        }
        return *Rkm_;
    }

    // R^i_jkm = T^i_jkm + R^s_km C^i_sj
    const std::vector<Jet>& cartan_hh_jets() {
        if (!Rhh_) {
            const auto& T = cartan_T_jets();
            const auto& R = cartan_R_jets();
            const auto& Cu = pe_.C_up_jets();
            std::vector<Jet> out;
            out.reserve(nn() * nn());
            for (int i = 0; i < n(); ++i)
                for (int j = 0; j < n(); ++j)
                    for (int k = 0; k < n(); ++k)
                        for (int m = 0; m < n(); ++m) {
                            Jet acc = T[pe_.i4(i, j, k, m)];
                            for (int s = 0; s < n(); ++s)
                                acc = acc +
                                      R[pe_.i3(s, k, m)] * Cu[pe_.i3(i, s, j)];
                            out.push_back(std::move(acc));
                        }
            Rhh_ = std::move(out);
        }
        return *Rhh_;
    }

    TensorValue cartan_hh() {
        return pe_.pack(cartan_hh_jets(),
                        {Slot::Upper, Slot::Lower, Slot::Lower, Slot::Lower});
    }

    // P^i_jkl = nabla^i C_kjl - nabla_j C^i_kl + C^i_kr nabla_0 C^r_jl
    //           - C^r_kj nabla_0 C^i_rl
    TensorValue P_tensor() {
        JetTensor dC_low = pe_.cartan_h_cov(pe_.cartan_jt());  // (C_kjl)_s
        JetTensor C_up_jt{n(), {Slot::Upper, Slot::Lower, Slot::Lower},
                          pe_.C_up_jets()};
        JetTensor dC_up = pe_.cartan_h_cov(C_up_jt);           // (C^i_kl)_j
        JetTensor d0C_up = pe_.contract_last_with_y(dC_up);    // nabla_0 C^i_kl
        const auto& gi = pe_.ginv_jets();
        const auto& Cu = pe_.C_up_jets();
        TensorValue out(n(), {Slot::Upper, Slot::Lower, Slot::Lower, Slot::Lower});
        for (int i = 0; i < n(); ++i)
            for (int j = 0; j < n(); ++j)
                for (int k = 0; k < n(); ++k)
                    for (int l = 0; l < n(); ++l) {
                        double acc = 0.0;
                        for (int s = 0; s < n(); ++s)
                            acc += gi[pe_.i2(i, s)].value() *
                                   dC_low.comp[pe_.i4(k, j, l, s)].value();
                        acc -= dC_up.comp[pe_.i4(i, k, l, j)].value();
                        for (int r = 0; r < n(); ++r) {
                            acc += Cu[pe_.i3(i, k, r)].value() *
                                   d0C_up.comp[pe_.i3(r, j, l)].value();
                            acc -= Cu[pe_.i3(r, k, j)].value() *
                                   d0C_up.comp[pe_.i3(i, r, l)].value();
                        }
                        out(i, j, k, l) = acc;
                    }
        return out;
    }

    // Q^i_jkl = C^i_lr C^r_jk - C^i_rk C^r_jl
    TensorValue Q_tensor() {
        const auto& Cu = pe_.C_up_jets();
        TensorValue out(n(), {Slot::Upper, Slot::Lower, Slot::Lower, Slot::Lower});
        for (int i = 0; i < n(); ++i)
            for (int j = 0; j < n(); ++j)
                for (int k = 0; k < n(); ++k)
                    for (int l = 0; l < n(); ++l) {
                        double acc = 0.0;
                        for (int r = 0; r < n(); ++r)
                            acc += Cu[pe_.i3(i, l, r)].value() *
                                       Cu[pe_.i3(r, j, k)].value() -
                                   Cu[pe_.i3(i, r, k)].value() *
                                       Cu[pe_.i3(r, j, l)].value();
                        out(i, j, k, l) = acc;
                    }
        return out;
    }

    // K(P,y) = g(R_y v, v) / (g(y,y) g(v,v) - g(y,v)^2)
    double flag_curvature(const Vec& v) {
        TensorValue g = pe_.fundamental_tensor();
        const TangentSample& s = pe_.sample();
        double gyy = 0.0, gvv = 0.0, gyv = 0.0;
        for (int i = 0; i < n(); ++i)
            for (int j = 0; j < n(); ++j) {
                gyy += g(i, j) * s.y[i] * s.y[j];
                gvv += g(i, j) * v[i] * v[j];
                gyv += g(i, j) * s.y[i] * v[j];
            }
        double denom = gyy * gvv - gyv * gyv;
        if (!(denom > 1e-10 * gyy * gvv))
            throw DegenerateFlag("flag plane numerically degenerate");
        TensorValue R = riemann_trace();
        double num = 0.0;
        for (int i = 0; i < n(); ++i)
            for (int j = 0; j < n(); ++j) {
                double Rv = 0.0;
                for (int k = 0; k < n(); ++k) Rv += R(i, k) * v[k];
                num += g(i, j) * Rv * v[j];
            }
        return num / denom;
    }

    // Residual of
    // nabla_k nabla_l Psi^i - nabla_l nabla_k Psi^i
    //   = Psi^r R^i_rkl - (vcov_r Psi^i) R^r_0kl - (nabla_r Psi^i) S^r_kl
    // with S^r_kl = C^r_kl - C^r_lk (identically zero, kept in the formula).
    TensorValue ricci_identity_residual(const std::vector<Jet>& psi_up) {
        JetTensor psi{n(), {Slot::Upper}, psi_up};
        JetTensor d1 = pe_.cartan_h_cov(psi);   // (Psi^i)_l
        JetTensor d2 = pe_.cartan_h_cov(d1);    // ((Psi^i)_l)_k
        JetTensor dv = pe_.cartan_v_cov(psi);   // vertical derivative
        const auto& Rhh = cartan_hh_jets();
        const auto& R = cartan_R_jets();
        const auto& Cu = pe_.C_up_jets();
        TensorValue out(n(), {Slot::Upper, Slot::Lower, Slot::Lower});
        for (int i = 0; i < n(); ++i)
            for (int k = 0; k < n(); ++k)
                for (int l = 0; l < n(); ++l) {
                    double lhs = d2.comp[pe_.i3(i, l, k)].value() -
                                 d2.comp[pe_.i3(i, k, l)].value();
                    double rhs = 0.0;
                    for (int r = 0; r < n(); ++r) {
                        rhs += psi_up[r].value() *
                               Rhh[pe_.i4(i, r, k, l)].value();
                        rhs -= dv.comp[pe_.i2(i, r)].value() *
                               R[pe_.i3(r, k, l)].value();
                        double S_rkl = Cu[pe_.i3(r, k, l)].value() -
                                       Cu[pe_.i3(r, l, k)].value();
                        rhs -= d1.comp[pe_.i2(i, r)].value() * S_rkl;
                    }
                    out(i, k, l) = lhs - rhs;
                }
        return out;
    }

    // Residual of D_m D_k psi - D_k D_m psi = K^r_0km dy_r psi for a
    // 1-homogeneous scalar psi.
    TensorValue berwald_commutation_residual(const Jet& psi) {
        JetTensor sc{n(), {}, {psi}};
        JetTensor d1 = pe_.berwald_h_cov(sc);
        JetTensor d2 = pe_.berwald_h_cov(d1);
        const auto& K = K_jets();
        TensorValue out(n(), {Slot::Lower, Slot::Lower});
        for (int k = 0; k < n(); ++k)
            for (int m = 0; m < n(); ++m) {
                double lhs = d2.comp[pe_.i2(k, m)].value() -
                             d2.comp[pe_.i2(m, k)].value();
                double rhs = 0.0;
                for (int r = 0; r < n(); ++r) {
                    double K_r0km = 0.0;
                    for (int j = 0; j < n(); ++j)
                        K_r0km += s_y(j) * K[pe_.i4(r, j, k, m)].value();
                    rhs += K_r0km * psi.derivative(true, r).value();
                }
                out(k, m) = lhs - rhs;
            }
        return out;
    }

  private:
    int nn() const { return n() * n(); }
    double s_y(int j) const { return pe_.sample().y[j]; }

    PointEval& pe_;
    std::optional<std::vector<Jet>> Rik_, K_, Ktr_, T_, Rkm_, Rhh_;
    std::optional<Jet> ric_;
};

// Random flag transverse vector: unit-box draw rejected until well-conditioned.
inline Vec draw_flag_vector(PointEval& pe, Rng& rng) {
    const TangentSample& s = pe.sample();
    TensorValue g = pe.fundamental_tensor();
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Vec v{};
        for (int i = 0; i < pe.n(); ++i) v[i] = rng.uniform(-1.0, 1.0);
        double gyy = 0.0, gvv = 0.0, gyv = 0.0;
        for (int i = 0; i < pe.n(); ++i)
            for (int j = 0; j < pe.n(); ++j) {
                gyy += g(i, j) * s.y[i] * s.y[j];
                gvv += g(i, j) * v[i] * v[j];
                gyv += g(i, j) * s.y[i] * v[j];
            }
        if (gvv < 1e-4) continue;
        if (gyy * gvv - gyv * gyv > 1e-2 * gyy * gvv) return v;
    }
    throw DegenerateFlag("could not draw a non-degenerate flag vector");
}

}  // namespace finsler
