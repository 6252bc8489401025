#pragma once

// Lie derivatives along complete lifts of base vector fields, computed on two
// fully independent paths:
//
//   flow path   pull the object back through the time-t flow of X (joint RK4
//               integration of the point, its Jacobian and its Hessian) and
//               differentiate in t with a 4-point stencil plus one Richardson
//               step (6th order in the stencil scale).
//   jet path    expand the bracket formulas in the ambient jet algebra at the
//               sample; x- or y-derivatives beyond the jet capacity are taken
//               by O(h^4) central differences of per-node jet-exact values.
//
// The projective factor Psi is extracted from the spray bracket by the Euler
// contraction Psi = (1/(n+1)) dy_i(lie G^i), which inverts lie G^i = Psi y^i
// whenever the field is projective.  The classifier and the verification
// suites below always compare one flow-path quantity against one jet-path
// quantity, so an agreement is never a tautology.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "finsler/catalog.hpp"
#include "finsler/core.hpp"
#include "finsler/curvature.hpp"
#include "finsler/errors.hpp"
#include "finsler/expr.hpp"
#include "finsler/jet.hpp"
#include "finsler/nonriem.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

// ---------------------------------------------------------------------------
// Complete lift

// Lift of a base vector field to the tangent bundle.  The vertical part
// Y^i = y^k dX^i/dx^k is 1-homogeneous in y, which is exactly the statement
// that the lift commutes with the Liouville field.
struct LiftedField {
    VectorFieldExpr base;

    Vec vertical(const Vec& x, const Vec& y) const {
        const int n = base.dim;
        JetSpec spec{n, 1, 0, 1};
        Vec out{};
        Vec ydummy{};
        for (int i = 0; i < n; ++i) {
            Jet j = jet_of(base.comps[i], spec, x.data(), ydummy.data());
            for (int k = 0; k < n; ++k)
                out[i] += y[k] * j.partial(MultiIndex::dx(k));
        }
        return out;
    }
};

inline LiftedField complete_lift(VectorFieldExpr X) {
    return LiftedField{std::move(X)};
}

// ---------------------------------------------------------------------------
// Flow maps with first and second variations

// Time-t flow of X started at x, together with the Jacobian J = dPhi_t/dx and
// the symmetric Hessian blocks hess[a](j,k) = d^2 Phi^a / dx^j dx^k.  The
// three are integrated jointly, so J and hess are the exact variations of the
// integrated map up to RK4 truncation.
struct FlowMap {
    Vec x{};
    Mat jac{};
    Mat jac_inv{};
    std::array<Mat, kMaxDim> hess{};

    Vec push_tangent(const Vec& y, int n) const {
        Vec out{};
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) out[i] += jac[i][j] * y[j];
        return out;
    }
};

namespace detail {

struct FlowState {
    Vec x{};
    Mat J{};
    std::array<Mat, kMaxDim> H{};
};

inline FlowState flow_axpy(const FlowState& s, double a, const FlowState& d,
                           int n) {
    FlowState out = s;
    for (int i = 0; i < n; ++i) {
        out.x[i] += a * d.x[i];
        for (int j = 0; j < n; ++j) {
            out.J[i][j] += a * d.J[i][j];
            for (int k = 0; k < n; ++k) out.H[i][j][k] += a * d.H[i][j][k];
        }
    }
    return out;
}

}  // namespace detail

inline FlowMap flow_map(const VectorFieldExpr& X, const Vec& x0, double t,
                        int steps = 8) {
    const int n = X.dim;
    if (steps < 1) throw ConfigError("flow map needs at least one step");
    JetSpec spec{n, 2, 0, 2};
    Vec ydummy{};

    auto rhs = [&](const detail::FlowState& s) {
        Mat A{};
        std::array<Mat, kMaxDim> S{};
        detail::FlowState d{};
        for (int a = 0; a < n; ++a) {
            Jet j = jet_of(X.comps[a], spec, s.x.data(), ydummy.data());
            d.x[a] = j.value();
            for (int b = 0; b < n; ++b) {
                A[a][b] = j.partial(MultiIndex::dx(b));
                for (int c = 0; c < n; ++c) {
                    MultiIndex m = MultiIndex::dx(b);
                    m.x[c] += 1;
                    S[a][b][c] = j.partial(m);
                }
            }
        }
        for (int a = 0; a < n; ++a)
            for (int j = 0; j < n; ++j) {
                for (int b = 0; b < n; ++b) d.J[a][j] += A[a][b] * s.J[b][j];
                for (int k = 0; k < n; ++k) {
                    double acc = 0.0;
                    for (int b = 0; b < n; ++b) {
                        acc += A[a][b] * s.H[b][j][k];
                        for (int c = 0; c < n; ++c)
                            acc += S[a][b][c] * s.J[b][j] * s.J[c][k];
                    }
                    d.H[a][j][k] += acc;
                }
            }
        return d;
    };

    detail::FlowState s{};
    s.x = x0;
    for (int i = 0; i < n; ++i) s.J[i][i] = 1.0;
    const double dt = t / steps;
    for (int step = 0; step < steps; ++step) {
        auto k1 = rhs(s);
        auto k2 = rhs(detail::flow_axpy(s, 0.5 * dt, k1, n));
        auto k3 = rhs(detail::flow_axpy(s, 0.5 * dt, k2, n));
        auto k4 = rhs(detail::flow_axpy(s, dt, k3, n));
        detail::FlowState acc = detail::flow_axpy(s, dt / 6.0, k1, n);
        acc = detail::flow_axpy(acc, dt / 3.0, k2, n);
        acc = detail::flow_axpy(acc, dt / 3.0, k3, n);
        s = detail::flow_axpy(acc, dt / 6.0, k4, n);
    }

    FlowMap out;
    out.x = s.x;
    out.jac = s.J;
    out.hess = s.H;
    out.jac_inv = matrix_inverse(n, s.J);
    return out;
}

// ---------------------------------------------------------------------------
// Flow-pullback Lie differentiation

struct FlowLie {
    TensorValue value;
    double error_estimate = 0.0;
};

namespace detail {

// Variance-aware pullback of component values through a flow map: one Jacobian
// factor per lower slot, one inverse factor per upper slot.
inline TensorValue pull_back_components(const TensorValue& T, const FlowMap& fm,
                                        int n) {
    const int rank = T.rank();
    TensorValue out = T;
    if (rank == 0) return out;
    std::vector<std::size_t> stride(rank, 1);
    for (int a = rank - 2; a >= 0; --a) stride[a] = stride[a + 1] * n;
    std::vector<int> oi(rank, 0), ai(rank, 0);
    for (std::size_t fo = 0; fo < out.data().size(); ++fo) {
        {
            std::size_t rem = fo;
            for (int a = 0; a < rank; ++a) {
                oi[a] = static_cast<int>(rem / stride[a]);
                rem %= stride[a];
            }
        }
        double acc = 0.0;
        std::fill(ai.begin(), ai.end(), 0);
        while (true) {
            std::size_t fi = 0;
            double w = 1.0;
            for (int a = 0; a < rank; ++a) {
                fi += ai[a] * stride[a];
                w *= T.variance(a) == Slot::Upper ? fm.jac_inv[oi[a]][ai[a]]
                                                  : fm.jac[ai[a]][oi[a]];
            }
            acc += w * T.data()[fi];
            int a = rank - 1;
            while (a >= 0 && ++ai[a] == n) ai[a--] = 0;
            if (a < 0) break;
        }
        out.data()[fo] = acc;
    }
    return out;
}

// Six pulls at t in {±h/2, ±h, ±2h}: two 4-point first-derivative stencils at
// scales h and h/2, one Richardson step across them.
template <class PullFn>
inline FlowLie stencil_lie(PullFn&& pull, double h) {
    TensorValue pm2 = pull(-2.0 * h), pm1 = pull(-h), pmh = pull(-0.5 * h);
    TensorValue pph = pull(0.5 * h), pp1 = pull(h), pp2 = pull(2.0 * h);
    auto stencil = [](const TensorValue& a, const TensorValue& b,
                      const TensorValue& c, const TensorValue& d, double step) {
        TensorValue out = a;
        for (std::size_t r = 0; r < out.data().size(); ++r)
            out.data()[r] = (a.data()[r] - 8.0 * b.data()[r] +
                             8.0 * c.data()[r] - d.data()[r]) /
                            (12.0 * step);
        return out;
    };
    TensorValue d1 = stencil(pm2, pm1, pp1, pp2, h);
    TensorValue d2 = stencil(pm1, pmh, pph, pp1, 0.5 * h);
    FlowLie out;
    out.value = d1;
    double scale = 0.0;
    for (std::size_t r = 0; r < d1.data().size(); ++r) {
        out.value.data()[r] = (16.0 * d2.data()[r] - d1.data()[r]) / 15.0;
        out.error_estimate = std::max(
            out.error_estimate, std::abs(d2.data()[r] - d1.data()[r]) / 15.0);
        scale = std::max(scale, std::abs(out.value.data()[r]));
    }
    if (out.error_estimate > 1e-2 * (1.0 + scale))
        throw ExtrapolationDiverged(
            "flow-derivative Richardson step did not contract (estimate " +
            std::to_string(out.error_estimate) + ")");
    return out;
}

}  // namespace detail

// Lie derivative of a tensor-valued quantity along the complete lift of X.
// `object` evaluates the quantity at an arbitrary accepted point; `depth` is
// the evaluation depth it needs.  Domain exits of the flow report as
// FlowLeftDomain.
inline FlowLie flow_lie_tensor(
    const MetricField& m, const VectorFieldExpr& X, const TangentSample& s,
    PointEval::Depth depth,
    const std::function<TensorValue(PointEval&)>& object, double h = 1e-3) {
    const int n = m.dim;
    auto pull = [&](double t) {
        FlowMap fm = flow_map(X, s.x, t);
        TangentSample sp;
        sp.n = n;
        sp.x = fm.x;
        sp.y = fm.push_tangent(s.y, n);
        sp.margin = domain_margin(m, fm.x);
        PointEval pe(m, sp, depth);
        return detail::pull_back_components(object(pe), fm, n);
    };
    try {
        return detail::stencil_lie(pull, h);
    } catch (const GuardViolation&) {
        throw FlowLeftDomain("flow of '" + X.label +
                             "' left the chart within the stencil window");
    }
}

// Lie derivative of the spray / nonlinear connection / connection
// coefficients / their vertical derivative (rank 0..3).  These are not
// tensors: the pullback carries the flow's Hessian in the usual inhomogeneous
// terms, which is what makes this path independent of the jet bracket.
inline FlowLie flow_lie_connection(const MetricField& m,
                                   const VectorFieldExpr& X,
                                   const TangentSample& s, int rank,
                                   double h = 1e-3) {
    if (rank < 0 || rank > 3)
        throw InvalidParameter("connection pullback rank must be 0..3");
    const int n = m.dim;
    auto pull = [&](double t) {
        FlowMap fm = flow_map(X, s.x, t);
        TangentSample sp;
        sp.n = n;
        sp.x = fm.x;
        sp.y = fm.push_tangent(s.y, n);
        sp.margin = domain_margin(m, fm.x);
        // rank 3 reads the third vertical derivative of the spray and needs
        // the deeper y budget
        PointEval pe(m, sp,
                     rank == 3 ? PointEval::Depth::SprayDeep
                               : PointEval::Depth::Spray);
        switch (rank) {
            case 0: {
                TensorValue out(n, {Slot::Upper});
                const auto& G = pe.spray_jets();
                for (int i = 0; i < n; ++i) {
                    double acc = 0.0;
                    for (int a = 0; a < n; ++a) {
                        double ha = 0.0;
                        for (int b = 0; b < n; ++b)
                            for (int c = 0; c < n; ++c)
                                ha += fm.hess[a][b][c] * s.y[b] * s.y[c];
                        acc += fm.jac_inv[i][a] * (G[a].value() + 0.5 * ha);
                    }
                    out(i) = acc;
                }
                return out;
            }
            case 1: {
                TensorValue out(n, {Slot::Upper, Slot::Lower});
                const auto& Gd = pe.Gd_jets();
                for (int i = 0; i < n; ++i)
                    for (int k = 0; k < n; ++k) {
                        double acc = 0.0;
                        for (int a = 0; a < n; ++a) {
                            double term = 0.0;
                            for (int b = 0; b < n; ++b)
                                term += Gd[pe.i2(a, b)].value() * fm.jac[b][k] +
                                        fm.hess[a][k][b] * s.y[b];
                            acc += fm.jac_inv[i][a] * term;
                        }
                        out(i, k) = acc;
                    }
                return out;
            }
            case 2: {
                TensorValue out(n, {Slot::Upper, Slot::Lower, Slot::Lower});
                const auto& Gdd = pe.Gdd_jets();
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        for (int k = 0; k < n; ++k) {
                            double acc = 0.0;
                            for (int a = 0; a < n; ++a) {
                                double term = fm.hess[a][j][k];
                                for (int b = 0; b < n; ++b)
                                    for (int c = 0; c < n; ++c)
                                        term += Gdd[pe.i3(a, b, c)].value() *
                                                fm.jac[b][j] * fm.jac[c][k];
                                acc += fm.jac_inv[i][a] * term;
                            }
                            out(i, j, k) = acc;
                        }
                return out;
            }
            default: {
                // the Hessian term is y-independent, so its third vertical
                // derivative drops and this rank transforms tensorially
                return detail::pull_back_components(pe.berwald_curvature(), fm,
                                                    n);
            }
        }
    };
    try {
        return detail::stencil_lie(pull, h);
    } catch (const GuardViolation&) {
        throw FlowLeftDomain("flow of '" + X.label +
                             "' left the chart within the stencil window");
    }
}

// ---------------------------------------------------------------------------
// Jet-path Lie derivatives

// Bracket-formula Lie derivatives in the ambient jet algebra of one
// evaluation.  Methods that need more derivative capacity than the host
// evaluation carries throw OrderOutOfSpec; the deepest catalogued tier
// supports everything here.
class SymmetryEval {
  public:
    SymmetryEval(PointEval& pe, const VectorFieldExpr& X) : pe_(pe), X_(X) {
        if (X.dim != pe.n())
            throw ConfigError("vector field dimension mismatch");
    }

    PointEval& point() { return pe_; }
    int n() const { return pe_.n(); }

    const std::vector<Jet>& X_jets() {
        if (!Xj_) {
            std::vector<Jet> out;
            out.reserve(n());
            JetSpec spec = pe_.F_jet().spec();
            const auto& s = pe_.sample();
            for (int i = 0; i < n(); ++i)
                out.push_back(jet_of(X_.comps[i], spec, s.x.data(), s.y.data()));
            Xj_ = std::move(out);
        }
        return *Xj_;
    }

    // vertical part of the complete lift, Y^i = y^k d_k X^i
    const std::vector<Jet>& Y_jets() {
        if (!Yj_) {
            std::vector<Jet> out;
            out.reserve(n());
            for (int i = 0; i < n(); ++i) {
                Jet acc = pe_.zero();
                for (int k = 0; k < n(); ++k)
                    acc = acc + pe_.ycoord(k) * X_jets()[i].derivative(false, k);
                out.push_back(std::move(acc));
            }
            Yj_ = std::move(out);
        }
        return *Yj_;
    }

    // lie G^i = X^r d_r G^i + Y^r dy_r G^i - G^r d_r X^i
    //           + 1/2 y^r y^s d_r d_s X^i
    const std::vector<Jet>& lie_spray_jets() {
        if (!lieG_) {
            const auto& G = pe_.spray_jets();
            const auto& X = X_jets();
            const auto& Y = Y_jets();
            std::vector<Jet> out;
            out.reserve(n());
            for (int i = 0; i < n(); ++i) {
                Jet acc = pe_.zero();
                for (int r = 0; r < n(); ++r) {
                    acc = acc + X[r] * G[i].derivative(false, r);
                    acc = acc + Y[r] * G[i].derivative(true, r);
                    acc = acc - G[r] * X[i].derivative(false, r);
                    Jet dr = X[i].derivative(false, r);
                    for (int ss = 0; ss < n(); ++ss)
                        acc = acc + pe_.ycoord(r) * pe_.ycoord(ss) *
                                        dr.derivative(false, ss) * 0.5;
                }
                out.push_back(std::move(acc));
            }
            lieG_ = std::move(out);
        }
        return *lieG_;
    }

    // Psi = (1/(n+1)) dy_i (lie G^i): exact inverse of lie G = Psi y for
    // 1-homogeneous Psi.
    const Jet& psi_jet() {
        if (!psi_) {
            Jet acc = pe_.zero();
            for (int i = 0; i < n(); ++i)
                acc = acc + lie_spray_jets()[i].derivative(true, i);
            psi_ = acc / static_cast<double>(n() + 1);
        }
        return *psi_;
    }

    double projective_residual() {
        const auto& lg = lie_spray_jets();
        double psi = psi_jet().value();
        double num = 0.0, scale = 0.0;
        for (int i = 0; i < n(); ++i) {
            num = std::max(num,
                           std::abs(lg[i].value() - psi * pe_.sample().y[i]));
            scale = std::max(scale, std::abs(lg[i].value()));
        }
        return num / (1.0 + scale);
    }

    TensorValue psi_vertical() {
        TensorValue out(n(), {Slot::Lower});
        for (int k = 0; k < n(); ++k)
            out(k) = psi_jet().derivative(true, k).value();
        return out;
    }

    TensorValue psi_vertical2() {
        TensorValue out(n(), {Slot::Lower, Slot::Lower});
        std::vector<Jet> d1;
        for (int k = 0; k < n(); ++k)
            d1.push_back(psi_jet().derivative(true, k));
        for (int k = 0; k < n(); ++k)
            for (int j = 0; j < n(); ++j)
                out(k, j) = d1[k].derivative(true, j).value();
        return out;
    }

    double euler_residual() {
        double acc = 0.0;
        for (int k = 0; k < n(); ++k)
            acc += pe_.sample().y[k] * psi_jet().derivative(true, k).value();
        return std::abs(acc - psi_jet().value());
    }

    // nabla_j X^i (horizontal covariant derivative of the base field)
    const std::vector<Jet>& nabla_X_jets() {
        if (!nablaX_) {
            const auto& gamma = pe_.gamma_jets();
            const auto& X = X_jets();
            std::vector<Jet> out;
            out.reserve(n() * n());
            for (int i = 0; i < n(); ++i)
                for (int j = 0; j < n(); ++j) {
                    Jet acc = pe_.delta(X[i], j);
                    for (int r = 0; r < n(); ++r)
                        acc = acc + X[r] * gamma[pe_.i3(i, r, j)];
                    out.push_back(std::move(acc));
                }
            nablaX_ = std::move(out);
        }
        return *nablaX_;
    }

    const std::vector<Jet>& nabla0_X_jets() {
        if (!nabla0X_) {
            std::vector<Jet> out;
            out.reserve(n());
            for (int i = 0; i < n(); ++i) {
                Jet acc = pe_.zero();
                for (int j = 0; j < n(); ++j)
                    acc = acc + pe_.ycoord(j) * nabla_X_jets()[pe_.i2(i, j)];
                out.push_back(std::move(acc));
            }
            nabla0X_ = std::move(out);
        }
        return *nabla0X_;
    }

    // f = nabla_i X^i + I_i nabla_0 X^i: the divergence-type potential whose
    // vertical gradient is the Lie derivative of the mean Cartan form.
    const Jet& f_jet() {
        if (!f_) {
            Jet acc = pe_.zero();
            const auto& I = pe_.I_jets();
            for (int i = 0; i < n(); ++i) {
                acc = acc + nabla_X_jets()[pe_.i2(i, i)];
                acc = acc + I[i] * nabla0_X_jets()[i];
            }
            f_ = std::move(acc);
        }
        return *f_;
    }

    std::vector<Jet> f_vertical_jets() {
        std::vector<Jet> out;
        out.reserve(n());
        for (int k = 0; k < n(); ++k)
            out.push_back(f_jet().derivative(true, k));
        return out;
    }

    TensorValue f_vertical() {
        TensorValue out(n(), {Slot::Lower});
        for (int k = 0; k < n(); ++k)
            out(k) = f_jet().derivative(true, k).value();
        return out;
    }

    TensorValue nabla0_f_vertical() {
        JetTensor fv{n(), {Slot::Lower}, f_vertical_jets()};
        return pe_.nabla0(fv).values();
    }

    TensorValue nabla_f() {
        TensorValue out(n(), {Slot::Lower});
        for (int k = 0; k < n(); ++k)
            out(k) = pe_.delta(f_jet(), k).value();
        return out;
    }

    double nabla0_f() {
        double acc = 0.0;
        for (int k = 0; k < n(); ++k)
            acc += pe_.sample().y[k] * pe_.delta(f_jet(), k).value();
        return acc;
    }

    // Natural-coordinate Lie derivative of a d-tensor along the lift: drag
    // terms X d + Y dy plus one transformation term per slot.
    JetTensor lie_tensor_jets(const JetTensor& T) {
        const int m = n();
        const auto& X = X_jets();
        const auto& Y = Y_jets();
        JetTensor out{m, T.variance, {}};
        out.comp.reserve(T.comp.size());
        const int rank = T.rank();
        std::vector<std::size_t> stride(rank, 1);
        for (int a = rank - 2; a >= 0; --a) stride[a] = stride[a + 1] * m;
        std::vector<int> idx(rank, 0);
        for (std::size_t flat = 0; flat < T.comp.size(); ++flat) {
            {
                std::size_t rem = flat;
                for (int a = 0; a < rank; ++a) {
                    idx[a] = static_cast<int>(rem / stride[a]);
                    rem %= stride[a];
                }
            }
            Jet acc = pe_.zero();
            for (int r = 0; r < m; ++r) {
                acc = acc + X[r] * T.comp[flat].derivative(false, r);
                acc = acc + Y[r] * T.comp[flat].derivative(true, r);
            }
            for (int a = 0; a < rank; ++a)
                for (int r = 0; r < m; ++r) {
                    std::size_t nb = flat + (r - idx[a]) * stride[a];
                    if (T.variance[a] == Slot::Upper)
                        acc = acc - T.comp[nb] * X[idx[a]].derivative(false, r);
                    else
                        acc = acc + T.comp[nb] * X[r].derivative(false, idx[a]);
                }
            out.comp.push_back(std::move(acc));
        }
        return out;
    }

    TensorValue lie_metric() { return lie_tensor_jets(pe_.metric_jt()).values(); }

    // lie g_ij = nabla_i X_j + nabla_j X_i + 2 C_ijs nabla_0 X^s with the
    // index lowered by g; agrees with the drag-term form identically.
    TensorValue closed_form_lie_metric() {
        const auto& g = pe_.g_jets();
        const auto& X = X_jets();
        std::vector<Jet> Xlow;
        Xlow.reserve(n());
        for (int j = 0; j < n(); ++j) {
            Jet acc = pe_.zero();
            for (int k = 0; k < n(); ++k)
                acc = acc + g[pe_.i2(j, k)] * X[k];
            Xlow.push_back(std::move(acc));
        }
        JetTensor cov = pe_.cartan_h_cov(JetTensor{n(), {Slot::Lower}, Xlow});
        const auto& C = pe_.C_low_jets();
        TensorValue out(n(), {Slot::Lower, Slot::Lower});
        for (int i = 0; i < n(); ++i)
            for (int j = 0; j < n(); ++j) {
                double acc = cov.comp[pe_.i2(j, i)].value() +
                             cov.comp[pe_.i2(i, j)].value();
                for (int ss = 0; ss < n(); ++ss)
                    acc += 2.0 * C[pe_.i3(i, j, ss)].value() *
                           nabla0_X_jets()[ss].value();
                out(i, j) = acc;
            }
        return out;
    }

    // nabla_0 (lie g_ij) = 2 Psi g_ij + Psi_i y_j + Psi_j y_i for projective
    // fields: returned as the max-abs defect.
    double lie_metric_rate_residual() {
        JetTensor lg = lie_tensor_jets(pe_.metric_jt());
        TensorValue lhs = pe_.nabla0(lg).values();
        TensorValue g = pe_.fundamental_tensor();
        TensorValue p1 = psi_vertical();
        double psi = psi_jet().value();
        Vec ylow{};
        for (int j = 0; j < n(); ++j)
            for (int k = 0; k < n(); ++k)
                ylow[j] += g(j, k) * pe_.sample().y[k];
        double res = 0.0;
        for (int i = 0; i < n(); ++i)
            for (int j = 0; j < n(); ++j) {
                double rhs = 2.0 * psi * g(i, j) + p1(i) * ylow[j] +
                             p1(j) * ylow[i];
                res = std::max(res, std::abs(lhs(i, j) - rhs));
            }
        return res;
    }

  private:
    PointEval& pe_;
    const VectorFieldExpr& X_;
    std::optional<std::vector<Jet>> Xj_, Yj_, lieG_, nablaX_, nabla0X_;
    std::optional<Jet> psi_, f_;
};

// Spray bracket summary for one sample.
struct SprayLie {
    TensorValue lie_spray;
    double psi = 0.0;
    double residual = 0.0;
};

inline SprayLie lie_spray(const MetricField& m, const VectorFieldExpr& X,
                          const TangentSample& s) {
    PointEval pe(m, s, PointEval::Depth::Riemann);
    SymmetryEval se(pe, X);
    SprayLie out;
    out.lie_spray = TensorValue(m.dim, {Slot::Upper});
    for (int i = 0; i < m.dim; ++i)
        out.lie_spray(i) = se.lie_spray_jets()[i].value();
    out.psi = se.psi_jet().value();
    out.residual = se.projective_residual();
    return out;
}

// ---------------------------------------------------------------------------
// Finite-difference layers for Psi derivatives beyond the jet capacity

// x- and y-derivatives of the Psi family: O(h^4) central differences of
// per-node jet-exact values, steps shrunk to keep the stencil inside the
// guard.  The node evaluations are fresh, so these layers share nothing with
// the flow path.
class PsiDifferentials {
  public:
    PsiDifferentials(const MetricField& m, const VectorFieldExpr& X,
                     const TangentSample& s)
        : m_(m), X_(X), s_(s) {
        hx_ = 1e-3 * std::min(1.0, 0.25 * s.margin);
        double yscale = 0.0;
        for (int i = 0; i < s.n; ++i) yscale = std::max(yscale, std::abs(s.y[i]));
        hy_ = 1e-3 * std::max(1.0, yscale);
    }

    // (k, l) = d_k Psi_l
    const TensorValue& grad_psi_k() {
        if (!gp1_) {
            const int n = s_.n;
            TensorValue out(n, {Slot::Lower, Slot::Lower});
            for (int k = 0; k < n; ++k) {
                TensorValue d = fd4_x(k, /*deep=*/false);
                for (int l = 0; l < n; ++l) out(k, l) = d(l);
            }
            gp1_ = std::move(out);
        }
        return *gp1_;
    }

    // (m, k, j) = d_m Psi_{k.j}
    const TensorValue& grad_psi_kj() {
        if (!gp2_) {
            const int n = s_.n;
            TensorValue out(n, {Slot::Lower, Slot::Lower, Slot::Lower});
            for (int mdir = 0; mdir < n; ++mdir) {
                TensorValue d = fd4_x(mdir, /*deep=*/true);
                for (int k = 0; k < n; ++k)
                    for (int j = 0; j < n; ++j) out(mdir, k, j) = d(k, j);
            }
            gp2_ = std::move(out);
        }
        return *gp2_;
    }

    // (s, k, j) = dy_s Psi_{k.j}: the third vertical derivative of Psi,
    // totally symmetric.
    const TensorValue& vert_psi_kj() {
        if (!vp3_) {
            const int n = s_.n;
            TensorValue out(n, {Slot::Lower, Slot::Lower, Slot::Lower});
            for (int sdir = 0; sdir < n; ++sdir) {
                TensorValue d = fd4_y(sdir);
                for (int k = 0; k < n; ++k)
                    for (int j = 0; j < n; ++j) out(sdir, k, j) = d(k, j);
            }
            vp3_ = std::move(out);
        }
        return *vp3_;
    }

  private:
    TensorValue psi_k_at(const Vec& x, const Vec& y) {
        TangentSample sp;
        sp.n = s_.n;
        sp.x = x;
        sp.y = y;
        sp.margin = domain_margin(m_, x);
        // the vertical gradient of Psi needs the full-depth jet budget: the
        // spray bracket eats two x and three y orders before Psi_k is read
        PointEval pe(m_, sp, PointEval::Depth::Full);
        SymmetryEval se(pe, X_);
        return se.psi_vertical();
    }

    TensorValue psi_kj_at(const Vec& x, const Vec& y) {
        TangentSample sp;
        sp.n = s_.n;
        sp.x = x;
        sp.y = y;
        sp.margin = domain_margin(m_, x);
        PointEval pe(m_, sp, PointEval::Depth::Full);
        SymmetryEval se(pe, X_);
        return se.psi_vertical2();
    }

    TensorValue fd4_x(int dir, bool deep) {
        auto at = [&](double off) {
            Vec x = s_.x;
            x[dir] += off;
            return deep ? psi_kj_at(x, s_.y) : psi_k_at(x, s_.y);
        };
        return fd4(at, hx_);
    }

    TensorValue fd4_y(int dir) {
        auto at = [&](double off) {
            Vec y = s_.y;
            y[dir] += off;
            return psi_kj_at(s_.x, y);
        };
        return fd4(at, hy_);
    }

    template <class Fn>
    TensorValue fd4(Fn&& at, double h) {
        TensorValue f1 = at(-2.0 * h), f2 = at(-h), f3 = at(h), f4 = at(2.0 * h);
        TensorValue out = f1;
        for (std::size_t r = 0; r < out.data().size(); ++r)
            out.data()[r] = (f1.data()[r] - 8.0 * f2.data()[r] +
                             8.0 * f3.data()[r] - f4.data()[r]) /
                            (12.0 * h);
        return out;
    }

    const MetricField& m_;
    const VectorFieldExpr& X_;
    TangentSample s_;
    double hx_ = 0.0, hy_ = 0.0;
    std::optional<TensorValue> gp1_, gp2_, vp3_;
};

// ---------------------------------------------------------------------------
// Classifier

struct Verdict {
    bool pass = false;
    double residual = 0.0;
};

struct ClassificationReport {
    int samples_used = 0;
    double tolerance = 0.0;
    Verdict projective;              // spray bracket proportional to y
    Verdict affine;                  // projective with Psi = 0
    Verdict killing;                 // flow-path Lie derivative of g vanishes
    Verdict mean_cartan_invariant;   // vertical gradient of f vanishes
    Verdict mean_berwald_invariant;  // vertical Hessian of Psi vanishes
    Verdict psi_curl_free;           // nabla_k Psi_j - nabla_j Psi_k = 0
    Verdict psi_hessian_curl_free;   // nabla_l Psi_jk - nabla_k Psi_jl = 0
    double lie_metric_rate_residual = 0.0;  // consistency, projective only
    double euler_residual = 0.0;            // max |y^k Psi_k - Psi|
    std::vector<double> psi_values, f_values;
};

namespace detail {

// nabla_k Psi_j - nabla_j Psi_k with the horizontal connection: the symmetric
// connection coefficients cancel, leaving the delta-derivative curl.
inline double psi_curl_residual(PointEval& pe, SymmetryEval& se,
                                PsiDifferentials& fd) {
    const int n = pe.n();
    const TensorValue& dp = fd.grad_psi_k();
    TensorValue p2 = se.psi_vertical2();
    const auto& Gd = pe.Gd_jets();
    double res = 0.0;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) {
            double curl = dp(k, j) - dp(j, k);
            for (int ss = 0; ss < n; ++ss)
                curl += -Gd[pe.i2(ss, k)].value() * p2(j, ss) +
                        Gd[pe.i2(ss, j)].value() * p2(k, ss);
            res = std::max(res, std::abs(curl));
        }
    return res;
}

// nabla_l Psi_jk - nabla_k Psi_jl; the direction-slot connection term is
// symmetric and cancels, the j-slot corrections survive.
inline double psi_hessian_curl_residual(PointEval& pe, SymmetryEval& se,
                                        PsiDifferentials& fd) {
    const int n = pe.n();
    const TensorValue& dp2 = fd.grad_psi_kj();
    const TensorValue& vp3 = fd.vert_psi_kj();
    TensorValue p2 = se.psi_vertical2();
    const auto& Gd = pe.Gd_jets();
    const auto& gamma = pe.gamma_jets();
    auto nab = [&](int l, int j, int k) {
        double acc = dp2(l, j, k);
        for (int ss = 0; ss < n; ++ss) {
            acc -= Gd[pe.i2(ss, l)].value() * vp3(ss, j, k);
            acc -= gamma[pe.i3(ss, j, l)].value() * p2(ss, k);
            acc -= gamma[pe.i3(ss, k, l)].value() * p2(j, ss);
        }
        return acc;
    };
    double res = 0.0;
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l)
                res = std::max(res, std::abs(nab(l, j, k) - nab(k, j, l)));
    return res;
}

}  // namespace detail

inline ClassificationReport classify(const MetricField& m,
                                     const VectorFieldExpr& X,
                                     const std::vector<TangentSample>& samples,
                                     double tol = 1e-6) {
    if (samples.size() < 20)
        throw InsufficientSamples(
            "classification needs at least 20 accepted samples");
    ClassificationReport rep;
    rep.samples_used = static_cast<int>(samples.size());
    rep.tolerance = tol;

    double psi_scale = 0.0;
    for (const auto& s : samples) {
        PointEval pe(m, s, PointEval::Depth::Full);
        SymmetryEval se(pe, X);

        double pr = se.projective_residual();
        rep.projective.residual = std::max(rep.projective.residual, pr);
        double psi = se.psi_jet().value();
        rep.psi_values.push_back(psi);
        rep.f_values.push_back(se.f_jet().value());
        psi_scale = std::max(psi_scale, std::abs(psi) / pe.F_jet().value());
        rep.euler_residual = std::max(rep.euler_residual, se.euler_residual());

        FlowLie kg = flow_lie_tensor(
            m, X, s, PointEval::Depth::Metric,
            [](PointEval& p) { return p.fundamental_tensor(); });
        rep.killing.residual =
            std::max(rep.killing.residual, kg.value.max_abs());

        rep.mean_cartan_invariant.residual = std::max(
            rep.mean_cartan_invariant.residual, se.f_vertical().max_abs());
        rep.mean_berwald_invariant.residual = std::max(
            rep.mean_berwald_invariant.residual, se.psi_vertical2().max_abs());

        PsiDifferentials fd(m, X, s);
        rep.psi_curl_free.residual =
            std::max(rep.psi_curl_free.residual,
                     detail::psi_curl_residual(pe, se, fd));
        rep.psi_hessian_curl_free.residual =
            std::max(rep.psi_hessian_curl_free.residual,
                     detail::psi_hessian_curl_residual(pe, se, fd));

        if (pr <= tol)
            rep.lie_metric_rate_residual = std::max(
                rep.lie_metric_rate_residual, se.lie_metric_rate_residual());
    }

    rep.projective.pass = rep.projective.residual <= tol;
    rep.affine.residual = psi_scale;
    rep.affine.pass = rep.projective.pass && psi_scale <= tol;
    rep.killing.pass = rep.killing.residual <= tol;
    rep.mean_cartan_invariant.pass =
        rep.mean_cartan_invariant.residual <= tol;
    rep.mean_berwald_invariant.pass =
        rep.mean_berwald_invariant.residual <= tol;
    rep.psi_curl_free.pass = rep.psi_curl_free.residual <= tol;
    rep.psi_hessian_curl_free.pass =
        rep.psi_hessian_curl_free.residual <= tol;

    if (rep.affine.pass && !rep.projective.pass)
        throw EngineError("affine verdict without a projective verdict");
    if (rep.projective.pass && rep.mean_cartan_invariant.pass &&
        !rep.mean_berwald_invariant.pass)
        throw EngineError(
            "mean Cartan invariance must imply mean Berwald invariance");
    return rep;
}

// ---------------------------------------------------------------------------
// Verification suites

namespace detail {

inline TensorValue mean_berwald_values(PointEval& pe) {
    const int n = pe.n();
    const auto& B = pe.B_jets();
    TensorValue out(n, {Slot::Lower, Slot::Lower});
    for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                acc += B[pe.i4(i, j, i, l)].value();
            out(j, l) = 0.5 * acc;
        }
    return out;
}

// Berwald covariant derivative of the Psi gradient, (k, l) = D_k Psi_l,
// assembled from the FD gradient plus jet-exact connection corrections.
inline TensorValue berwald_d_psi(PointEval& pe, SymmetryEval& se,
                                 PsiDifferentials& fd) {
    const int n = pe.n();
    const TensorValue& dp = fd.grad_psi_k();
    TensorValue p1 = se.psi_vertical();
    TensorValue p2 = se.psi_vertical2();
    const auto& Gd = pe.Gd_jets();
    const auto& Gdd = pe.Gdd_jets();
    TensorValue out(n, {Slot::Lower, Slot::Lower});
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            double acc = dp(k, l);
            for (int ss = 0; ss < n; ++ss) {
                acc -= Gd[pe.i2(ss, k)].value() * p2(l, ss);
                acc -= Gdd[pe.i3(ss, l, k)].value() * p1(ss);
            }
            out(k, l) = acc;
        }
    return out;
}

// vertical derivative of the antisymmetrized D Psi: (k, l, j) = dy_j of
// (D_k Psi_l - D_l Psi_k)
inline TensorValue berwald_d_psi_vertical(PointEval& pe, SymmetryEval& se,
                                          PsiDifferentials& fd) {
    const int n = pe.n();
    const TensorValue& dp2 = fd.grad_psi_kj();
    const TensorValue& vp3 = fd.vert_psi_kj();
    TensorValue p1 = se.psi_vertical();
    TensorValue p2 = se.psi_vertical2();
    const auto& Gd = pe.Gd_jets();
    const auto& Gdd = pe.Gdd_jets();
    const auto& B = pe.B_jets();
    auto dvert = [&](int k, int l, int j) {
        double acc = dp2(k, l, j);
        for (int ss = 0; ss < n; ++ss) {
            acc -= Gdd[pe.i3(ss, k, j)].value() * p2(l, ss);
            acc -= Gd[pe.i2(ss, k)].value() * vp3(l, ss, j);
            acc -= B[pe.i4(ss, l, k, j)].value() * p1(ss);
            acc -= Gdd[pe.i3(ss, l, k)].value() * p2(ss, j);
        }
        return acc;
    };
    TensorValue out(n, {Slot::Lower, Slot::Lower, Slot::Lower});
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
            for (int j = 0; j < n; ++j)
                out(k, l, j) = dvert(k, l, j) - dvert(l, k, j);
    return out;
}

// y^i D_i Psi_{l.j} with the Berwald connection
inline TensorValue horizontal_rate_psi_vertical2(PointEval& pe,
                                                 SymmetryEval& se,
                                                 PsiDifferentials& fd) {
    const int n = pe.n();
    const TensorValue& dp2 = fd.grad_psi_kj();
    const TensorValue& vp3 = fd.vert_psi_kj();
    TensorValue p2 = se.psi_vertical2();
    const auto& G = pe.spray_jets();
    const auto& Gd = pe.Gd_jets();
    TensorValue out(n, {Slot::Lower, Slot::Lower});
    for (int l = 0; l < n; ++l)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                acc += pe.sample().y[i] * dp2(i, l, j);
            for (int ss = 0; ss < n; ++ss) {
                acc -= 2.0 * G[ss].value() * vp3(ss, l, j);
                acc -= Gd[pe.i2(ss, l)].value() * p2(ss, j);
                acc -= Gd[pe.i2(ss, j)].value() * p2(l, ss);
            }
            out(l, j) = acc;
        }
    return out;
}

}  // namespace detail

// Per-item max residuals of the nine two-path Lie-derivative identities:
//   1  lie G^i_k      = Psi_k y^i + Psi d^i_k
//   2  lie G^i_jk     = d^i_j Psi_k + d^i_k Psi_j + y^i Psi_{k.j}
//   3  lie B^i_jkl    = d^i_j Psi_{k.l} + d^i_k Psi_{j.l} + d^i_l Psi_{k.j}
//                       + y^i Psi_{k.j.l}
//   4  lie E_jl       = (n+1)/2 Psi_{j.l}
//   5  lie I_k        = f_{.k}
//   6  lie J_k        = nabla_0 f_{.k} + Psi I_k
//   7  (n+1) Psi_k    = nabla_k f + nabla_0 f_{.k}        (jet path only)
//   8  lie K^i_jkl    = d^i_j (D_k Psi_l - D_l Psi_k) + d^i_l D_k Psi_j
//                       - d^i_k D_l Psi_j + y^i (D_k Psi_l - D_l Psi_k)_{.j}
//   9  lie K_jl       = D_j Psi_l - n D_l Psi_j + y^i D_i Psi_{l.j}
// Left sides by flow pullback, right sides by the jet pipeline.
struct LieIdentityReport {
    std::array<double, 9> residual{};
    double projective_residual = 0.0;
    double psi_cross_residual = 0.0;  // Psi vs (1/(n+1)) nabla_0 f
    int samples = 0;
};

inline LieIdentityReport verify_lie_identities(
    const MetricField& m, const VectorFieldExpr& X,
    const std::vector<TangentSample>& samples, double h = 1e-3) {
    LieIdentityReport rep;
    rep.samples = static_cast<int>(samples.size());
    const int n = m.dim;
    auto bump = [&](int item, double v) {
        rep.residual[item - 1] = std::max(rep.residual[item - 1], v);
    };

    for (const auto& s : samples) {
        PointEval pe(m, s, PointEval::Depth::Full);
        SymmetryEval se(pe, X);
        double pr = se.projective_residual();
        rep.projective_residual = std::max(rep.projective_residual, pr);
        if (pr > 1e-5) throw NotProjective(pr);

        double psi = se.psi_jet().value();
        TensorValue p1 = se.psi_vertical();
        TensorValue p2 = se.psi_vertical2();
        PsiDifferentials fd(m, X, s);

        // 1
        {
            FlowLie lhs = flow_lie_connection(m, X, s, 1, h);
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < n; ++k) {
                    double rhs = p1(k) * s.y[i] + (i == k ? psi : 0.0);
                    bump(1, std::abs(lhs.value(i, k) - rhs));
                }
        }
        // 2
        {
            FlowLie lhs = flow_lie_connection(m, X, s, 2, h);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k) {
                        double rhs = (i == j ? p1(k) : 0.0) +
                                     (i == k ? p1(j) : 0.0) +
                                     s.y[i] * p2(k, j);
                        bump(2, std::abs(lhs.value(i, j, k) - rhs));
                    }
        }
        // 3
        {
            FlowLie lhs = flow_lie_connection(m, X, s, 3, h);
            const TensorValue& p3 = fd.vert_psi_kj();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k)
                        for (int l = 0; l < n; ++l) {
                            double rhs = (i == j ? p2(k, l) : 0.0) +
                                         (i == k ? p2(j, l) : 0.0) +
                                         (i == l ? p2(k, j) : 0.0) +
                                         s.y[i] * p3(k, j, l);
                            bump(3, std::abs(lhs.value(i, j, k, l) - rhs));
                        }
        }
        // 4
        {
            FlowLie lhs = flow_lie_tensor(m, X, s, PointEval::Depth::SprayDeep,
                                          detail::mean_berwald_values, h);
            for (int j = 0; j < n; ++j)
                for (int l = 0; l < n; ++l)
                    bump(4, std::abs(lhs.value(j, l) -
                                     0.5 * (n + 1) * p2(j, l)));
        }
        // 5
        {
            FlowLie lhs = flow_lie_tensor(
                m, X, s, PointEval::Depth::Metric,
                [](PointEval& p) { return p.cartan().I; }, h);
            TensorValue fv = se.f_vertical();
            for (int k = 0; k < n; ++k)
                bump(5, std::abs(lhs.value(k) - fv(k)));
        }
        // 6
        {
            FlowLie lhs = flow_lie_tensor(
                m, X, s, PointEval::Depth::Riemann,
                [](PointEval& p) {
                    NonRiemEval nr(p);
                    return nr.mean_landsberg();
                },
                h);
            TensorValue n0fv = se.nabla0_f_vertical();
            TensorValue I = pe.cartan().I;
            for (int k = 0; k < n; ++k)
                bump(6, std::abs(lhs.value(k) - (n0fv(k) + psi * I(k))));
        }
        // 7
        {
            TensorValue nf = se.nabla_f();
            TensorValue n0fv = se.nabla0_f_vertical();
            for (int k = 0; k < n; ++k)
                bump(7, std::abs((n + 1) * p1(k) - (nf(k) + n0fv(k))));
            rep.psi_cross_residual =
                std::max(rep.psi_cross_residual,
                         std::abs(psi - se.nabla0_f() / (n + 1)));
        }
        // 8
        {
            FlowLie lhs = flow_lie_tensor(
                m, X, s, PointEval::Depth::Full,
                [](PointEval& p) {
                    CurvatureEval cv(p);
                    return cv.berwald_hh();
                },
                h);
            TensorValue D = detail::berwald_d_psi(pe, se, fd);
            TensorValue Av = detail::berwald_d_psi_vertical(pe, se, fd);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k)
                        for (int l = 0; l < n; ++l) {
                            double rhs =
                                (i == j ? D(k, l) - D(l, k) : 0.0) +
                                (i == l ? D(k, j) : 0.0) -
                                (i == k ? D(l, j) : 0.0) + s.y[i] * Av(k, l, j);
                            bump(8, std::abs(lhs.value(i, j, k, l) - rhs));
                        }
        }
        // 9
        {
            FlowLie lhs = flow_lie_tensor(
                m, X, s, PointEval::Depth::Full,
                [](PointEval& p) {
                    CurvatureEval cv(p);
                    return cv.berwald_trace();
                },
                h);
            TensorValue D = detail::berwald_d_psi(pe, se, fd);
            TensorValue rate =
                detail::horizontal_rate_psi_vertical2(pe, se, fd);
            for (int j = 0; j < n; ++j)
                for (int l = 0; l < n; ++l) {
                    double rhs = D(j, l) - n * D(l, j) + rate(l, j);
                    bump(9, std::abs(lhs.value(j, l) - rhs));
                }
        }
    }
    return rep;
}

// Flow-path Lie derivatives of the mean Berwald curvature, its horizontal
// rate, and the Berwald curvature: all three must vanish for a projective
// field that preserves the mean Cartan form.
struct InvarianceTransferReport {
    double lie_mean_berwald = 0.0;
    double lie_h_curvature = 0.0;
    double lie_berwald = 0.0;
    int samples = 0;
};

inline InvarianceTransferReport verify_invariance_transfer(
    const MetricField& m, const VectorFieldExpr& X,
    const std::vector<TangentSample>& samples, double h = 1e-3) {
    InvarianceTransferReport rep;
    rep.samples = static_cast<int>(samples.size());
    for (const auto& s : samples) {
        PointEval pe(m, s, PointEval::Depth::Full);
        SymmetryEval se(pe, X);
        double pr = se.projective_residual();
        if (pr > 1e-5) throw NotProjective(pr);
        double fr = se.f_vertical().max_abs();
        if (fr > 1e-5) throw NotIInvariant(fr);

        FlowLie le = flow_lie_tensor(m, X, s, PointEval::Depth::SprayDeep,
                                     detail::mean_berwald_values, h);
        rep.lie_mean_berwald =
            std::max(rep.lie_mean_berwald, le.value.max_abs());

        FlowLie lh = flow_lie_tensor(
            m, X, s, PointEval::Depth::Full,
            [](PointEval& p) {
                NonRiemEval nr(p);
                return nr.h_curvature();
            },
            h);
        rep.lie_h_curvature = std::max(rep.lie_h_curvature, lh.value.max_abs());

        FlowLie lb = flow_lie_connection(m, X, s, 3, h);
        rep.lie_berwald = std::max(rep.lie_berwald, lb.value.max_abs());
    }
    return rep;
}

// Flow-path Lie derivatives of the two Ricci tensors (the vertical-Hessian
// one and the symmetrized-trace one) agree along fields that pass the
// invariance-transfer preconditions.
struct RicciCompareReport {
    double residual = 0.0;
    double lie_ricci_max = 0.0;
    double lie_symmetrized_max = 0.0;
    int samples = 0;
};

inline RicciCompareReport lie_ricci_compare(
    const MetricField& m, const VectorFieldExpr& X,
    const std::vector<TangentSample>& samples, double h = 1e-3) {
    RicciCompareReport rep;
    rep.samples = static_cast<int>(samples.size());
    for (const auto& s : samples) {
        PointEval pe(m, s, PointEval::Depth::Full);
        SymmetryEval se(pe, X);
        double pr = se.projective_residual();
        if (pr > 1e-5) throw NotProjective(pr);
        double fr = se.f_vertical().max_abs();
        if (fr > 1e-5) throw NotIInvariant(fr);

        // the vertical-Hessian route needs full depth; the trace route below
        // is fine one tier down
        FlowLie lric = flow_lie_tensor(
            m, X, s, PointEval::Depth::Full,
            [](PointEval& p) {
                CurvatureEval cv(p);
                return cv.ricci_lower();
            },
            h);
        FlowLie lsym = flow_lie_tensor(
            m, X, s, PointEval::Depth::Full,
            [](PointEval& p) {
                CurvatureEval cv(p);
                return cv.ricci_symmetrized();
            },
            h);
        rep.lie_ricci_max = std::max(rep.lie_ricci_max, lric.value.max_abs());
        rep.lie_symmetrized_max =
            std::max(rep.lie_symmetrized_max, lsym.value.max_abs());
        rep.residual = std::max(
            rep.residual, max_abs_diff(lric.value, lsym.value));
    }
    return rep;
}

// Horizontal codifferential of the lowered field, two routes: the Cartan
// route carries the mean-torsion correction, the Berwald route is a plain
// divergence.  Their difference is the returned cross-check.
struct CodifferentialValue {
    double value = 0.0;
    double cross_check = 0.0;
};

inline CodifferentialValue horizontal_codifferential(const MetricField& m,
                                                     const VectorFieldExpr& X,
                                                     const TangentSample& s) {
    PointEval pe(m, s, PointEval::Depth::Riemann);
    SymmetryEval se(pe, X);
    const int n = pe.n();
    const auto& g = pe.g_jets();
    std::vector<Jet> Xlow;
    Xlow.reserve(n);
    for (int j = 0; j < n; ++j) {
        Jet acc = pe.zero();
        for (int k = 0; k < n; ++k) acc = acc + g[pe.i2(j, k)] * se.X_jets()[k];
        Xlow.push_back(std::move(acc));
    }
    JetTensor low{n, {Slot::Lower}, Xlow};
    TensorValue gi = pe.inverse_metric();

    JetTensor covA = pe.cartan_h_cov(low);
    double divA = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            divA += gi(i, j) * covA.comp[pe.i2(j, i)].value();
    std::vector<Jet> cmean;
    cmean.reserve(n);
    const auto& I = pe.I_jets();
    const auto& ginv = pe.ginv_jets();
    for (int j = 0; j < n; ++j) {
        Jet acc = pe.zero();
        for (int k = 0; k < n; ++k) acc = acc + ginv[pe.i2(j, k)] * I[k];
        cmean.push_back(std::move(acc));
    }
    TensorValue n0c = pe.nabla0(JetTensor{n, {Slot::Upper}, cmean}).values();
    double corr = 0.0;
    for (int j = 0; j < n; ++j) corr += Xlow[j].value() * n0c(j);
    double a = -(divA - corr);

    JetTensor covB = pe.berwald_h_cov(low);
    double divB = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            divB += gi(i, j) * covB.comp[pe.i2(j, i)].value();
    double b = -divB;

    CodifferentialValue out;
    out.value = b;
    out.cross_check = std::abs(a - b);
    return out;
}

// Rigidity probe: a metric whose Landsberg family vanishes and which carries
// a non-affine projective field preserving the mean Cartan form must have
// vanishing Cartan torsion.  The suite asserts no counterexample arises.
struct RigidityProbe {
    double landsberg_max = 0.0;
    double projective_residual = 0.0;
    double mean_cartan_residual = 0.0;
    double psi_scale = 0.0;
    double cartan_max = 0.0;
    bool hypothesis = false;
    bool consistent = true;
};

inline RigidityProbe riemannian_rigidity_probe(
    const MetricField& m, const VectorFieldExpr& X,
    const std::vector<TangentSample>& samples, double tol = 1e-6) {
    RigidityProbe out;
    for (const auto& s : samples) {
        PointEval pe(m, s, PointEval::Depth::Full);
        SymmetryEval se(pe, X);
        NonRiemEval nr(pe);
        out.landsberg_max =
            std::max(out.landsberg_max, nr.landsberg().max_abs());
        out.projective_residual =
            std::max(out.projective_residual, se.projective_residual());
        out.mean_cartan_residual =
            std::max(out.mean_cartan_residual, se.f_vertical().max_abs());
        out.psi_scale =
            std::max(out.psi_scale,
                     std::abs(se.psi_jet().value()) / pe.F_jet().value());
        out.cartan_max = std::max(out.cartan_max, pe.cartan().C.max_abs());
    }
    out.hypothesis = out.landsberg_max <= tol &&
                     out.projective_residual <= tol &&
                     out.mean_cartan_residual <= tol && out.psi_scale > tol;
    out.consistent = !out.hypothesis || out.cartan_max <= tol;
    return out;
}

}  // namespace finsler
