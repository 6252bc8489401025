#include "finsler/core.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "finsler/catalog.hpp"

using namespace finsler;

namespace {

PointEval make(const CatalogEntry& e, const TangentSample& s,
               PointEval::Depth d = PointEval::Depth::Spray) {
    return PointEval(e.metric, s, d);
}

TangentSample sample_of(int n, std::initializer_list<double> xs,
                        std::initializer_list<double> ys) {
    TangentSample s;
    s.n = n;
    int i = 0;
    for (double v : xs) s.x[i++] = v;
    i = 0;
    for (double v : ys) s.y[i++] = v;
    return s;
}

TEST(Core, EuclideanMetricIsIdentity) {
    CatalogEntry e = catalog_euclidean(2);
    auto pe = make(e, sample_of(2, {0.3, -0.2}, {1.2, 0.7}),
                   PointEval::Depth::Metric);
    TensorValue g = pe.fundamental_tensor();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            EXPECT_NEAR(g(i, j), i == j ? 1.0 : 0.0, 1e-14);
}

TEST(Core, FunkMetricIsIdentityAtCenter) {
    CatalogEntry e = catalog_funk(2);
    auto pe = make(e, sample_of(2, {0.0, 0.0}, {0.8, -0.5}),
                   PointEval::Depth::Metric);
    TensorValue g = pe.fundamental_tensor();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            EXPECT_NEAR(g(i, j), i == j ? 1.0 : 0.0, 1e-12);
}

// g_ij from the F^2 Hessian must match F F_yy + F_y F_y computed from jets of
// F itself, and from the finite-difference oracle (fully independent path).
TEST(Core, MetricMatchesProductFormAndFdOracle) {
    for (const auto& name : catalog_names()) {
        for (int n : {2, 3}) {
            CatalogEntry e = catalog_build(name, n);
            auto samples = draw_samples(e, 6, 20240 + n);
            for (const auto& s : samples) {
                auto pe = make(e, s, PointEval::Depth::Metric);
                TensorValue g = pe.fundamental_tensor();
                const Jet& F = pe.F_jet();
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        MultiIndex mi, mj, mij;
                        mi.y[i] = 1;
                        mj.y[j] = 1;
                        mij.y[i] += 1;
                        mij.y[j] += 1;
                        double form = F.value() * F.partial(mij) +
                                      F.partial(mi) * F.partial(mj);
                        EXPECT_NEAR(g(i, j), form, 1e-10)
                            << name << " n=" << n;
                    }
                // fd spot check on the (0,0) component
                MultiIndex m00, m0;
                m00.y[0] = 2;
                m0.y[0] = 1;
                double f = F.value();
                double fd_f20 = fd_oracle(e.metric, m00, s.x.data(), s.y.data());
                double fd_f0 = fd_oracle(e.metric, m0, s.x.data(), s.y.data());
                EXPECT_NEAR(g(0, 0), f * fd_f20 + fd_f0 * fd_f0,
                            2e-6 * (1.0 + std::abs(g(0, 0))))
                    << name;
            }
        }
    }
}

TEST(Core, InverseMetricResidual) {
    for (const auto& name : catalog_names()) {
        CatalogEntry e = catalog_build(name, 3);
        auto samples = draw_samples(e, 5, 99);
        for (const auto& s : samples) {
            auto pe = make(e, s, PointEval::Depth::Metric);
            TensorValue g = pe.fundamental_tensor();
            TensorValue gi = pe.inverse_metric();
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    double acc = 0.0;
                    for (int k = 0; k < 3; ++k) acc += g(i, k) * gi(k, j);
                    EXPECT_NEAR(acc, i == j ? 1.0 : 0.0, 1e-12) << name;
                }
        }
    }
}

TEST(Core, QuarticDegeneratesOnAxis) {
    CatalogEntry e = catalog_quartic_minkowski(2);
    auto pe = make(e, sample_of(2, {0.0, 0.0}, {1.0, 0.0}),
                   PointEval::Depth::Metric);
    EXPECT_THROW(pe.fundamental_tensor(), NotPositiveDefinite);
}

TEST(Core, CartanFamilyEuclideanVanishes) {
    CatalogEntry e = catalog_euclidean(3);
    auto pe = make(e, sample_of(3, {0.1, 0.2, -0.1}, {0.5, -0.8, 1.1}),
                   PointEval::Depth::Metric);
    auto fam = pe.cartan();
    EXPECT_LT(fam.A.max_abs(), 1e-13);
    EXPECT_LT(fam.C.max_abs(), 1e-13);
    EXPECT_LT(fam.I.max_abs(), 1e-13);
}

TEST(Core, RandersMeanCartanNonzero) {
    CatalogEntry e = catalog_randers(2);
    auto pe = make(e, sample_of(2, {0.0, 0.0}, {0.0, 1.0}),
                   PointEval::Depth::Metric);
    auto fam = pe.cartan();
    EXPECT_GT(fam.I.max_abs(), 1e-3);
}

TEST(Core, CartanFamilyIdentities) {
    for (const auto& name : catalog_names()) {
        CatalogEntry e = catalog_build(name, 2);
        auto samples = draw_samples(e, 8, 314);
        for (const auto& s : samples) {
            auto pe = make(e, s, PointEval::Depth::Metric);
            auto fam = pe.cartan();
            double F = pe.F_jet().value();
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    for (int k = 0; k < 2; ++k) {
                        // total symmetry
                        EXPECT_NEAR(fam.C(i, j, k), fam.C(j, i, k), 1e-12);
                        EXPECT_NEAR(fam.C(i, j, k), fam.C(i, k, j), 1e-12);
                        // A = F C
                        EXPECT_NEAR(fam.A(i, j, k), F * fam.C(i, j, k), 1e-12);
                    }
            // y-contraction vanishes
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k) {
                    double acc = 0.0;
                    for (int i = 0; i < 2; ++i)
                        acc += s.y[i] * fam.C(i, j, k);
                    EXPECT_NEAR(acc, 0.0, 1e-10) << name;
                }
        }
    }
}

TEST(Core, CanonicalSection) {
    CatalogEntry eu = catalog_euclidean(2);
    auto pe = make(eu, sample_of(2, {0.0, 0.0}, {3.0, 4.0}),
                   PointEval::Depth::Metric);
    auto cs = pe.canonical_section();
    EXPECT_NEAR(cs.ell_up(0), 0.6, 1e-14);
    EXPECT_NEAR(cs.ell_up(1), 0.8, 1e-14);

    for (const auto& name : catalog_names()) {
        CatalogEntry e = catalog_build(name, 3);
        auto samples = draw_samples(e, 5, 2718);
        for (const auto& s : samples) {
            auto p = make(e, s, PointEval::Depth::Metric);
            auto c = p.canonical_section();
            TensorValue g = p.fundamental_tensor();
            auto fam = p.cartan();
            double gll = 0.0;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    gll += g(i, j) * c.ell_up(i) * c.ell_up(j);
            EXPECT_NEAR(gll, 1.0, 1e-10) << name;
            // ell_i = g_ij ell^j
            for (int i = 0; i < 3; ++i) {
                double low = 0.0;
                for (int j = 0; j < 3; ++j) low += g(i, j) * c.ell_up(j);
                EXPECT_NEAR(c.ell_low(i), low, 1e-10) << name;
            }
            // A(.,.,ell) = 0
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    double acc = 0.0;
                    for (int k = 0; k < 3; ++k)
                        acc += fam.A(i, j, k) * c.ell_up(k);
                    EXPECT_NEAR(acc, 0.0, 1e-10) << name;
                }
        }
    }
}

TEST(Core, SprayEuclideanVanishes) {
    CatalogEntry e = catalog_euclidean(2);
    auto pe = make(e, sample_of(2, {0.4, -0.1}, {1.0, 2.0}));
    EXPECT_LT(pe.spray().max_abs(), 1e-13);
}

// Conformal-factor Christoffel symbols: the independent closed form for the
// sphere chart, gamma^i_jk = d^i_j p_k + d^i_k p_j - d_jk p^i with
// p_i = -2 x_i / (1 + |x|^2).
TensorValue sphere_christoffel(int n, const TangentSample& s) {
    double r2 = 0.0;
    for (int i = 0; i < n; ++i) r2 += s.x[i] * s.x[i];
    Vec p{};
    for (int i = 0; i < n; ++i) p[i] = -2.0 * s.x[i] / (1.0 + r2);
    TensorValue out(n, {Slot::Upper, Slot::Lower, Slot::Lower});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                out(i, j, k) = (i == j ? p[k] : 0.0) + (i == k ? p[j] : 0.0) -
                               (j == k ? p[i] : 0.0);
    return out;
}

TEST(Core, SphereSprayQuadraticAndClosedForm) {
    CatalogEntry e = catalog_sphere_chart(2);
    auto samples = draw_samples(e, 6, 555);
    for (const auto& s : samples) {
        auto pe = make(e, s);
        TensorValue G = pe.spray();
        TangentSample s2 = s;
        for (int i = 0; i < 2; ++i) s2.y[i] *= 2.0;
        auto pe2 = make(e, s2);
        TensorValue G2 = pe2.spray();
        for (int i = 0; i < 2; ++i)
            EXPECT_NEAR(G2(i), 4.0 * G(i), 1e-10 * (1.0 + std::abs(G(i))));

        TensorValue gamma = sphere_christoffel(2, s);
        for (int i = 0; i < 2; ++i) {
            double closed = 0.0;
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k)
                    closed += 0.5 * gamma(i, j, k) * s.y[j] * s.y[k];
            EXPECT_NEAR(G(i), closed, 1e-10 * (1.0 + std::abs(closed)));
        }
    }
}

TEST(Core, FunkSprayIsHalfFY) {
    CatalogEntry e = catalog_funk(2);
    // pinned point from the build contract
    auto pe = make(e, sample_of(2, {0.1, 0.0}, {1.0, 0.0}));
    TensorValue G = pe.spray();
    double F = pe.F_jet().value();
    EXPECT_NEAR(G(0), 0.5 * F * 1.0, 1e-8);
    EXPECT_NEAR(G(1), 0.0, 1e-8);

    for (int n : {2, 3}) {
        CatalogEntry en = catalog_funk(n);
        auto samples = draw_samples(en, 8, 777);
        for (const auto& s : samples) {
            auto p = make(en, s);
            TensorValue Gs = p.spray();
            double Fv = p.F_jet().value();
            for (int i = 0; i < n; ++i)
                EXPECT_NEAR(Gs(i), 0.5 * Fv * s.y[i],
                            1e-8 * (1.0 + std::abs(Gs(i))));
        }
    }
}

TEST(Core, BerwaldFamilyStructure) {
    CatalogEntry e = catalog_funk(2);
    auto samples = draw_samples(e, 5, 808);
    for (const auto& s : samples) {
        auto pe = make(e, s, PointEval::Depth::SprayDeep);
        TensorValue G = pe.spray();
        TensorValue Gd = pe.nonlinear_connection();
        TensorValue Gdd = pe.berwald_coeffs();
        TensorValue B = pe.berwald_curvature();
        for (int i = 0; i < 2; ++i) {
            double acc = 0.0;
            for (int j = 0; j < 2; ++j) acc += Gd(i, j) * s.y[j];
            EXPECT_NEAR(acc, 2.0 * G(i), 1e-10 * (1.0 + std::abs(G(i))));
            for (int j = 0; j < 2; ++j) {
                double a2 = 0.0;
                for (int k = 0; k < 2; ++k) a2 += Gdd(i, j, k) * s.y[k];
                EXPECT_NEAR(a2, Gd(i, j), 1e-10 * (1.0 + std::abs(Gd(i, j))));
                for (int k = 0; k < 2; ++k) {
                    EXPECT_NEAR(Gdd(i, j, k), Gdd(i, k, j), 1e-11);
                    double a3 = 0.0;
                    for (int l = 0; l < 2; ++l) a3 += B(i, l, j, k) * s.y[l];
                    EXPECT_NEAR(a3, 0.0, 1e-10);
                    for (int l = 0; l < 2; ++l) {
                        EXPECT_NEAR(B(i, j, k, l), B(i, k, j, l), 1e-11);
                        EXPECT_NEAR(B(i, j, k, l), B(i, j, l, k), 1e-11);
                    }
                }
            }
        }
    }
}

TEST(Core, LocallyMinkowskiAndRiemannianAreBerwald) {
    for (const char* name : {"randers", "quartic_minkowski"}) {
        CatalogEntry e = catalog_build(name, 2);
        auto samples = draw_samples(e, 5, 123);
        for (const auto& s : samples) {
            auto pe = make(e, s, PointEval::Depth::SprayDeep);
            EXPECT_LT(pe.spray().max_abs(), 1e-12) << name;
            EXPECT_LT(pe.berwald_curvature().max_abs(), 1e-10) << name;
        }
    }
    CatalogEntry sph = catalog_sphere_chart(2);
    for (const auto& s : draw_samples(sph, 5, 124)) {
        auto pe = make(sph, s, PointEval::Depth::SprayDeep);
        EXPECT_LT(pe.berwald_curvature().max_abs(), 1e-9);
    }
}

TEST(Core, CartanCoeffsSphereClosedForm) {
    CatalogEntry e = catalog_sphere_chart(2);
    auto samples = draw_samples(e, 6, 661);
    for (const auto& s : samples) {
        auto pe = make(e, s);
        TensorValue gamma = pe.cartan_coeffs();
        TensorValue closed = sphere_christoffel(2, s);
        EXPECT_LT(max_abs_diff(gamma, closed), 1e-8);
    }
}

TEST(Core, CartanCoeffsSprayIdentity) {
    for (const auto& name : catalog_names()) {
        CatalogEntry e = catalog_build(name, 2);
        auto samples = draw_samples(e, 4, 4242);
        for (const auto& s : samples) {
            auto pe = make(e, s);
            TensorValue gamma = pe.cartan_coeffs();
            TensorValue G = pe.spray();
            for (int i = 0; i < 2; ++i) {
                double acc = 0.0;
                for (int j = 0; j < 2; ++j)
                    for (int k = 0; k < 2; ++k)
                        acc += gamma(i, j, k) * s.y[j] * s.y[k];
                EXPECT_NEAR(acc, 2.0 * G(i), 1e-9 * (1.0 + std::abs(G(i))))
                    << name;
            }
        }
    }
}

TEST(Core, MetricCompatibility) {
    for (const auto& name : catalog_names()) {
        CatalogEntry e = catalog_build(name, 2);
        auto samples = draw_samples(e, 4, 515);
        for (const auto& s : samples) {
            auto pe = make(e, s);
            JetTensor nabla_g = pe.cartan_h_cov(pe.metric_jt());
            EXPECT_LT(nabla_g.values().max_abs(), 1e-9) << name;
        }
    }
}

TEST(Core, VerticalDerivativeOfFIsEll) {
    for (const auto& name : catalog_names()) {
        CatalogEntry e = catalog_build(name, 2);
        auto samples = draw_samples(e, 4, 616);
        for (const auto& s : samples) {
            auto pe = make(e, s, PointEval::Depth::Metric);
            JetTensor dF = pe.cartan_v_cov(pe.scalar_jt(pe.F_jet()));
            auto cs = pe.canonical_section();
            for (int k = 0; k < 2; ++k)
                EXPECT_NEAR(dF.values()(k), cs.ell_low(k), 1e-12) << name;
        }
    }
}

TEST(Core, BerwaldD0OnFlatIsDirectionalDerivative) {
    CatalogEntry e = catalog_euclidean(2);
    TangentSample s = sample_of(2, {0.3, -0.4}, {1.1, 0.6});
    auto pe = make(e, s);
    // 0-homogeneous scalar with x-dependence
    Expr f = parse_expression("(x1 + x2^2)*y1/sqrt(y1^2 + y2^2)", 2);
    Jet jf = jet_of(f, PointEval::depth_spec(2, PointEval::Depth::Spray),
                    s.x.data(), s.y.data());
    JetTensor d0 = pe.nabla0(pe.scalar_jt(jf), /*cartan=*/false);
    double expect = 0.0;
    for (int k = 0; k < 2; ++k) {
        MultiIndex m;
        m.x[k] = 1;
        expect += s.y[k] * jf.partial(m);
    }
    EXPECT_NEAR(d0.values()(0), expect, 1e-12);
}

TEST(Core, CartanAndBerwaldAgreeAlongY) {
    for (const char* name : {"funk", "randers_poly"}) {
        CatalogEntry e = catalog_build(name, 2);
        auto samples = draw_samples(e, 4, 717);
        for (const auto& s : samples) {
            auto pe = make(e, s, PointEval::Depth::Full);
            JetTensor a = pe.nabla0(pe.cartan_jt(), true);
            JetTensor b = pe.nabla0(pe.cartan_jt(), false);
            EXPECT_LT(max_abs_diff(a.values(), b.values()), 1e-9) << name;
        }
    }
}

TEST(Core, HomogeneityLadder) {
    const double lam = 1.7;
    for (const auto& name : catalog_names()) {
        CatalogEntry e = catalog_build(name, 2);
        auto samples = draw_samples(e, 4, 919);
        for (const auto& s : samples) {
            TangentSample sl = s;
            for (int i = 0; i < 2; ++i) sl.y[i] *= lam;
            auto a = make(e, s, PointEval::Depth::SprayDeep);
            auto b = make(e, sl, PointEval::Depth::SprayDeep);
            auto check = [&](const TensorValue& t0, const TensorValue& t1,
                             int deg, const char* what) {
                double scale = std::pow(lam, deg);
                for (std::size_t r = 0; r < t0.data().size(); ++r)
                    EXPECT_NEAR(t1.data()[r], scale * t0.data()[r],
                                1e-9 * (1.0 + std::abs(t0.data()[r])))
                        << name << " " << what;
            };
            check(a.fundamental_tensor(), b.fundamental_tensor(), 0, "g");
            check(a.cartan().C, b.cartan().C, -1, "C");
            check(a.cartan().A, b.cartan().A, 0, "A");
            check(a.spray(), b.spray(), 2, "G");
            check(a.nonlinear_connection(), b.nonlinear_connection(), 1, "Gd");
            check(a.berwald_coeffs(), b.berwald_coeffs(), 0, "Gdd");
            check(a.berwald_curvature(), b.berwald_curvature(), -1, "B");
        }
    }
}

TEST(Core, DeickeConsistencyOnCatalog) {
    for (const auto& name : catalog_names()) {
        CatalogEntry e = catalog_build(name, 2);
        auto samples = draw_samples(e, 6, 121);
        for (const auto& s : samples) {
            auto pe = make(e, s, PointEval::Depth::Metric);
            auto fam = pe.cartan();
            double ni = fam.I.max_abs();
            double nc = fam.C.max_abs();
            bool both_zero = ni < 1e-10 && nc < 1e-10;
            bool both_nonzero = ni > 1e-6 && nc > 1e-6;
            EXPECT_TRUE(both_zero || both_nonzero)
                << name << " |I|=" << ni << " |C|=" << nc;
        }
    }
}

TEST(Core, MetricTierRefusesSpray) {
    CatalogEntry e = catalog_funk(2);
    auto pe = make(e, sample_of(2, {0.1, 0.1}, {1.0, 0.3}),
                   PointEval::Depth::Metric);
    EXPECT_THROW(pe.spray(), OrderOutOfSpec);
}

TEST(Core, DimensionMismatchRejected) {
    CatalogEntry e = catalog_euclidean(3);
    TangentSample s = sample_of(2, {0.0, 0.0}, {1.0, 0.0});
    EXPECT_THROW(PointEval(e.metric, s), ConfigError);
}

}  // namespace
