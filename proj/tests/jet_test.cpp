#include "finsler/jet.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "finsler/catalog.hpp"
#include "finsler/rng.hpp"

using namespace finsler;

namespace {

JetSpec spec(int n, int mx, int my) { return JetSpec{n, mx, my, mx + my}; }

// Hand-computed reference: f = x1*y1^2 at x1=2, y1=3.
TEST(Jet, HandComputedMixedPartials) {
    Expr e = parse_expression("x1*y1^2", 1);
    double x[1] = {2.0}, y[1] = {3.0};
    Jet j = jet_of(e, spec(1, 1, 2), x, y);
    EXPECT_DOUBLE_EQ(j.value(), 18.0);

    MultiIndex dy2;
    dy2.y[0] = 2;
    EXPECT_DOUBLE_EQ(j.coefficient(dy2), 2.0);  // f_yy/2! = x1
    EXPECT_DOUBLE_EQ(j.partial(dy2), 4.0);      // f_yy = 2*x1

    MultiIndex dxy;
    dxy.x[0] = 1;
    dxy.y[0] = 1;
    EXPECT_DOUBLE_EQ(j.partial(dxy), 6.0);  // f_xy = 2*y1

    MultiIndex dx;
    dx.x[0] = 1;
    EXPECT_DOUBLE_EQ(j.partial(dx), 9.0);  // f_x = y1^2
}

TEST(Jet, QuadraticEnergyHessianIsIdentity) {
    Expr e = parse_expression("(y1^2 + y2^2)/2", 2);
    double x[2] = {0.4, -0.2}, y[2] = {0.7, 1.1};
    Jet j = jet_of(e, spec(2, 0, 4), x, y);
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            MultiIndex m;
            m.y[a] += 1;
            m.y[b] += 1;
            EXPECT_DOUBLE_EQ(j.partial(m), a == b ? 1.0 : 0.0);
        }
    }
}

// F = |y| in 2d: F_{y1y1} = y2^2/F^3, equals 1 at y=(0,1).
TEST(Jet, EuclideanNormSecondDerivative) {
    Expr e = parse_expression("sqrt(y1^2 + y2^2)", 2);
    double x[2] = {0.0, 0.0}, y[2] = {0.0, 1.0};
    Jet j = jet_of(e, spec(2, 0, 2), x, y);
    MultiIndex m;
    m.y[0] = 2;
    EXPECT_NEAR(j.partial(m), 1.0, 1e-14);
    MultiIndex mixed;
    mixed.y[0] = 1;
    mixed.y[1] = 1;
    EXPECT_NEAR(j.partial(mixed), 0.0, 1e-14);
}

TEST(Jet, CoordinateAndArithmetic) {
    JetSpec s = spec(2, 2, 2);
    Jet x1 = Jet::coordinate(s, false, 0, 1.5);
    Jet y2 = Jet::coordinate(s, true, 1, -2.0);
    Jet p = x1 * y2 + Jet::constant(s, 3.0);
    EXPECT_DOUBLE_EQ(p.value(), 0.0);
    MultiIndex m;
    m.x[0] = 1;
    m.y[1] = 1;
    EXPECT_DOUBLE_EQ(p.partial(m), 1.0);
    Jet q = p - p;
    EXPECT_DOUBLE_EQ(q.max_abs_coefficient(), 0.0);
}

// Product rule holds exactly on polynomial jets.
TEST(Jet, LeibnizExactOnRandomPolynomials) {
    Rng rng(404);
    JetSpec s = spec(2, 2, 3);
    double x[2] = {0.3, -0.5}, y[2] = {1.2, 0.4};
    for (int trial = 0; trial < 20; ++trial) {
        auto coef = [&] { return rng.uniform(-2.0, 2.0); };
        char buf_u[256], buf_v[256];
        std::snprintf(buf_u, sizeof buf_u,
                      "%.17g + %.17g*x1*y2 + %.17g*x2^2*y1 + %.17g*y1*y2^2",
                      coef(), coef(), coef(), coef());
        std::snprintf(buf_v, sizeof buf_v,
                      "%.17g*y1 + %.17g*x1^2*y2 + %.17g*x2*y1*y2", coef(),
                      coef(), coef());
        Expr ue = parse_expression(buf_u, 2);
        Expr ve = parse_expression(buf_v, 2);
        Jet u = jet_of(ue, s, x, y);
        Jet v = jet_of(ve, s, x, y);
        Jet uv = u * v;
        // compare against the jet of the textual product
        std::string prod = "(" + std::string(buf_u) + ")*(" + buf_v + ")";
        Jet ref = jet_of(parse_expression(prod, 2), s, x, y);
        EXPECT_LT(max_abs_diff_jet(uv, ref), 1e-13);
    }
}

TEST(Jet, DivisionGeometricSeries) {
    // 1/(1+x1) around x1=0: coefficients (-1)^k.
    Expr e = parse_expression("1/(1 + x1)", 1);
    double x[1] = {0.0}, y[1] = {1.0};
    Jet j = jet_of(e, JetSpec{1, 2, 0, 2}, x, y);
    MultiIndex m0, m1, m2;
    m1.x[0] = 1;
    m2.x[0] = 2;
    EXPECT_DOUBLE_EQ(j.coefficient(m0), 1.0);
    EXPECT_DOUBLE_EQ(j.coefficient(m1), -1.0);
    EXPECT_DOUBLE_EQ(j.coefficient(m2), 1.0);
}

TEST(Jet, DivisionInvertsMultiplication) {
    Rng rng(99);
    JetSpec s = spec(2, 2, 4);
    double x[2] = {0.2, 0.1}, y[2] = {0.9, -0.6};
    Expr ue = parse_expression("1 + x1*y1 + x2^2 + y2^2", 2);
    Expr ve = parse_expression("2 + x2*y2 + y1^2", 2);
    Jet u = jet_of(ue, s, x, y);
    Jet v = jet_of(ve, s, x, y);
    Jet w = (u * v) / v;
    EXPECT_LT(max_abs_diff_jet(w, u), 1e-13);
    (void)rng;
}

TEST(Jet, SqrtSquaresBack) {
    JetSpec s = spec(2, 1, 4);
    double x[2] = {0.25, -0.3}, y[2] = {1.1, 0.8};
    Expr ge = parse_expression("y1^2 + y2^2 + x1*y1*y2", 2);
    Jet g = jet_of(ge, s, x, y);
    Jet r = sqrt(g);
    Jet back = r * r;
    EXPECT_LT(max_abs_diff_jet(back, g), 1e-12);
}

TEST(Jet, ExpLnInverse) {
    JetSpec s = spec(1, 2, 2);
    double x[1] = {0.4}, y[1] = {0.7};
    Expr ge = parse_expression("1 + x1^2 + y1^2", 1);
    Jet g = jet_of(ge, s, x, y);
    Jet round = exp(ln(g));
    EXPECT_LT(max_abs_diff_jet(round, g), 1e-13);
}

TEST(Jet, PowQuarterMatchesNestedSqrt) {
    JetSpec s = spec(2, 0, 4);
    double x[2] = {0.0, 0.0}, y[2] = {1.0, 0.7};
    Expr qe = parse_expression("y1^4 + y2^4", 2);
    Jet q = jet_of(qe, s, x, y);
    Jet a = pow(q, 0.25);
    Jet b = sqrt(sqrt(q));
    EXPECT_LT(max_abs_diff_jet(a, b), 1e-13);
}

TEST(Jet, DerivativeExtraction) {
    JetSpec s = spec(2, 1, 3);
    double x[2] = {0.3, 0.2}, y[2] = {1.0, -0.4};
    Expr e = parse_expression("x1*y1^2*y2 + x2*y2^2", 2);
    Jet j = jet_of(e, s, x, y);
    Jet dy1 = j.derivative(true, 0);
    // dy1 of f = 2*x1*y1*y2
    EXPECT_NEAR(dy1.value(), 2.0 * 0.3 * 1.0 * (-0.4), 1e-15);
    MultiIndex m;
    m.y[1] = 1;
    EXPECT_NEAR(dy1.partial(m), 2.0 * 0.3 * 1.0, 1e-15);
    Jet dx2 = j.derivative(false, 1);
    EXPECT_NEAR(dx2.value(), (-0.4) * (-0.4), 1e-15);
}

TEST(Jet, OrderOutOfSpecThrows) {
    JetSpec s = spec(1, 1, 2);
    Expr e = parse_expression("x1*y1^2", 1);
    double x[1] = {1.0}, y[1] = {1.0};
    Jet j = jet_of(e, s, x, y);
    MultiIndex too_deep;
    too_deep.y[0] = 3;
    EXPECT_THROW(j.partial(too_deep), OrderOutOfSpec);
    MultiIndex too_wide;
    too_wide.x[0] = 2;
    EXPECT_THROW(j.partial(too_wide), OrderOutOfSpec);
}

TEST(Jet, AbsBranches) {
    JetSpec s = spec(1, 0, 2);
    double x[1] = {0.0};
    double yp[1] = {0.5}, yn[1] = {-0.5}, y0[1] = {0.0};
    Expr e = parse_expression("abs(y1)", 1);
    Jet jp = jet_of(e, s, x, yp);
    Jet jn = jet_of(e, s, x, yn);
    MultiIndex m;
    m.y[0] = 1;
    EXPECT_DOUBLE_EQ(jp.partial(m), 1.0);
    EXPECT_DOUBLE_EQ(jn.partial(m), -1.0);
    EXPECT_THROW(jet_of(e, s, x, y0), DomainError);
}

TEST(Jet, SqrtAtZeroThrows) {
    JetSpec s = spec(1, 0, 2);
    double x[1] = {0.0}, y[1] = {0.0};
    Expr e = parse_expression("sqrt(y1^2)", 1);
    EXPECT_THROW(jet_of(e, s, x, y), DomainError);
}

// The finite-difference oracle must agree with jets on every catalog metric.
// This is the independence check for the whole derivative pipeline.
TEST(Jet, FdOracleAgreesOnCatalog) {
    for (const auto& name : catalog_names()) {
        for (int n : {2, 3}) {
            CatalogEntry entry = catalog_build(name, n);
            auto samples = draw_samples(entry, 12, 1234);
            JetSpec s{n, 2, 2, 4};
            for (const auto& smp : samples) {
                Jet j = jet_of(entry.metric, s, smp.x.data(), smp.y.data());
                // enumerate |alpha| <= 3 with x-order <= 2
                std::vector<MultiIndex> alphas;
                for (int ox1 = 0; ox1 <= 2; ++ox1)
                    for (int ox2 = 0; ox2 <= 2 - ox1; ++ox2)
                        for (int oy1 = 0; oy1 <= 2; ++oy1)
                            for (int oy2 = 0; oy2 <= 2 - oy1; ++oy2) {
                                MultiIndex m;
                                m.x[0] = ox1;
                                m.x[1] = ox2;
                                m.y[0] = oy1;
                                m.y[1] = oy2;
                                if (m.order() > 3 || m.order() == 0) continue;
                                alphas.push_back(m);
                            }
                for (const auto& m : alphas) {
                    double fd;
                    try {
                        fd = fd_oracle(entry.metric, m, smp.x.data(),
                                       smp.y.data());
                    } catch (const StencilLeavesDomain&) {
                        continue;
                    }
                    double exact = j.partial(m);
                    EXPECT_NEAR(exact, fd, 2e-5 * (1.0 + std::abs(exact)))
                        << name << " n=" << n << " order=" << m.order();
                }
            }
        }
    }
}

TEST(Jet, FdOracleTightOnFunkMixed) {
    CatalogEntry funk = catalog_funk(2);
    double x[2] = {0.2, -0.1}, y[2] = {0.8, 0.5};
    JetSpec s{2, 0, 2, 2};
    Jet j = jet_of(funk.metric, s, x, y);
    MultiIndex m;
    m.y[0] = 1;
    m.y[1] = 1;
    double fd = fd_oracle(funk.metric, m, x, y);
    EXPECT_NEAR(j.partial(m), fd, 1e-7);
}

TEST(Jet, FdOracleStencilLeavesDomain) {
    CatalogEntry funk = catalog_funk(2);
    double x[2] = {0.9995, 0.0}, y[2] = {1.0, 0.0};
    MultiIndex m;
    m.x[0] = 1;
    EXPECT_THROW(fd_oracle(funk.metric, m, x, y), StencilLeavesDomain);
}

TEST(Jet, SpecValidation) {
    EXPECT_THROW((JetSpec{5, 1, 1, 2}.validate()), ConfigError);
    EXPECT_THROW((JetSpec{2, 3, 1, 4}.validate()), OrderOutOfSpec);
    EXPECT_THROW((JetSpec{2, 1, 7, 8}.validate()), OrderOutOfSpec);
    EXPECT_NO_THROW((JetSpec{2, 2, 6, 8}.validate()));
}

TEST(Jet, RestrictionDropsHigherOrders) {
    JetSpec big = spec(2, 2, 3);
    JetSpec small = spec(2, 1, 2);
    double x[2] = {0.3, 0.1}, y[2] = {0.8, 0.2};
    Expr e = parse_expression("x1^2*y1 + y1^2*y2 + x2*y2", 2);
    Jet j = jet_of(e, big, x, y);
    Jet r = j.restricted(small);
    Jet direct = jet_of(e, small, x, y);
    EXPECT_LT(max_abs_diff_jet(r, direct), 1e-15);
}

TEST(Jet, MixedLayoutArithmeticLandsOnIntersection) {
    double x[2] = {0.3, 0.1}, y[2] = {0.8, 0.2};
    Expr e = parse_expression("x1*y1 + y2^2", 2);
    Jet a = jet_of(e, spec(2, 2, 3), x, y);
    Jet b = jet_of(e, spec(2, 1, 4), x, y);
    Jet sum = a + b;
    EXPECT_EQ(sum.spec().max_x, 1);
    EXPECT_EQ(sum.spec().max_y, 3);
    MultiIndex m;
    m.x[0] = 1;
    m.y[0] = 1;
    EXPECT_DOUBLE_EQ(sum.partial(m), 2.0);
}

TEST(Jet, DeterministicCoefficients) {
    CatalogEntry funk = catalog_funk(3);
    double x[3] = {0.11, -0.2, 0.08}, y[3] = {0.7, -0.3, 0.5};
    JetSpec s{3, 1, 3, 4};
    Jet a = jet_of(funk.metric, s, x, y);
    Jet b = jet_of(funk.metric, s, x, y);
    EXPECT_EQ(max_abs_diff_jet(a, b), 0.0);
}

}  // namespace
