#include "finsler/expr.hpp"

#include <gtest/gtest.h>

#include "finsler/catalog.hpp"

using namespace finsler;

namespace {

double ev(const std::string& src, int dim, std::initializer_list<double> xs,
          std::initializer_list<double> ys) {
    Expr e = parse_expression(src, dim);
    std::vector<double> x(xs), y(ys);
    return eval(e, x.data(), y.data());
}

TEST(Expr, ArithmeticAndPrecedence) {
    EXPECT_DOUBLE_EQ(ev("x1 + 2*y1", 1, {3.0}, {4.0}), 11.0);
    EXPECT_DOUBLE_EQ(ev("x1 - x2 - 1", 2, {5.0, 2.0}, {0.0, 0.0}), 2.0);
    EXPECT_DOUBLE_EQ(ev("2*x1^2", 1, {3.0}, {0.0}), 18.0);
    // unary minus binds looser than ^
    EXPECT_DOUBLE_EQ(ev("-x1^2", 1, {3.0}, {0.0}), -9.0);
    // ^ is right-associative (exponent folds to 2^3 = 8)
    EXPECT_DOUBLE_EQ(ev("x1^2^3", 1, {2.0}, {0.0}), 256.0);
    EXPECT_DOUBLE_EQ(ev("x1^-2", 1, {2.0}, {0.0}), 0.25);
    EXPECT_DOUBLE_EQ(ev("6/2/3", 1, {0.0}, {0.0}), 1.0);
    EXPECT_DOUBLE_EQ(ev("1 - -x1", 1, {2.0}, {0.0}), 3.0);
}

TEST(Expr, Functions) {
    EXPECT_DOUBLE_EQ(ev("sqrt(y1^2 + y2^2)", 2, {0.0, 0.0}, {3.0, 4.0}), 5.0);
    EXPECT_DOUBLE_EQ(ev("exp(ln(x1))", 1, {2.5}, {0.0}), 2.5);
    EXPECT_DOUBLE_EQ(ev("abs(0 - x1)", 1, {3.0}, {0.0}), 3.0);
    EXPECT_DOUBLE_EQ(ev("pow(y1^4 + y2^4, 1/4)", 2, {0.0, 0.0}, {2.0, 0.0}), 2.0);
    EXPECT_NEAR(ev("pow(x1, 0.5)", 1, {9.0}, {0.0}), 3.0, 1e-15);
}

TEST(Expr, SyntaxErrorPositionIsOneBasedByteOffset) {
    try {
        parse_expression("sqrt(y1^2 +", 2);
        FAIL() << "expected SyntaxError";
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.position, 12u);
        EXPECT_EQ(e.expected, "operand");
    }
    try {
        parse_expression("x1 + * 2", 2);
        FAIL() << "expected SyntaxError";
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.position, 6u);
    }
}

TEST(Expr, IdentifierErrors) {
    EXPECT_THROW(parse_expression("z1 + 1", 2), UnknownIdentifier);
    EXPECT_THROW(parse_expression("sin(x1)", 2), UnknownIdentifier);
    EXPECT_THROW(parse_expression("x3 + 1", 2), IndexOutOfRange);
    EXPECT_THROW(parse_expression("y1", 2, /*allow_y=*/false),
                 YVariableInVectorField);
    EXPECT_THROW(VectorFieldExpr::parse({"x2", "y1"}, 2), YVariableInVectorField);
}

TEST(Expr, ConstantExponentRequired) {
    EXPECT_THROW(parse_expression("x1^x1", 1), SyntaxError);
    EXPECT_THROW(parse_expression("pow(x1, y1)", 1), SyntaxError);
}

TEST(Expr, DomainErrors) {
    EXPECT_THROW(ev("sqrt(0 - x1)", 1, {1.0}, {0.0}), DomainError);
    EXPECT_THROW(ev("ln(x1 - 1)", 1, {1.0}, {0.0}), DomainError);
    EXPECT_THROW(ev("1/(x1 - 2)", 1, {2.0}, {0.0}), DomainError);
    EXPECT_THROW(ev("pow(x1 - 2, 0.5)", 1, {1.0}, {0.0}), DomainError);
}

TEST(Expr, GuardViolation) {
    CatalogEntry funk = catalog_funk(2);
    double x_in[2] = {0.3, 0.1}, x_out[2] = {0.9, 0.9};
    double y[2] = {1.0, 0.0};
    EXPECT_GT(funk.metric(x_in, y), 0.0);
    EXPECT_THROW(funk.metric(x_out, y), GuardViolation);
}

TEST(Expr, FunkReducesToEuclideanNormAtCenter) {
    CatalogEntry funk = catalog_funk(2);
    double x[2] = {0.0, 0.0};
    double y[2] = {3.0, 4.0};
    EXPECT_NEAR(funk.metric(x, y), 5.0, 1e-14);
}

TEST(Expr, FormatReparseRoundTrip) {
    std::vector<std::string> sources = {
        "x1 + 2*y1",
        "-x1^2 + y1*(x2 - 1)",
        "sqrt(y1^2 + y2^2) + 0.3*y1",
        "(x1 + x2)*(x1 - x2)/(1 + x1^2)",
        "pow(y1^4 + y2^4, 1/4)",
        "exp(ln(1 + x1^2)) - abs(y1 - y2)",
        "1 - -x1",
        "x1 - (x2 - 1)",
        "2/(x1*x2)",
    };
    for (int n : {2}) {
        for (const auto& s : sources) {
            Expr e = parse_expression(s, n);
            std::string printed = format(e);
            Expr r = parse_expression(printed, n);
            EXPECT_TRUE(structurally_equal(e, r))
                << s << "  ->  " << printed;
        }
    }
    for (const auto& name : catalog_names()) {
        CatalogEntry entry = catalog_build(name, 2);
        Expr e = entry.metric.F;
        Expr r = parse_expression(format(e), 2);
        EXPECT_TRUE(structurally_equal(e, r)) << name << ": " << format(e);
    }
}

TEST(Expr, EvalIsDeterministic) {
    CatalogEntry funk = catalog_funk(3);
    double x[3] = {0.11, -0.2, 0.31};
    double y[3] = {0.7, -0.3, 0.5};
    double a = funk.metric(x, y);
    double b = funk.metric(x, y);
    EXPECT_EQ(a, b);
}

TEST(Expr, VectorFieldEval) {
    VectorFieldExpr rot = field_rotation(2);
    double x[2] = {0.3, 0.8};
    double out[2];
    rot.eval_at(x, out);
    EXPECT_DOUBLE_EQ(out[0], -0.8);
    EXPECT_DOUBLE_EQ(out[1], 0.3);

    VectorFieldExpr cp = field_projective_family(2);
    cp.eval_at(x, out);
    EXPECT_NEAR(out[0], 0.3 * 0.3, 1e-15);
    EXPECT_NEAR(out[1], 0.8 * 0.3, 1e-15);
}

}  // namespace
