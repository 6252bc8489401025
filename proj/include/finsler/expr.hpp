#pragma once

// Expression ASTs for metric functions F(x, y) and vector fields X(x).
//
// Grammar (also in docs/expression-grammar.md):
//
//   expression = term { ("+" | "-") term } ;
//   term       = unary { ("*" | "/") unary } ;
//   unary      = "-" unary | power ;
//   power      = atom [ "^" unary ] ;            right-associative
//   atom       = number | variable | call | "(" expression ")" ;
//   call       = name "(" expression { "," expression } ")" ;
//   variable   = ("x" | "y") digits ;            1-based index, bounded by dim
//   name       = "sqrt" | "exp" | "ln" | "abs" | "pow" ;
//   number     = digits [ "." digits ] [ ("e"|"E") ["+"|"-"] digits ] ;
//
// Precedence: ^  >  unary -  >  * /  >  + -.  Exponents (both "^" and the
// second argument of pow) must fold to a rational constant at parse time.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "finsler/errors.hpp"

namespace finsler {

enum class NodeKind { Const, VarX, VarY, Neg, Add, Sub, Mul, Div, PowConst,
                      Sqrt, Exp, Ln, Abs };

struct Node;
using Expr = std::shared_ptr<const Node>;

struct Node {
    NodeKind kind;
    double value = 0.0;      // Const: literal; PowConst: exponent
    bool int_exponent = false;
    long exponent_int = 0;   // valid when int_exponent
    int index = 0;           // VarX / VarY, 0-based
    Expr a, b;               // children
};

inline Expr make_node(Node n) { return std::make_shared<const Node>(std::move(n)); }

inline Expr make_const(double v) { return make_node({NodeKind::Const, v}); }

inline Expr make_var(NodeKind k, int idx) {
    Node n{k};
    n.index = idx;
    return make_node(std::move(n));
}

inline Expr make_unary(NodeKind k, Expr a) {
    Node n{k};
    n.a = std::move(a);
    return make_node(std::move(n));
}

inline Expr make_binary(NodeKind k, Expr a, Expr b) {
    Node n{k};
    n.a = std::move(a);
    n.b = std::move(b);
    return make_node(std::move(n));
}

inline Expr make_pow(Expr base, double expo) {
    Node n{NodeKind::PowConst};
    n.a = std::move(base);
    n.value = expo;
    double r = std::round(expo);
    if (std::abs(expo - r) < 1e-12 && std::abs(r) < 1e15) {
        n.int_exponent = true;
        n.exponent_int = static_cast<long>(r);
        n.value = r;
    }
    return make_node(std::move(n));
}

// ---------------------------------------------------------------------------
// Parser

namespace detail {

struct Token {
    enum Type { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen,
                RParen, Comma, End } type;
    double number = 0.0;
    std::string text;
    std::size_t pos = 0;  // 1-based byte offset of first character
};

class Lexer {
  public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) ++i_;
        Token t;
        t.pos = i_ + 1;
        if (i_ >= src_.size()) { t.type = Token::End; return t; }
        char c = src_[i_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = src_.data() + i_;
            char* end = nullptr;
            t.number = std::strtod(begin, &end);
            if (end == begin) throw SyntaxError(t.pos, "number");
            i_ += static_cast<std::size_t>(end - begin);
            t.type = Token::Number;
            return t;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i_;
            while (j < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
                ++j;
            t.type = Token::Ident;
            t.text = std::string(src_.substr(i_, j - i_));
            i_ = j;
            return t;
        }
        ++i_;
        switch (c) {
            case '+': t.type = Token::Plus; return t;
            case '-': t.type = Token::Minus; return t;
            case '*': t.type = Token::Star; return t;
            case '/': t.type = Token::Slash; return t;
            case '^': t.type = Token::Caret; return t;
            case '(': t.type = Token::LParen; return t;
            case ')': t.type = Token::RParen; return t;
            case ',': t.type = Token::Comma; return t;
            default: throw SyntaxError(t.pos, "operator or operand");
        }
    }

  private:
    std::string_view src_;
    std::size_t i_ = 0;
};

class Parser {
  public:
    Parser(std::string_view src, int dim, bool allow_y)
        : lex_(src), dim_(dim), allow_y_(allow_y) {
        advance();
    }

    Expr parse() {
        Expr e = expression();
        if (tok_.type != Token::End) throw SyntaxError(tok_.pos, "end of input");
        return e;
    }

  private:
    void advance() { tok_ = lex_.next(); }

    bool accept(Token::Type t) {
        if (tok_.type != t) return false;
        advance();
        return true;
    }

    void expect(Token::Type t, const char* what) {
        if (!accept(t)) throw SyntaxError(tok_.pos, what);
    }

    Expr expression() {
        Expr e = term();
        for (;;) {
            if (accept(Token::Plus)) e = make_binary(NodeKind::Add, e, term());
            else if (accept(Token::Minus)) e = make_binary(NodeKind::Sub, e, term());
            else return e;
        }
    }

    Expr term() {
        Expr e = unary();
        for (;;) {
            if (accept(Token::Star)) e = make_binary(NodeKind::Mul, e, unary());
            else if (accept(Token::Slash)) e = make_binary(NodeKind::Div, e, unary());
            else return e;
        }
    }

    Expr unary() {
        if (accept(Token::Minus)) return make_unary(NodeKind::Neg, unary());
        return power();
    }

    Expr power() {
        Expr base = atom();
        if (accept(Token::Caret)) {
            std::size_t pos = tok_.pos;
            Expr expo = unary();
            return make_pow(base, fold_constant(expo, pos));
        }
        return base;
    }

    Expr atom() {
        if (tok_.type == Token::Number) {
            double v = tok_.number;
            advance();
            return make_const(v);
        }
        if (tok_.type == Token::Ident) {
            Token ident = tok_;
            advance();
            if (tok_.type == Token::LParen) return call(ident);
            return variable(ident);
        }
        if (accept(Token::LParen)) {
            Expr e = expression();
            expect(Token::RParen, "')'");
            return e;
        }
        throw SyntaxError(tok_.pos, "operand");
    }

    Expr call(const Token& name) {
        expect(Token::LParen, "'('");
        std::vector<Expr> args;
        std::vector<std::size_t> arg_pos;
        arg_pos.push_back(tok_.pos);
        args.push_back(expression());
        while (accept(Token::Comma)) {
            arg_pos.push_back(tok_.pos);
            args.push_back(expression());
        }
        expect(Token::RParen, "')'");
        auto unary_fn = [&](NodeKind k) {
            if (args.size() != 1)
                throw SyntaxError(name.pos, name.text + " with one argument");
            return make_unary(k, args[0]);
        };
        if (name.text == "sqrt") return unary_fn(NodeKind::Sqrt);
        if (name.text == "exp") return unary_fn(NodeKind::Exp);
        if (name.text == "ln") return unary_fn(NodeKind::Ln);
        if (name.text == "abs") return unary_fn(NodeKind::Abs);
        if (name.text == "pow") {
            if (args.size() != 2)
                throw SyntaxError(name.pos, "pow with two arguments");
            return make_pow(args[0], fold_constant(args[1], arg_pos[1]));
        }
        throw UnknownIdentifier(name.text, name.pos);
    }

    Expr variable(const Token& ident) {
        const std::string& s = ident.text;
        if (s.size() >= 2 && (s[0] == 'x' || s[0] == 'y')) {
            bool digits = true;
            for (std::size_t i = 1; i < s.size(); ++i)
                if (!std::isdigit(static_cast<unsigned char>(s[i]))) digits = false;
            if (digits) {
                long idx = std::strtol(s.c_str() + 1, nullptr, 10);
                if (idx < 1 || idx > dim_) throw IndexOutOfRange(s, dim_);
                if (s[0] == 'y' && !allow_y_) throw YVariableInVectorField(s);
                return make_var(s[0] == 'x' ? NodeKind::VarX : NodeKind::VarY,
                                static_cast<int>(idx - 1));
            }
        }
        throw UnknownIdentifier(s, ident.pos);
    }

    // Exponents must be variable-free; fold them here.
    double fold_constant(const Expr& e, std::size_t pos) {
        switch (e->kind) {
            case NodeKind::Const: return e->value;
            case NodeKind::Neg: return -fold_constant(e->a, pos);
            case NodeKind::Add: return fold_constant(e->a, pos) + fold_constant(e->b, pos);
            case NodeKind::Sub: return fold_constant(e->a, pos) - fold_constant(e->b, pos);
            case NodeKind::Mul: return fold_constant(e->a, pos) * fold_constant(e->b, pos);
            case NodeKind::Div: {
                double d = fold_constant(e->b, pos);
                if (d == 0.0) throw SyntaxError(pos, "nonzero constant exponent");
                return fold_constant(e->a, pos) / d;
            }
            case NodeKind::PowConst:
                return std::pow(fold_constant(e->a, pos), e->value);
            default: throw SyntaxError(pos, "constant exponent");
        }
    }

    Lexer lex_;
    Token tok_;
    int dim_;
    bool allow_y_;
};

}  // namespace detail

inline Expr parse_expression(std::string_view src, int dim, bool allow_y = true) {
    return detail::Parser(src, dim, allow_y).parse();
}

// ---------------------------------------------------------------------------
// Evaluation over doubles

inline double eval(const Expr& e, const double* x, const double* y) {
    switch (e->kind) {
        case NodeKind::Const: return e->value;
        case NodeKind::VarX: return x[e->index];
        case NodeKind::VarY: return y[e->index];
        case NodeKind::Neg: return -eval(e->a, x, y);
        case NodeKind::Add: return eval(e->a, x, y) + eval(e->b, x, y);
        case NodeKind::Sub: return eval(e->a, x, y) - eval(e->b, x, y);
        case NodeKind::Mul: return eval(e->a, x, y) * eval(e->b, x, y);
        case NodeKind::Div: {
            double d = eval(e->b, x, y);
            if (d == 0.0) throw DomainError("division by zero");
            return eval(e->a, x, y) / d;
        }
        case NodeKind::PowConst: {
            double base = eval(e->a, x, y);
            if (e->int_exponent) return std::pow(base, static_cast<double>(e->exponent_int));
            if (base < 0.0) throw DomainError("negative base with fractional exponent");
            return std::pow(base, e->value);
        }
        case NodeKind::Sqrt: {
            double v = eval(e->a, x, y);
            if (v < 0.0) throw DomainError("sqrt of negative value");
            return std::sqrt(v);
        }
        case NodeKind::Exp: return std::exp(eval(e->a, x, y));
        case NodeKind::Ln: {
            double v = eval(e->a, x, y);
            if (v <= 0.0) throw DomainError("ln of non-positive value");
            return std::log(v);
        }
        case NodeKind::Abs: return std::abs(eval(e->a, x, y));
    }
    throw EngineError("unreachable expression node");
}

// ---------------------------------------------------------------------------
// Pretty-printing.  format -> parse_expression round-trips to a structurally
// identical tree (verified by tests).

namespace detail {

inline int precedence(NodeKind k) {
    switch (k) {
        case NodeKind::Add: case NodeKind::Sub: return 1;
        case NodeKind::Mul: case NodeKind::Div: return 2;
        case NodeKind::Neg: return 3;
        case NodeKind::PowConst: return 4;
        default: return 5;
    }
}

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void format_rec(const Expr& e, std::string& out) {
    auto child = [&](const Expr& c, int min_prec) {
        if (precedence(c->kind) < min_prec) {
            out += '(';
            format_rec(c, out);
            out += ')';
        } else {
            format_rec(c, out);
        }
    };
    switch (e->kind) {
        case NodeKind::Const:
            if (e->value < 0) {
                out += '(' ;
                out += format_number(e->value);
                out += ')';
            } else {
                out += format_number(e->value);
            }
            return;
        case NodeKind::VarX: out += "x" + std::to_string(e->index + 1); return;
        case NodeKind::VarY: out += "y" + std::to_string(e->index + 1); return;
        case NodeKind::Neg: out += '-'; child(e->a, 3); return;
        case NodeKind::Add: child(e->a, 1); out += " + "; child(e->b, 2); return;
        case NodeKind::Sub: child(e->a, 1); out += " - "; child(e->b, 2); return;
        case NodeKind::Mul: child(e->a, 2); out += '*'; child(e->b, 3); return;
        case NodeKind::Div: child(e->a, 2); out += '/'; child(e->b, 3); return;
        case NodeKind::PowConst:
            child(e->a, 5);
            out += '^';
            if (e->value < 0) {
                out += '(';
                out += format_number(e->value);
                out += ')';
            } else {
                out += format_number(e->value);
            }
            return;
        case NodeKind::Sqrt: out += "sqrt("; format_rec(e->a, out); out += ')'; return;
        case NodeKind::Exp: out += "exp("; format_rec(e->a, out); out += ')'; return;
        case NodeKind::Ln: out += "ln("; format_rec(e->a, out); out += ')'; return;
        case NodeKind::Abs: out += "abs("; format_rec(e->a, out); out += ')'; return;
    }
}

}  // namespace detail

inline std::string format(const Expr& e) {
    std::string out;
    detail::format_rec(e, out);
    return out;
}

inline bool structurally_equal(const Expr& a, const Expr& b) {
    if (a->kind != b->kind || a->index != b->index) return false;
    if (a->kind == NodeKind::Const || a->kind == NodeKind::PowConst)
        if (a->value != b->value) return false;
    if (static_cast<bool>(a->a) != static_cast<bool>(b->a)) return false;
    if (static_cast<bool>(a->b) != static_cast<bool>(b->b)) return false;
    if (a->a && !structurally_equal(a->a, b->a)) return false;
    if (a->b && !structurally_equal(a->b, b->b)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Field containers

// A Finsler function F(x, y) on a coordinate chart, with an optional domain
// guard: the chart is {x : guard(x) > 0}.
struct MetricField {
    int dim = 0;
    Expr F;
    Expr guard;  // may be null: guard identically positive
    std::string label;

    static MetricField parse(std::string_view f_src, int dim,
                             std::string_view guard_src = {},
                             std::string label = {}) {
        if (dim < 1 || dim > 4)
            throw ConfigError("dimension must be between 1 and 4");
        MetricField m;
        m.dim = dim;
        m.F = parse_expression(f_src, dim, /*allow_y=*/true);
        if (!guard_src.empty())
            m.guard = parse_expression(guard_src, dim, /*allow_y=*/false);
        m.label = std::move(label);
        return m;
    }

    double guard_value(const double* x) const {
        if (!guard) return 1.0;
        return eval(guard, x, nullptr);
    }

    void check_guard(const double* x) const {
        if (!guard) return;
        double g = eval(guard, x, nullptr);
        if (!(g > 0.0)) throw GuardViolation(g);
    }

    double operator()(const double* x, const double* y) const {
        check_guard(x);
        return eval(F, x, y);
    }
};

// A vector field on the base manifold: components X^i(x), no y dependence.
struct VectorFieldExpr {
    int dim = 0;
    std::vector<Expr> comps;
    std::string label;

    static VectorFieldExpr parse(const std::vector<std::string>& srcs,
                                 int dim, std::string label = {}) {
        if (static_cast<int>(srcs.size()) != dim)
            throw ConfigError("vector field needs exactly dim components");
        VectorFieldExpr X;
        X.dim = dim;
        for (const auto& s : srcs)
            X.comps.push_back(parse_expression(s, dim, /*allow_y=*/false));
        X.label = std::move(label);
        return X;
    }

    void eval_at(const double* x, double* out) const {
        for (int i = 0; i < dim; ++i) out[i] = eval(comps[i], x, nullptr);
    }
};

}  // namespace finsler
