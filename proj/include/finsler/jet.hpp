#pragma once

// Truncated multivariate Taylor jets in the 2n chart variables (x, y).
//
// Coefficients are Taylor-normalized: c_alpha = f^(alpha) / alpha!.
// Multiplication is the truncated Cauchy product; division and sqrt use the
// triangular recurrences obtained by matching coefficients of u*h = rhs and
// s*s = u by increasing total order; exp/ln/pow expand in the zero-valuation
// part, which terminates exactly at the truncation order.
//
// Every jet carries a layout (the set of retained multi-indices).  Taking a
// derivative returns a jet on the reduced layout, and mixed-layout arithmetic
// lands on the intersection layout, so a coefficient is stored only while it
// is still exact.  This is what lets horizontal derivatives be composed from
// jets without finite differences.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/expr.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

struct JetSpec {
    int n = 0;
    int max_x = 0;
    int max_y = 0;
    int max_total = 0;

    void validate() const {
        if (n < 1 || n > kMaxDim)
            throw ConfigError("jet spec: dimension out of range");
        if (max_x < 0 || max_x > kMaxXOrder)
            throw OrderOutOfSpec("jet spec: base-variable order above cap");
        if (max_y < 0 || max_y > kMaxYOrder)
            throw OrderOutOfSpec("jet spec: fiber-variable order above cap");
        if (max_total < 0 || max_total > kMaxTotalOrder)
            throw OrderOutOfSpec("jet spec: total order above cap");
    }
};

struct MultiIndex {
    std::array<int, kMaxDim> x{};
    std::array<int, kMaxDim> y{};

    int order_x() const { int s = 0; for (int v : x) s += v; return s; }
    int order_y() const { int s = 0; for (int v : y) s += v; return s; }
    int order() const { return order_x() + order_y(); }

    static MultiIndex dx(int i, int k = 1) { MultiIndex m; m.x[i] = k; return m; }
    static MultiIndex dy(int i, int k = 1) { MultiIndex m; m.y[i] = k; return m; }
};

namespace detail {

// Universal mixed-radix encoding shared by all layouts: base-variable
// exponents in radix 3 (cap 2), fiber exponents in radix 7 (cap 6).  Order
// checks on operands guarantee per-variable sums never carry.
inline constexpr int kRadixX = kMaxXOrder + 1;
inline constexpr int kRadixY = kMaxYOrder + 1;

struct JetLayout {
    int n, max_x, max_y, max_total;
    int size = 0;
    std::vector<std::array<std::uint8_t, 2 * kMaxDim>> exps;
    std::vector<int> ox, oy, ot;
    std::vector<int> code;
    std::vector<double> fact;
    std::vector<int> code_to_rank;
    std::vector<int> order_begin;  // rank slice [order_begin[d], order_begin[d+1])

    int code_of(const std::array<std::uint8_t, 2 * kMaxDim>& e) const {
        int c = 0, stride = 1;
        for (int v = 0; v < n; ++v) { c += e[v] * stride; stride *= kRadixX; }
        for (int v = 0; v < n; ++v) { c += e[kMaxDim + v] * stride; stride *= kRadixY; }
        return c;
    }

    int rank_of(const MultiIndex& m) const {
        int c = 0, stride = 1;
        for (int v = 0; v < n; ++v) {
            if (m.x[v] < 0 || m.x[v] > max_x) return -1;
            c += m.x[v] * stride;
            stride *= kRadixX;
        }
        for (int v = 0; v < n; ++v) {
            if (m.y[v] < 0 || m.y[v] > max_y) return -1;
            c += m.y[v] * stride;
            stride *= kRadixY;
        }
        if (m.order_x() > max_x || m.order_y() > max_y || m.order() > max_total)
            return -1;
        return code_to_rank[c];
    }

    // componentwise exps[b] <= exps[r]
    bool divides(int b, int r) const {
        const auto& eb = exps[b];
        const auto& er = exps[r];
        for (int v = 0; v < n; ++v) {
            if (eb[v] > er[v]) return false;
            if (eb[kMaxDim + v] > er[kMaxDim + v]) return false;
        }
        return true;
    }
};

inline std::shared_ptr<const JetLayout> make_layout(const JetSpec& spec) {
    auto lay = std::make_shared<JetLayout>();
    lay->n = spec.n;
    lay->max_x = spec.max_x;
    lay->max_y = spec.max_y;
    lay->max_total = spec.max_total;
    const int n = spec.n;

    std::vector<std::array<std::uint8_t, 2 * kMaxDim>> all;
    std::array<std::uint8_t, 2 * kMaxDim> cur{};
    // enumerate exponents var by var; x vars 0..n-1, y vars kMaxDim..kMaxDim+n-1
    std::function<void(int, int, int)> gen = [&](int v, int used_x, int used_y) {
        if (v == 2 * n) { all.push_back(cur); return; }
        bool is_y = v >= n;
        int slot = is_y ? kMaxDim + (v - n) : v;
        int room = spec.max_total - used_x - used_y;
        int cap = is_y ? std::min(spec.max_y - used_y, room)
                       : std::min(spec.max_x - used_x, room);
        for (int e = 0; e <= cap; ++e) {
            cur[slot] = static_cast<std::uint8_t>(e);
            gen(v + 1, used_x + (is_y ? 0 : e), used_y + (is_y ? e : 0));
        }
        cur[slot] = 0;
    };
    gen(0, 0, 0);

    auto order_of = [&](const std::array<std::uint8_t, 2 * kMaxDim>& e) {
        int s = 0;
        for (int v = 0; v < n; ++v) s += e[v] + e[kMaxDim + v];
        return s;
    };
    std::sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
        int oa = order_of(a), ob = order_of(b);
        if (oa != ob) return oa < ob;
        return lay->code_of(a) < lay->code_of(b);
    });

    int code_space = 1;
    for (int v = 0; v < n; ++v) code_space *= kRadixX * kRadixY;
    lay->code_to_rank.assign(code_space, -1);
    lay->size = static_cast<int>(all.size());
    lay->exps = std::move(all);
    lay->order_begin.assign(spec.max_total + 2, 0);
    for (int r = 0; r < lay->size; ++r) {
        const auto& e = lay->exps[r];
        int sx = 0, sy = 0;
        double f = 1.0;
        for (int v = 0; v < n; ++v) {
            sx += e[v];
            sy += e[kMaxDim + v];
            for (int k = 2; k <= e[v]; ++k) f *= k;
            for (int k = 2; k <= e[kMaxDim + v]; ++k) f *= k;
        }
        lay->ox.push_back(sx);
        lay->oy.push_back(sy);
        lay->ot.push_back(sx + sy);
        lay->fact.push_back(f);
        lay->code.push_back(lay->code_of(e));
        lay->code_to_rank[lay->code.back()] = r;
    }
    for (int d = 0; d <= spec.max_total; ++d) {
        int r = 0;
        while (r < lay->size && lay->ot[r] < d) ++r;
        lay->order_begin[d] = r;
    }
    lay->order_begin[spec.max_total + 1] = lay->size;
    return lay;
}

inline std::shared_ptr<const JetLayout> layout_cache(const JetSpec& spec) {
    spec.validate();
    static std::map<int, std::shared_ptr<const JetLayout>> cache;
    static std::mutex mu;
    int key = spec.n | (spec.max_x << 4) | (spec.max_y << 8) | (spec.max_total << 12);
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto lay = make_layout(spec);
    cache.emplace(key, lay);
    return lay;
}

}  // namespace detail

class Jet {
  public:
    Jet() = default;

    static Jet constant(const JetSpec& spec, double v) {
        Jet j(detail::layout_cache(spec));
        j.c_[0] = v;
        return j;
    }

    // Coordinate function x_i (is_y = false) or y_i (is_y = true) expanded at
    // its base value.
    static Jet coordinate(const JetSpec& spec, bool is_y, int index, double base) {
        Jet j(detail::layout_cache(spec));
        j.c_[0] = base;
        MultiIndex m = is_y ? MultiIndex::dy(index) : MultiIndex::dx(index);
        int r = j.lay_->rank_of(m);
        if (r >= 0) j.c_[r] = 1.0;
        return j;
    }

    const JetSpec spec() const {
        return {lay_->n, lay_->max_x, lay_->max_y, lay_->max_total};
    }
    int size() const { return lay_ ? lay_->size : 0; }
    double value() const { return c_[0]; }

    // f^(alpha) = c_alpha * alpha!
    double partial(const MultiIndex& m) const {
        int r = lay_->rank_of(m);
        if (r < 0)
            throw OrderOutOfSpec("requested derivative outside jet layout");
        return c_[r] * lay_->fact[r];
    }

    double coefficient(const MultiIndex& m) const {
        int r = lay_->rank_of(m);
        if (r < 0)
            throw OrderOutOfSpec("requested coefficient outside jet layout");
        return c_[r];
    }

    double max_abs_coefficient() const {
        double m = 0.0;
        for (double v : c_) m = std::max(m, std::abs(v));
        return m;
    }

    // d/dx_i or d/dy_i as a jet on the reduced layout.
    Jet derivative(bool is_y, int index) const {
        JetSpec s = spec();
        if (is_y) --s.max_y; else --s.max_x;
        --s.max_total;
        if ((is_y ? s.max_y : s.max_x) < 0 || s.max_total < 0)
            throw OrderOutOfSpec("derivative exhausts jet layout");
        Jet out(detail::layout_cache(s));
        int slot = is_y ? kMaxDim + index : index;
        for (int r = 0; r < out.lay_->size; ++r) {
            auto e = out.lay_->exps[r];
            e[slot] = static_cast<std::uint8_t>(e[slot] + 1);
            int src = lay_->code_to_rank[lay_->code_of(e)];
            out.c_[r] = c_[src] * (e[slot]);
        }
        return out;
    }

    // Restriction onto a (not larger) layout.
    Jet restricted(const JetSpec& s) const {
        auto target = detail::layout_cache(s);
        if (target.get() == lay_.get()) return *this;
        Jet out(target);
        for (int r = 0; r < target->size; ++r) {
            int src = lay_->code_to_rank[target->code[r]];
            if (src < 0 || target->ox[r] > lay_->max_x || target->oy[r] > lay_->max_y ||
                target->ot[r] > lay_->max_total)
                throw OrderOutOfSpec("restriction target exceeds source layout");
            out.c_[r] = c_[src];
        }
        return out;
    }

    friend Jet operator+(const Jet& a, const Jet& b) {
        auto [x, y] = harmonized(a, b);
        for (int r = 0; r < x.size(); ++r) x.c_[r] += y.c_[r];
        return x;
    }
    friend Jet operator-(const Jet& a, const Jet& b) {
        auto [x, y] = harmonized(a, b);
        for (int r = 0; r < x.size(); ++r) x.c_[r] -= y.c_[r];
        return x;
    }
    friend Jet operator-(const Jet& a) {
        Jet out = a;
        for (double& v : out.c_) v = -v;
        return out;
    }
    friend Jet operator*(const Jet& a, double s) {
        Jet out = a;
        for (double& v : out.c_) v *= s;
        return out;
    }
    friend Jet operator*(double s, const Jet& a) { return a * s; }
    friend Jet operator+(const Jet& a, double s) {
        Jet out = a;
        out.c_[0] += s;
        return out;
    }
    friend Jet operator+(double s, const Jet& a) { return a + s; }
    friend Jet operator-(const Jet& a, double s) { return a + (-s); }
    friend Jet operator-(double s, const Jet& a) { return (-a) + s; }
    friend Jet operator/(const Jet& a, double s) { return a * (1.0 / s); }

    friend Jet operator*(const Jet& a, const Jet& b) {
        auto [x, y] = harmonized(a, b);
        const auto& L = *x.lay_;
        Jet out(x.lay_);
        for (int i = 0; i < L.size; ++i) {
            double ai = x.c_[i];
            if (ai == 0.0) continue;
            int jmax = L.order_begin[L.max_total - L.ot[i] + 1];
            for (int j = 0; j < jmax; ++j) {
                double bj = y.c_[j];
                if (bj == 0.0) continue;
                if (L.ox[i] + L.ox[j] > L.max_x) continue;
                if (L.oy[i] + L.oy[j] > L.max_y) continue;
                out.c_[L.code_to_rank[L.code[i] + L.code[j]]] += ai * bj;
            }
        }
        return out;
    }

    friend Jet operator/(const Jet& a, const Jet& b) {
        auto [num, den] = harmonized(a, b);
        if (std::abs(den.c_[0]) < 1e-290)
            throw DomainError("division by (numerically) zero");
        return solve_product(den, num);
    }

    friend Jet sqrt(const Jet& u) {
        if (u.c_[0] < 0.0) throw DomainError("sqrt of negative value");
        if (u.c_[0] < 1e-290) {
            if (u.lay_->max_total > 0)
                throw DomainError("sqrt not differentiable at zero");
            return Jet::constant(u.spec(), std::sqrt(u.c_[0]));
        }
        const auto& L = *u.lay_;
        Jet s(u.lay_);
        s.c_[0] = std::sqrt(u.c_[0]);
        double inv2s0 = 1.0 / (2.0 * s.c_[0]);
        for (int r = 1; r < L.size; ++r) {
            double acc = u.c_[r];
            // subtract sum over proper splits beta + gamma = alpha
            for (int b = 1; b < L.size && L.ot[b] < L.ot[r]; ++b) {
                if (s.c_[b] == 0.0) continue;
                if (!L.divides(b, r)) continue;
                int g = L.code_to_rank[L.code[r] - L.code[b]];
                if (g == 0) continue;  // exclude beta = alpha
                acc -= s.c_[b] * s.c_[g];
            }
            s.c_[r] = acc * inv2s0;
        }
        return s;
    }

    friend Jet exp(const Jet& u) {
        Jet w = u;
        w.c_[0] = 0.0;
        Jet sum = Jet::constant(u.spec(), 1.0);
        Jet pw = Jet::constant(u.spec(), 1.0);
        double inv_fact = 1.0;
        for (int k = 1; k <= u.lay_->max_total; ++k) {
            pw = pw * w;
            inv_fact /= k;
            sum = sum + pw * inv_fact;
        }
        return sum * std::exp(u.c_[0]);
    }

    friend Jet ln(const Jet& u) {
        if (u.c_[0] <= 0.0) throw DomainError("ln of non-positive value");
        Jet w = u * (1.0 / u.c_[0]);
        w.c_[0] = 0.0;
        Jet sum = Jet::constant(u.spec(), std::log(u.c_[0]));
        Jet pw = Jet::constant(u.spec(), 1.0);
        for (int k = 1; k <= u.lay_->max_total; ++k) {
            pw = pw * w;
            sum = sum + pw * ((k % 2 == 1 ? 1.0 : -1.0) / k);
        }
        return sum;
    }

    friend Jet pow(const Jet& u, double r);
    friend Jet pow_int(const Jet& u, long k);

    friend Jet abs(const Jet& u) {
        if (u.c_[0] == 0.0 && u.lay_->max_total > 0)
            throw DomainError("abs not differentiable where its argument vanishes");
        if (u.c_[0] < 0.0) return -u;
        Jet out = u;
        out.c_[0] = std::abs(out.c_[0]);
        return out;
    }

  private:
    explicit Jet(std::shared_ptr<const detail::JetLayout> lay)
        : lay_(std::move(lay)), c_(lay_->size, 0.0) {}

    static std::pair<Jet, Jet> harmonized(const Jet& a, const Jet& b) {
        if (a.lay_.get() == b.lay_.get()) return {a, b};
        JetSpec s{a.lay_->n,
                  std::min(a.lay_->max_x, b.lay_->max_x),
                  std::min(a.lay_->max_y, b.lay_->max_y),
                  std::min(a.lay_->max_total, b.lay_->max_total)};
        if (a.lay_->n != b.lay_->n)
            throw EngineError("jet dimension mismatch");
        return {a.restricted(s), b.restricted(s)};
    }

    // h with u * h = rhs, triangular by total order.
    static Jet solve_product(const Jet& u, const Jet& rhs) {
        const auto& L = *u.lay_;
        Jet h(u.lay_);
        double inv_u0 = 1.0 / u.c_[0];
        for (int r = 0; r < L.size; ++r) {
            double acc = rhs.c_[r];
            for (int b = 1; b < L.size && L.ot[b] <= L.ot[r]; ++b) {
                if (u.c_[b] == 0.0) continue;
                if (!L.divides(b, r)) continue;
                acc -= u.c_[b] * h.c_[L.code_to_rank[L.code[r] - L.code[b]]];
            }
            h.c_[r] = acc * inv_u0;
        }
        return h;
    }

    std::shared_ptr<const detail::JetLayout> lay_;
    std::vector<double> c_;
};

// Largest coefficient gap on the intersection layout of the two jets.
inline double max_abs_diff_jet(const Jet& a, const Jet& b) {
    return (a - b).max_abs_coefficient();
}

inline Jet pow_int(const Jet& u, long k) {
    if (k == 0) return Jet::constant(u.spec(), 1.0);
    bool invert = k < 0;
    unsigned long e = invert ? -static_cast<unsigned long>(k) : k;
    Jet base = u;
    Jet acc = Jet::constant(u.spec(), 1.0);
    while (e > 0) {
        if (e & 1) acc = acc * base;
        e >>= 1;
        if (e > 0) base = base * base;
    }
    if (invert) return Jet::constant(u.spec(), 1.0) / acc;
    return acc;
}

inline Jet pow(const Jet& u, double r) {
    if (u.value() <= 0.0)
        throw DomainError("pow with non-positive base and fractional exponent");
    // binomial series in the zero-valuation part: u^r = u0^r * sum C(r,k) w^k
    Jet w = u * (1.0 / u.value());
    w = w - 1.0;
    JetSpec s = u.spec();
    Jet sum = Jet::constant(s, 1.0);
    Jet pw = Jet::constant(s, 1.0);
    double coef = 1.0;
    for (int k = 1; k <= s.max_total; ++k) {
        coef *= (r - (k - 1)) / k;
        pw = pw * w;
        sum = sum + pw * coef;
    }
    return sum * std::pow(u.value(), r);
}

// ---------------------------------------------------------------------------
// Jet evaluation of expression ASTs

inline Jet jet_of(const Expr& e, const JetSpec& spec, const double* x,
                  const double* y) {
    switch (e->kind) {
        case NodeKind::Const: return Jet::constant(spec, e->value);
        case NodeKind::VarX: return Jet::coordinate(spec, false, e->index, x[e->index]);
        case NodeKind::VarY: return Jet::coordinate(spec, true, e->index, y ? y[e->index] : 0.0);
        case NodeKind::Neg: return -jet_of(e->a, spec, x, y);
        case NodeKind::Add: return jet_of(e->a, spec, x, y) + jet_of(e->b, spec, x, y);
        case NodeKind::Sub: return jet_of(e->a, spec, x, y) - jet_of(e->b, spec, x, y);
        case NodeKind::Mul: return jet_of(e->a, spec, x, y) * jet_of(e->b, spec, x, y);
        case NodeKind::Div: return jet_of(e->a, spec, x, y) / jet_of(e->b, spec, x, y);
        case NodeKind::PowConst: {
            Jet base = jet_of(e->a, spec, x, y);
            if (e->int_exponent) return pow_int(base, e->exponent_int);
            return pow(base, e->value);
        }
        case NodeKind::Sqrt: return sqrt(jet_of(e->a, spec, x, y));
        case NodeKind::Exp: return exp(jet_of(e->a, spec, x, y));
        case NodeKind::Ln: return ln(jet_of(e->a, spec, x, y));
        case NodeKind::Abs: return abs(jet_of(e->a, spec, x, y));
    }
    throw EngineError("unreachable expression node");
}

inline Jet jet_of(const MetricField& m, const JetSpec& spec, const double* x,
                  const double* y) {
    m.check_guard(x);
    return jet_of(m.F, spec, x, y);
}

// ---------------------------------------------------------------------------
// Finite-difference oracle, kept deliberately independent of the jet path.
// Tensor-product second-order central stencils in each variable, one
// Richardson step in the overall scale: error model O(h^4).

namespace detail {

struct StencilTap {
    int offset;
    double weight;
};

inline const std::vector<StencilTap>& stencil_for(int k) {
    static const std::vector<StencilTap> s0{{0, 1.0}};
    static const std::vector<StencilTap> s1{{-1, -0.5}, {1, 0.5}};
    static const std::vector<StencilTap> s2{{-1, 1.0}, {0, -2.0}, {1, 1.0}};
    static const std::vector<StencilTap> s3{{-2, -0.5}, {-1, 1.0}, {1, -1.0}, {2, 0.5}};
    static const std::vector<StencilTap> s4{{-2, 1.0}, {-1, -4.0}, {0, 6.0}, {1, -4.0}, {2, 1.0}};
    switch (k) {
        case 0: return s0;
        case 1: return s1;
        case 2: return s2;
        case 3: return s3;
        default: return s4;
    }
}

}  // namespace detail

// Central-difference estimate of the alpha-partial of F at (x, y).  Richardson
// extrapolation of the second-order tensor stencil; throws StencilLeavesDomain
// if any node violates the metric's guard and OrderOutOfSpec above |alpha|=4.
inline double fd_oracle(const MetricField& m, const MultiIndex& alpha,
                        const double* x, const double* y) {
    const int n = m.dim;
    const int total = alpha.order();
    if (total > 4)
        throw OrderOutOfSpec("finite-difference oracle supports orders up to 4");
    for (int v = 0; v < n; ++v)
        if (alpha.x[v] > 4 || alpha.y[v] > 4)
            throw OrderOutOfSpec("finite-difference oracle supports orders up to 4");
    m.check_guard(x);

    static const double h0_by_order[5] = {1e-2, 1e-3, 3e-3, 6e-3, 1.2e-2};
    const double h0 = h0_by_order[total];

    std::vector<int> active;  // variable slots, x: 0..n-1, y: n..2n-1
    std::vector<int> korder;
    for (int v = 0; v < n; ++v)
        if (alpha.x[v] > 0) { active.push_back(v); korder.push_back(alpha.x[v]); }
    for (int v = 0; v < n; ++v)
        if (alpha.y[v] > 0) { active.push_back(n + v); korder.push_back(alpha.y[v]); }

    auto estimate = [&](double scale) {
        std::vector<double> h(active.size());
        for (std::size_t a = 0; a < active.size(); ++a) {
            int slot = active[a];
            double base = slot < n ? x[slot] : y[slot - n];
            h[a] = scale * h0 * (1.0 + std::abs(base));
        }
        double acc = 0.0;
        std::vector<std::size_t> idx(active.size(), 0);
        std::vector<double> px(x, x + n), py(y, y + n);
        for (;;) {
            double w = 1.0;
            for (int v = 0; v < n; ++v) { px[v] = x[v]; py[v] = y[v]; }
            for (std::size_t a = 0; a < active.size(); ++a) {
                const auto& tap = detail::stencil_for(korder[a])[idx[a]];
                int slot = active[a];
                if (slot < n) px[slot] += tap.offset * h[a];
                else py[slot - n] += tap.offset * h[a];
                w *= tap.weight / std::pow(h[a], korder[a]);
            }
            if (m.guard) {
                double g = eval(m.guard, px.data(), nullptr);
                if (!(g > 0.0))
                    throw StencilLeavesDomain(
                        "finite-difference stencil leaves the chart domain");
            }
            acc += w * eval(m.F, px.data(), py.data());
            // advance the tensor-product counter
            std::size_t a = 0;
            for (; a < active.size(); ++a) {
                if (++idx[a] < detail::stencil_for(korder[a]).size()) break;
                idx[a] = 0;
            }
            if (a == active.size()) break;
            if (active.empty()) break;
        }
        return acc;
    };

    if (active.empty()) return eval(m.F, x, y);
    double coarse = estimate(1.0);
    double fine = estimate(0.5);
    return (4.0 * fine - coarse) / 3.0;
}

}  // namespace finsler
